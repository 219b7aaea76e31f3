use statrs::function::gamma::digamma;

use super::InferenceError;
use crate::stats::MomentTable;

/// Lower bound applied to every re-estimated `gamma_t`.
pub const GAMMA_FLOOR: f64 = 1e-5;

/// Inner-step cap of [`estimate_gamma`].
pub const GAMMA_MAX_STEPS: usize = 100;
const TOLERANCE: f64 = 1e-6;

/// Digamma fixed point for the asymmetric document-topic prior:
///
/// `gamma_t <- gamma_t * [sum_d psi(E[n_dt] + gamma_t) - D psi(gamma_t)]
///                     / [sum_d psi(n_d + sum gamma) - D psi(sum gamma)]`
///
/// iterated until the largest relative change drops below `1e-6` or 100
/// steps have run.
pub fn estimate_gamma(moments: &MomentTable, gamma: &[f64], doc_lengths: &[usize]) -> Result<Vec<f64>, InferenceError> {
    estimate_gamma_steps(moments, gamma, doc_lengths, GAMMA_MAX_STEPS)
}

/// [`estimate_gamma`] with at most `max_steps` fixed-point steps.
pub fn estimate_gamma_steps(
    moments: &MomentTable,
    gamma: &[f64],
    doc_lengths: &[usize],
    max_steps: usize,
) -> Result<Vec<f64>, InferenceError> {
    let topics = moments.num_topics();
    if gamma.len() != topics || doc_lengths.len() != moments.num_documents() {
        return Err(InferenceError::InvalidConfig(format!(
            "gamma ({}) / document lengths ({}) do not match the moment table ({topics} topics, {} documents)",
            gamma.len(),
            doc_lengths.len(),
            moments.num_documents()
        )));
    }
    if let Some(g) = gamma.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
        return Err(InferenceError::NonFinite(format!("gamma entry {g}")));
    }
    let docs = doc_lengths.len() as f64;
    let mut gamma = gamma.to_vec();
    for _ in 0..max_steps {
        let sum: f64 = gamma.iter().sum();
        let denom = doc_lengths.iter().map(|&n| digamma(n as f64 + sum)).sum::<f64>() - docs * digamma(sum);
        if !denom.is_finite() {
            return Err(InferenceError::NonFinite(format!("denominator {denom}")));
        }
        if denom <= 0.0 {
            // every document is empty: no information about gamma
            return Ok(gamma);
        }
        let mut change: f64 = 0.0;
        for (t, g) in gamma.iter_mut().enumerate() {
            let e = (0..doc_lengths.len()).map(|d| moments.doc_topic(d)[t]);
            let numer = e.map(|x| digamma(x + *g)).sum::<f64>() - docs * digamma(*g);
            if !numer.is_finite() {
                return Err(InferenceError::NonFinite(format!("numerator {numer} for topic {t}")));
            }
            let updated = (*g * numer / denom).max(GAMMA_FLOOR);
            change = change.max((updated - *g).abs() / *g);
            *g = updated;
        }
        if change < TOLERANCE {
            break;
        }
    }
    Ok(gamma)
}
