use rand::Rng as _;

use super::InferenceError;
use crate::corpus::Corpus;
use crate::rng::Rng;
use crate::stats::{ExcludedMoments, Hyperparams, StatsError, TokenPosterior};

/// `(n_dt + gamma_t) * (n_tv + beta) * (1 / (n_t + V beta))`, evaluated in
/// exactly this order everywhere so that Gibbs, CVB0 and the projection
/// composition agree bit for bit on equal inputs.
#[inline]
pub(crate) fn collapsed_weight(doc_topic: f64, word_topic: f64, c: f64, gamma_t: f64, beta: f64) -> f64 {
    (doc_topic + gamma_t) * (word_topic + beta) * c
}

#[inline]
pub(crate) fn inverse_total(topic_total: f64, v_beta: f64) -> f64 {
    1.0 / (topic_total + v_beta)
}

pub(crate) fn normalize(weights: &mut [f64]) {
    let sum: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= sum);
}

pub(crate) fn cvb0_into(ex: &ExcludedMoments, h: &Hyperparams, out: &mut [f64]) {
    let (beta, v_beta) = (h.beta(), h.v_beta());
    for (t, o) in out.iter_mut().enumerate() {
        let c = inverse_total(ex.topic_total[t], v_beta);
        *o = collapsed_weight(ex.doc_topic[t], ex.word_topic[t], c, h.gamma()[t], beta);
    }
    normalize(out);
}

pub(crate) fn cvb_into(ex: &ExcludedMoments, h: &Hyperparams, out: &mut [f64]) -> Result<(), InferenceError> {
    let var = ex.variances.as_ref().ok_or(StatsError::MissingVariances)?;
    let (beta, v_beta) = (h.beta(), h.v_beta());
    for (t, o) in out.iter_mut().enumerate() {
        let gamma_t = h.gamma()[t];
        let c = inverse_total(ex.topic_total[t], v_beta);
        let base = collapsed_weight(ex.doc_topic[t], ex.word_topic[t], c, gamma_t, beta);
        let word = var.word_topic[t] / (2.0 * (beta + ex.word_topic[t]).powi(2));
        let total = var.topic_total[t] / (2.0 * (v_beta + ex.topic_total[t]).powi(2));
        let doc = var.doc_topic[t] / (2.0 * (gamma_t + ex.doc_topic[t]).powi(2));
        *o = base * (-word + total).exp() * (-doc).exp();
    }
    normalize(out);
    Ok(())
}

/// CVB1d weights: CVB0 with `c` replaced by [`cvb1d_c_factor`].
pub(crate) fn cvb1d_into(ex: &ExcludedMoments, h: &Hyperparams, out: &mut [f64]) -> Result<(), InferenceError> {
    let var = ex.variances.as_ref().ok_or(StatsError::MissingVariances)?;
    let (beta, v_beta) = (h.beta(), h.v_beta());
    for (t, o) in out.iter_mut().enumerate() {
        let c = cvb1d_c_factor(ex.topic_total[t], var.topic_total[t], v_beta);
        *o = collapsed_weight(ex.doc_topic[t], ex.word_topic[t], c, h.gamma()[t], beta);
    }
    normalize(out);
    Ok(())
}

/// CVB0 / CVB1s weights with an explicit per-topic `c`.
pub(crate) fn with_c_into(ex: &ExcludedMoments, h: &Hyperparams, c: &[f64], out: &mut [f64]) {
    let beta = h.beta();
    for (t, o) in out.iter_mut().enumerate() {
        *o = collapsed_weight(ex.doc_topic[t], ex.word_topic[t], c[t], h.gamma()[t], beta);
    }
    normalize(out);
}

/// Zero-order collapsed update from the excluded expected counts.
pub fn cvb0_update(ex: &ExcludedMoments, h: &Hyperparams) -> Vec<f64> {
    let mut out = vec![0.0; ex.num_topics()];
    cvb0_into(ex, h, &mut out);
    out
}

/// Second-order CVB update: the CVB0 weight times
/// `exp(-V[n_tv] / 2(beta + E[n_tv])^2 + V[n_t] / 2(V beta + E[n_t])^2)`
/// and `exp(-V[n_dt] / 2(gamma_t + E[n_dt])^2)`.
pub fn cvb_update(ex: &ExcludedMoments, h: &Hyperparams) -> Result<Vec<f64>, InferenceError> {
    let mut out = vec![0.0; ex.num_topics()];
    cvb_into(ex, h, &mut out)?;
    Ok(out)
}

/// Type-based CVB0 update for one (document, word type) with all `n_dv`
/// occurrences excluded. Same arithmetic as [`cvb0_update`].
pub fn tcvb0_update(ex: &ExcludedMoments, h: &Hyperparams) -> Vec<f64> {
    cvb0_update(ex, h)
}

/// `1/(E + V beta) + Var/(E + V beta)^3`.
pub fn cvb1d_c_factor(expected_total: f64, variance_total: f64, v_beta: f64) -> f64 {
    let x = expected_total + v_beta;
    1.0 / x + variance_total / (x * x * x)
}

/// Individual terms `1/(n_t^{\d,i}(z^(s)) + V beta)` for `samples` joint
/// draws `z^(s)` of every token other than `(d, i)` from `q`.
#[allow(clippy::too_many_arguments)]
pub fn cvb1s_c_samples(
    q: &TokenPosterior,
    corpus: &Corpus,
    d: usize,
    i: usize,
    topic: usize,
    samples: usize,
    v_beta: f64,
    rng: &mut Rng,
) -> Vec<f64> {
    (0..samples)
        .map(|_| {
            let mut count = 0usize;
            for (dd, doc) in corpus.documents().iter().enumerate() {
                for ii in 0..doc.len() {
                    if (dd, ii) == (d, i) {
                        continue;
                    }
                    if sample_categorical(q.get(dd, ii), rng) == topic {
                        count += 1;
                    }
                }
            }
            inverse_total(count as f64, v_beta)
        })
        .collect()
}

/// Sample average of [`cvb1s_c_samples`], an unbiased estimate of
/// `E[1/(n_t^{\d,i} + V beta)]`.
#[allow(clippy::too_many_arguments)]
pub fn cvb1s_c_factor(
    q: &TokenPosterior,
    corpus: &Corpus,
    d: usize,
    i: usize,
    topic: usize,
    samples: usize,
    v_beta: f64,
    rng: &mut Rng,
) -> f64 {
    assert!(samples >= 1, "at least one sample is required");
    let draws = cvb1s_c_samples(q, corpus, d, i, topic, samples, v_beta, rng);
    draws.iter().sum::<f64>() / samples as f64
}

/// Inverse-CDF draw from a normalized (or unnormalized) weight vector.
pub(crate) fn sample_categorical(weights: &[f64], rng: &mut Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (t, &w) in weights.iter().enumerate() {
        if u < w {
            return t;
        }
        u -= w;
    }
    // rounding left u just past the last positive weight
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(weights.len() - 1)
}

/// Divergence orders used for the three factors of `q(z_{d,i})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorAlphas {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl FactorAlphas {
    /// `(1, 1, -1)`: the composition that reproduces CVB0.
    pub const CVB0: Self = Self {
        a: 1.0,
        b: 1.0,
        c: -1.0,
    };
    /// `(1, 1, 1)`: all KL projections (CVB1s / CVB1d).
    pub const KL: Self = Self { a: 1.0, b: 1.0, c: 1.0 };
}

/// How to approximate the `alpha_c = 1` factor `E[1/(n_t + V beta)]`.
#[derive(Debug, Clone, Copy)]
pub enum KlCFactor<'a> {
    /// Second-order Taylor / Gaussian approximation ([`cvb1d_c_factor`]).
    Taylor,
    /// Precomputed per-topic sample averages ([`cvb1s_c_factor`]).
    Sampled(&'a [f64]),
}

/// The three per-topic factors whose product is proportional to `q(z_{d,i})`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionFactors {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl ProjectionFactors {
    /// Normalized `a * b * c`.
    pub fn compose(&self) -> Vec<f64> {
        let mut out: Vec<f64> = (0..self.a.len()).map(|t| self.a[t] * self.b[t] * self.c[t]).collect();
        normalize(&mut out);
        out
    }
}

/// Closed-form factor projections:
/// `a = E[n_dt] + gamma_t` and `b = E[n_tv] + beta` (both `alpha = 1`);
/// `c = 1/(E[n_t] + V beta)` for `alpha_c = -1`, or an approximation of
/// `E[1/(n_t + V beta)]` for `alpha_c = 1`.
pub fn projection_factors(
    ex: &ExcludedMoments,
    h: &Hyperparams,
    alphas: FactorAlphas,
    kl_c: KlCFactor<'_>,
) -> Result<ProjectionFactors, InferenceError> {
    if alphas.a != 1.0 || alphas.b != 1.0 || !(alphas.c == 1.0 || alphas.c == -1.0) {
        return Err(InferenceError::UnsupportedAlpha(alphas));
    }
    let topics = ex.num_topics();
    let a = (0..topics).map(|t| ex.doc_topic[t] + h.gamma()[t]).collect();
    let b = (0..topics).map(|t| ex.word_topic[t] + h.beta()).collect();
    let c = if alphas.c == -1.0 {
        (0..topics)
            .map(|t| inverse_total(ex.topic_total[t], h.v_beta()))
            .collect()
    } else {
        match kl_c {
            KlCFactor::Taylor => {
                let var = ex.variances.as_ref().ok_or(StatsError::MissingVariances)?;
                (0..topics)
                    .map(|t| cvb1d_c_factor(ex.topic_total[t], var.topic_total[t], h.v_beta()))
                    .collect()
            }
            KlCFactor::Sampled(values) => {
                if values.len() != topics {
                    return Err(StatsError::DimensionMismatch(
                        "sampled c factors must have one entry per topic".into(),
                    )
                    .into());
                }
                values.to_vec()
            }
        }
    };
    Ok(ProjectionFactors { a, b, c })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Document, Vocabulary};
    use crate::rng::stream_rng;

    fn hyper(gamma: Vec<f64>, beta: f64, v: usize) -> Hyperparams {
        Hyperparams::new(gamma, beta, v).unwrap()
    }

    fn sums_to_one(q: &[f64]) -> bool {
        (q.iter().sum::<f64>() - 1.0).abs() < 1e-12
    }

    #[test]
    fn prior_only_symmetric_case() {
        let ex = ExcludedMoments::new(vec![0.0; 2], vec![0.0; 2], vec![0.0; 2]);
        let h = hyper(vec![1.0, 1.0], 0.01, 10);
        assert_eq!(cvb0_update(&ex, &h), vec![0.5, 0.5]);
        assert_eq!(tcvb0_update(&ex, &h), vec![0.5, 0.5]);
    }

    #[test]
    fn integer_expectations_reproduce_the_gibbs_example() {
        let ex = ExcludedMoments::new(vec![2.0, 0.0], vec![3.0, 1.0], vec![10.0, 5.0]);
        let h = hyper(vec![0.5, 0.5], 0.1, 5);
        let q = cvb0_update(&ex, &h);
        // direct evaluation of the collapsed conditional
        let w = [2.5 * 3.1 / 10.5, 0.5 * 1.1 / 5.5];
        let z = w[0] + w[1];
        assert!((q[0] - w[0] / z).abs() < 1e-12);
        assert!((q[1] - w[1] / z).abs() < 1e-12);
        assert!((q[0] - 0.88068).abs() < 1e-5 && (q[1] - 0.11932).abs() < 1e-5);
    }

    #[test]
    fn cvb_with_zero_variance_is_cvb0() {
        let ex = ExcludedMoments::new(vec![1.5, 0.2, 3.0], vec![0.7, 2.0, 0.1], vec![9.0, 4.0, 12.5]).with_variances(
            vec![0.0; 3],
            vec![0.0; 3],
            vec![0.0; 3],
        );
        let h = hyper(vec![0.3, 0.9, 0.1], 0.05, 7);
        let a = cvb_update(&ex, &h).unwrap();
        let b = cvb0_update(&ex, &h);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn cvb_document_correction() {
        // single topic active in the doc correction: E[n_dt] = 2, V = 0.5, gamma = 0.5
        let ex = ExcludedMoments::new(vec![2.0, 2.0], vec![1.0, 1.0], vec![5.0, 5.0]).with_variances(
            vec![0.5, 0.0],
            vec![0.0; 2],
            vec![0.0; 2],
        );
        let h = hyper(vec![0.5, 0.5], 0.1, 3);
        let q = cvb_update(&ex, &h).unwrap();
        let factor = (-0.04f64).exp();
        assert!((factor - 0.96079).abs() < 1e-5);
        assert!((q[0] / q[1] - factor).abs() < 1e-12);
        assert!(cvb_update(
            &ExcludedMoments::new(vec![1.0], vec![1.0], vec![1.0]),
            &hyper(vec![1.0], 0.1, 2)
        )
        .is_err());
    }

    #[test]
    fn cvb_correction_signs() {
        let h = hyper(vec![0.5, 0.5], 0.1, 3);
        let base = ExcludedMoments::new(vec![1.0, 1.0], vec![1.0, 1.0], vec![4.0, 4.0]);
        let with = |dt: f64, tv: f64, t: f64| {
            let ex = base.clone().with_variances(vec![dt, 0.0], vec![tv, 0.0], vec![t, 0.0]);
            let q = cvb_update(&ex, &h).unwrap();
            q[0] / q[1]
        };
        assert!(with(0.3, 0.0, 0.0) < 1.0);
        assert!(with(0.0, 0.3, 0.0) < 1.0);
        assert!(with(0.0, 0.0, 0.3) > 1.0);
    }

    #[test]
    fn cvb1d_examples() {
        assert_eq!(cvb1d_c_factor(10.0, 0.0, 0.05), 1.0 / 10.05);
        let c = cvb1d_c_factor(10.0, 2.0, 0.05);
        let expected = 1.0 / 10.05 + 2.0 / 10.05f64.powi(3);
        assert!((c - expected).abs() < 1e-15);
        // 1/10.05 = 0.0995025, 2/10.05^3 = 0.0019703
        assert!((c - 0.1014728).abs() < 1e-7);
    }

    #[test]
    fn projection_composition_is_cvb0() {
        let ex = ExcludedMoments::new(vec![1.5, 0.2, 3.0], vec![0.7, 2.0, 0.1], vec![9.0, 4.0, 12.5]);
        let h = hyper(vec![0.3, 0.9, 0.1], 0.05, 7);
        let f = projection_factors(&ex, &h, FactorAlphas::CVB0, KlCFactor::Taylor).unwrap();
        assert_eq!(f.compose(), cvb0_update(&ex, &h));
        assert!(sums_to_one(&f.compose()));
        assert!(projection_factors(
            &ex,
            &h,
            FactorAlphas {
                a: 0.5,
                b: 1.0,
                c: -1.0
            },
            KlCFactor::Taylor
        )
        .is_err());
        assert!(projection_factors(&ex, &h, FactorAlphas::KL, KlCFactor::Taylor).is_err());
        let f = projection_factors(&ex, &h, FactorAlphas::KL, KlCFactor::Sampled(&[0.1, 0.2, 0.3])).unwrap();
        assert_eq!(f.c, vec![0.1, 0.2, 0.3]);
    }

    #[test]
    fn degenerate_posterior_gives_exact_sampled_c() {
        let corpus = Corpus::new(
            vec![Document::from_tokens(vec![0, 1, 2]), Document::from_tokens(vec![1])],
            Vocabulary::synthetic(3),
        )
        .unwrap();
        let q = TokenPosterior::from_vectors(vec![
            vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]],
            vec![vec![1.0, 0.0]],
        ])
        .unwrap();
        let mut rng = stream_rng(1, 0);
        for samples in [1, 7, 50] {
            // other tokens in topic 0: (0,2) and (1,0)
            let c = cvb1s_c_factor(&q, &corpus, 0, 0, 0, samples, 0.3, &mut rng);
            assert!((c - 1.0 / 2.3).abs() < 1e-15);
        }
    }

    #[test]
    fn categorical_sampling_matches_weights() {
        let mut rng = stream_rng(3, 0);
        let w = [0.2, 0.0, 0.5, 0.3];
        let n = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[sample_categorical(&w, &mut rng)] += 1;
        }
        assert_eq!(counts[1], 0);
        for (c, p) in counts.iter().zip(w) {
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((*c as f64 / n as f64 - p).abs() <= 3.0 * se + 1e-12);
        }
    }
}
