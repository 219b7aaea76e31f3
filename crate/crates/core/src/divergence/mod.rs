//! The alpha-divergence family over unnormalized discrete measures, power
//! means, and an exact-enumeration oracle for local projections on tiny
//! collapsed LDA models.
//!
//! Conventions: `0 * ln 0 = 0` and `0^a = 0` for `a > 0`. Support violations
//! yield `f64::INFINITY` rather than an error.

mod oracle;

use thiserror::Error;

pub use oracle::{
    enumerate_excluded_counts, local_projection_oracle, ExcludedCountDistribution, ProjectionFactor,
    TinyCollapsedModel, TinyModelSpec,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DivergenceError {
    #[error("measures have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("invalid random variable: {0}")]
    InvalidVariable(String),
    #[error("power mean of order {alpha} is undefined with a zero outcome")]
    ZeroOutcome { alpha: f64 },
    #[error("enumeration budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
}

/// An order `alpha` together with the width of the windows around 0 and 1
/// inside which the analytic limits are used instead of the general formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alpha {
    value: f64,
    limit_epsilon: f64,
}

impl Alpha {
    pub const DEFAULT_LIMIT_EPSILON: f64 = 1e-8;

    pub fn new(value: f64) -> Self {
        Self {
            value,
            limit_epsilon: Self::DEFAULT_LIMIT_EPSILON,
        }
    }

    pub fn with_limit_epsilon(value: f64, limit_epsilon: f64) -> Self {
        assert!(limit_epsilon > 0.0, "limit_epsilon must be positive");
        Self { value, limit_epsilon }
    }

    pub fn value(self) -> f64 {
        self.value
    }

    pub fn limit_epsilon(self) -> f64 {
        self.limit_epsilon
    }

    pub fn near_zero(self) -> bool {
        self.value.abs() < self.limit_epsilon
    }

    pub fn near_one(self) -> bool {
        (self.value - 1.0).abs() < self.limit_epsilon
    }
}

impl From<f64> for Alpha {
    fn from(value: f64) -> Self {
        Self::new(value)
    }
}

/// Nonnegative weights, not necessarily summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure(Vec<f64>);

impl DiscreteMeasure {
    pub fn new(weights: Vec<f64>) -> Result<Self, DivergenceError> {
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(DivergenceError::InvalidMeasure(
                "weights must be finite and nonnegative".into(),
            ));
        }
        if !weights.iter().any(|&w| w > 0.0) {
            return Err(DivergenceError::InvalidMeasure(
                "at least one weight must be positive".into(),
            ));
        }
        Ok(Self(weights))
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn paired<'a>(
    p: &'a DiscreteMeasure,
    q: &'a DiscreteMeasure,
) -> Result<impl Iterator<Item = (f64, f64)> + 'a, DivergenceError> {
    if p.len() != q.len() {
        return Err(DivergenceError::LengthMismatch(p.len(), q.len()));
    }
    Ok(p.0.iter().copied().zip(q.0.iter().copied()))
}

/// Generalized KL divergence `sum p ln(p/q) + sum (q - p)`.
pub fn kl_divergence(p: &DiscreteMeasure, q: &DiscreteMeasure) -> Result<f64, DivergenceError> {
    let mut total = 0.0;
    for (pi, qi) in paired(p, q)? {
        total += if pi == 0.0 {
            qi
        } else if qi == 0.0 {
            return Ok(f64::INFINITY);
        } else {
            pi * (pi / qi).ln() + qi - pi
        };
    }
    Ok(total.max(0.0))
}

/// `D_a[p||q] = sum [a p + (1-a) q - p^a q^(1-a)] / (a (1-a))`.
///
/// Inside the limit windows this returns `KL[q||p]` (near 0) or `KL[p||q]`
/// (near 1).
pub fn alpha_divergence(p: &DiscreteMeasure, q: &DiscreteMeasure, alpha: Alpha) -> Result<f64, DivergenceError> {
    if alpha.near_zero() {
        if p.len() != q.len() {
            return Err(DivergenceError::LengthMismatch(p.len(), q.len()));
        }
        return kl_divergence(q, p);
    }
    if alpha.near_one() {
        return kl_divergence(p, q);
    }
    let a = alpha.value();
    let scale = a * (1.0 - a);
    let mut regular = 0.0;
    let mut boundary = 0.0;
    for (pi, qi) in paired(p, q)? {
        if pi == qi {
            continue;
        }
        if pi == 0.0 {
            if a < 0.0 {
                return Ok(f64::INFINITY);
            }
            boundary += qi / a;
        } else if qi == 0.0 {
            if a > 1.0 {
                return Ok(f64::INFINITY);
            }
            boundary += pi / (1.0 - a);
        } else {
            let mixed = (a * pi.ln() + (1.0 - a) * qi.ln()).exp();
            regular += a * pi + (1.0 - a) * qi - mixed;
        }
    }
    Ok((regular / scale + boundary).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NamedDivergence {
    /// `alpha = 0.5`: `2 sum (sqrt p - sqrt q)^2`
    Hellinger,
    /// `alpha = 2`: `1/2 sum (p - q)^2 / q`
    ChiSquared,
    /// `alpha = -1`: `1/2 sum (q - p)^2 / p`
    InverseChiSquared,
}

impl NamedDivergence {
    pub fn alpha(self) -> f64 {
        match self {
            Self::Hellinger => 0.5,
            Self::ChiSquared => 2.0,
            Self::InverseChiSquared => -1.0,
        }
    }
}

fn half_chi2(numer_base: f64, denom: f64, other: f64) -> Option<f64> {
    if numer_base == other {
        Some(0.0)
    } else if denom == 0.0 {
        None
    } else {
        Some(0.5 * (numer_base - other).powi(2) / denom)
    }
}

pub fn named_divergence(
    p: &DiscreteMeasure,
    q: &DiscreteMeasure,
    kind: NamedDivergence,
) -> Result<f64, DivergenceError> {
    let mut total = 0.0;
    for (pi, qi) in paired(p, q)? {
        let term = match kind {
            NamedDivergence::Hellinger => Some(2.0 * (pi.sqrt() - qi.sqrt()).powi(2)),
            NamedDivergence::ChiSquared => half_chi2(pi, qi, qi),
            NamedDivergence::InverseChiSquared => half_chi2(qi, pi, pi),
        };
        match term {
            Some(x) => total += x,
            None => return Ok(f64::INFINITY),
        }
    }
    Ok(total)
}

/// A nonnegative random variable with finitely many outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteRandomVariable {
    outcomes: Vec<f64>,
    probs: Vec<f64>,
}

impl DiscreteRandomVariable {
    pub fn new(outcomes: Vec<f64>, probs: Vec<f64>) -> Result<Self, DivergenceError> {
        if outcomes.len() != probs.len() || outcomes.is_empty() {
            return Err(DivergenceError::InvalidVariable(
                "outcomes and probabilities must be nonempty and equally long".into(),
            ));
        }
        if outcomes.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(DivergenceError::InvalidVariable(
                "outcomes must be finite and nonnegative".into(),
            ));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(DivergenceError::InvalidVariable(
                "probabilities must be nonnegative".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(DivergenceError::InvalidVariable(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(Self { outcomes, probs })
    }

    /// Uniform distribution over the given outcomes.
    pub fn uniform(outcomes: Vec<f64>) -> Result<Self, DivergenceError> {
        let n = outcomes.len().max(1);
        Self::new(outcomes, vec![1.0 / n as f64; n])
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.outcomes
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// `E[x^a]^(1/a)`, or `exp E[ln x]` inside the window around `a = 0`.
/// Nondecreasing in `a`.
pub fn power_mean(x: &DiscreteRandomVariable, alpha: Alpha) -> Result<f64, DivergenceError> {
    weighted_power_mean(&x.outcomes, &x.probs, alpha)
}

/// Power mean over `(outcome, weight)` pairs whose weights are assumed to
/// sum to one; outcomes with zero weight are ignored.
pub(crate) fn weighted_power_mean(outcomes: &[f64], weights: &[f64], alpha: Alpha) -> Result<f64, DivergenceError> {
    let support = || outcomes.iter().zip(weights).filter(|(_, &w)| w > 0.0);
    let a = alpha.value();
    if (alpha.near_zero() || a < 0.0) && support().any(|(&x, _)| x == 0.0) {
        return Err(DivergenceError::ZeroOutcome { alpha: a });
    }
    if alpha.near_zero() {
        let mean_log: f64 = support().map(|(&x, &w)| w * x.ln()).sum();
        return Ok(mean_log.exp());
    }
    // scale so that every (x / s)^a <= 1
    let s = if a > 0.0 {
        support().map(|(&x, _)| x).fold(0.0, f64::max)
    } else {
        support().map(|(&x, _)| x).fold(f64::INFINITY, f64::min)
    };
    if s == 0.0 {
        return Ok(0.0);
    }
    let moment: f64 = support().map(|(&x, &w)| w * (x / s).powf(a)).sum();
    Ok(s * moment.powf(1.0 / a))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(w: &[f64]) -> DiscreteMeasure {
        DiscreteMeasure::new(w.to_vec()).unwrap()
    }

    #[test]
    fn identical_measures_have_zero_divergence() {
        let p = m(&[0.3, 0.7]);
        for a in [-2.0, -1.0, 0.0, 0.25, 0.5, 1.0, 2.0, 3.5] {
            assert_eq!(alpha_divergence(&p, &p, Alpha::new(a)).unwrap(), 0.0);
        }
    }

    #[test]
    fn disjoint_support_hellinger() {
        let d = alpha_divergence(&m(&[1.0, 0.0]), &m(&[0.0, 1.0]), Alpha::new(0.5)).unwrap();
        assert!((d - 4.0).abs() < 1e-12);
        let h = named_divergence(&m(&[1.0, 0.0]), &m(&[0.0, 1.0]), NamedDivergence::Hellinger).unwrap();
        assert!((h - 4.0).abs() < 1e-12);
    }

    #[test]
    fn kl_limit_branch() {
        let p = m(&[0.5, 0.5]);
        let q = m(&[0.9, 0.1]);
        // oracle: direct evaluation of sum p ln(p/q)
        let expected = 0.5 * (0.5f64 / 0.9).ln() + 0.5 * (0.5f64 / 0.1).ln();
        let d = alpha_divergence(&p, &q, Alpha::new(1.0)).unwrap();
        assert!((d - expected).abs() < 1e-15);
        assert!((d - 0.5108).abs() < 1e-4);
        let d0 = alpha_divergence(&p, &q, Alpha::new(0.0)).unwrap();
        assert!((d0 - kl_divergence(&q, &p).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl_divergence(&m(&[0.2, 0.8]), &m(&[0.2, 0.8])).unwrap(), 0.0);
        let d = kl_divergence(&m(&[1.0, 1.0]), &m(&[2.0, 2.0])).unwrap();
        assert!((d - (2.0 * 0.5f64.ln() + 2.0)).abs() < 1e-15);
        assert!((d - 0.6137).abs() < 1e-4);
        let d = kl_divergence(&m(&[1.0, 0.0]), &m(&[0.5, 0.5])).unwrap();
        assert!((d - 2f64.ln()).abs() < 1e-15);
        assert_eq!(kl_divergence(&m(&[0.5, 0.5]), &m(&[1.0, 0.0])).unwrap(), f64::INFINITY);
    }

    #[test]
    fn chi_squared_examples() {
        let p = m(&[0.5, 0.5]);
        let q = m(&[0.25, 0.75]);
        let c = named_divergence(&p, &q, NamedDivergence::ChiSquared).unwrap();
        let expected = 0.5 * (0.25f64.powi(2) / 0.25 + 0.25f64.powi(2) / 0.75);
        assert!((c - expected).abs() < 1e-15);
        assert!((c - 0.1667).abs() < 1e-4);
        let inv = named_divergence(&q, &p, NamedDivergence::InverseChiSquared).unwrap();
        assert!((inv - c).abs() < 1e-15);
        assert_eq!(named_divergence(&p, &p, NamedDivergence::Hellinger).unwrap(), 0.0);
    }

    #[test]
    fn support_violations_are_infinite() {
        let p = m(&[0.5, 0.5]);
        let q = m(&[1.0, 0.0]);
        assert_eq!(
            named_divergence(&p, &q, NamedDivergence::ChiSquared).unwrap(),
            f64::INFINITY
        );
        assert_eq!(
            named_divergence(&q, &p, NamedDivergence::InverseChiSquared).unwrap(),
            f64::INFINITY
        );
        assert_eq!(alpha_divergence(&p, &q, Alpha::new(2.0)).unwrap(), f64::INFINITY);
        assert_eq!(alpha_divergence(&q, &p, Alpha::new(-1.0)).unwrap(), f64::INFINITY);
        // zero-avoiding side stays finite
        assert!(alpha_divergence(&p, &q, Alpha::new(0.5)).unwrap().is_finite());
    }

    #[test]
    fn errors() {
        assert!(DiscreteMeasure::new(vec![0.0, 0.0]).is_err());
        assert!(DiscreteMeasure::new(vec![-1.0, 2.0]).is_err());
        assert_eq!(
            alpha_divergence(&m(&[1.0]), &m(&[1.0, 2.0]), Alpha::new(0.3)),
            Err(DivergenceError::LengthMismatch(1, 2))
        );
        assert!(DiscreteRandomVariable::new(vec![1.0], vec![0.9]).is_err());
        let zero = DiscreteRandomVariable::uniform(vec![0.0, 2.0]).unwrap();
        assert!(power_mean(&zero, Alpha::new(-1.0)).is_err());
        assert!(power_mean(&zero, Alpha::new(0.0)).is_err());
        assert!((power_mean(&zero, Alpha::new(1.0)).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn power_means_of_one_and_two() {
        let x = DiscreteRandomVariable::uniform(vec![1.0, 2.0]).unwrap();
        let p1 = power_mean(&x, Alpha::new(1.0)).unwrap();
        let p2 = power_mean(&x, Alpha::new(2.0)).unwrap();
        let p0 = power_mean(&x, Alpha::new(0.0)).unwrap();
        let pm1 = power_mean(&x, Alpha::new(-1.0)).unwrap();
        assert!((p1 - 1.5).abs() < 1e-15);
        assert!((p2 - 2.5f64.sqrt()).abs() < 1e-15);
        assert!((p2 - 1.58114).abs() < 1e-5);
        assert!((p0 - 2f64.sqrt()).abs() < 1e-15);
        assert!((pm1 - 4.0 / 3.0).abs() < 1e-15);
        assert!(pm1 <= p0 && p0 <= p1 && p1 <= p2);
    }
}
