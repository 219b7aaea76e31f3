//! Sufficient statistics shared by every inference algorithm.
//!
//! [`MomentTable`] carries the expected counts `E[n_dt]`, `E[n_tv]`,
//! `E[n_t.]` (and optionally their variances) built from per-token or
//! per-type posteriors. Updates go through an exclude / update / include
//! cycle: [`MomentTable::exclude_token`] exposes the `\d,i` statistics in an
//! [`Exclusion`] guard, and [`Exclusion::include`] writes the new posterior
//! back into both the table and the posterior store.

mod moments;
mod posterior;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use moments::{ConservationReport, ExcludedMoments, ExcludedVariances, Exclusion, MomentTable};
pub use posterior::{HardAssignment, TokenPosterior, TypePosterior};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    #[error("{table}[{index}] became {value:e} after exclusion; statistics and posterior are out of sync")]
    Desynchronized {
        table: &'static str,
        index: usize,
        value: f64,
    },
    #[error("variance tables are not maintained by this moment table")]
    MissingVariances,
}

/// Excluded values in `(-NEGATIVE_TOLERANCE, 0)` are rounding noise and get
/// clamped to zero; anything below is reported as desynchronization.
pub const NEGATIVE_TOLERANCE: f64 = 1e-9;

/// Asymmetric document-topic prior `gamma` and symmetric topic-word prior
/// `beta` over a vocabulary of `vocab_size` words.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    gamma: Vec<f64>,
    beta: f64,
    vocab_size: usize,
}

impl Hyperparams {
    pub fn new(gamma: Vec<f64>, beta: f64, vocab_size: usize) -> Result<Self, StatsError> {
        if gamma.is_empty() {
            return Err(StatsError::InvalidHyperparameter(
                "gamma must have at least one topic".into(),
            ));
        }
        if let Some(g) = gamma.iter().find(|g| !(**g > 0.0 && g.is_finite())) {
            return Err(StatsError::InvalidHyperparameter(format!(
                "gamma entries must be positive, got {g}"
            )));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(StatsError::InvalidHyperparameter(format!(
                "beta must be positive, got {beta}"
            )));
        }
        if vocab_size == 0 {
            return Err(StatsError::InvalidHyperparameter(
                "vocabulary size must be positive".into(),
            ));
        }
        Ok(Self {
            gamma,
            beta,
            vocab_size,
        })
    }

    pub fn symmetric(topics: usize, gamma: f64, beta: f64, vocab_size: usize) -> Result<Self, StatsError> {
        Self::new(vec![gamma; topics], beta, vocab_size)
    }

    pub fn num_topics(&self) -> usize {
        self.gamma.len()
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn gamma_sum(&self) -> f64 {
        self.gamma.iter().sum()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    /// `V * beta`, the smoothing mass in the topic-total denominator.
    pub fn v_beta(&self) -> f64 {
        self.vocab_size as f64 * self.beta
    }

    pub fn set_gamma(&mut self, gamma: Vec<f64>) -> Result<(), StatsError> {
        if gamma.len() != self.gamma.len() {
            return Err(StatsError::DimensionMismatch(format!(
                "gamma has {} entries, expected {}",
                gamma.len(),
                self.gamma.len()
            )));
        }
        *self = Self::new(gamma, self.beta, self.vocab_size)?;
        Ok(())
    }
}
