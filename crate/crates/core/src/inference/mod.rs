//! Collapsed inference algorithms for LDA.
//!
//! All variational updates share one shape,
//! `q(t) ∝ a(t) * b(t) * c(t)` with `a = E[n_dt] + gamma_t`,
//! `b = E[n_tv] + beta` and a topic-total factor `c`; the algorithms differ
//! only in how `c` is formed and in which correction terms multiply the
//! product. Collapsed Gibbs uses the same kernel on integer counts.

mod gamma;
mod gibbs;
mod runner;
mod sampled;
mod updates;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::CorpusError;
use crate::divergence::DivergenceError;
use crate::stats::StatsError;

pub use gamma::{estimate_gamma, estimate_gamma_steps, GAMMA_FLOOR, GAMMA_MAX_STEPS};
pub use gibbs::{gibbs_conditional, gibbs_sweep};
pub use runner::{run_inference, Checkpoint, InferenceOutcome, InferenceRun, IterationRecord, ModelState};
pub use sampled::SampledTopicCounts;
pub use updates::{
    cvb0_update, cvb1d_c_factor, cvb1s_c_factor, cvb1s_c_samples, cvb_update, projection_factors, tcvb0_update,
    FactorAlphas, KlCFactor, ProjectionFactors,
};

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("closed-form projection supports alpha_a = alpha_b = 1 and alpha_c in {{1, -1}}; got {0:?}")]
    UnsupportedAlpha(FactorAlphas),
    #[error("non-finite input to the gamma fixed point: {0}")]
    NonFinite(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Divergence(#[from] DivergenceError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    EmptyTestSet(#[from] crate::evaluation::EmptyTestSet),
}

/// Default number of samples for CVB1s.
pub const DEFAULT_SAMPLES: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgorithmKind {
    Gibbs,
    /// Second-order Taylor approximation with variance corrections.
    Cvb,
    Cvb0,
    /// CVB0 with the `alpha = 1` topic-total factor estimated from samples.
    Cvb1s {
        samples: usize,
    },
    /// CVB0 with the `alpha = 1` topic-total factor from a Gaussian
    /// second-order expansion.
    Cvb1d,
    /// Type-based CVB0: one posterior per (document, word type).
    Tcvb0,
}

impl AlgorithmKind {
    /// Every algorithm, CVB1s with the default sample count.
    pub fn all() -> Vec<AlgorithmKind> {
        vec![
            Self::Gibbs,
            Self::Cvb,
            Self::Cvb0,
            Self::Cvb1s {
                samples: DEFAULT_SAMPLES,
            },
            Self::Cvb1d,
            Self::Tcvb0,
        ]
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Gibbs => "gibbs",
            Self::Cvb => "cvb",
            Self::Cvb0 => "cvb0",
            Self::Cvb1s { .. } => "cvb1s",
            Self::Cvb1d => "cvb1d",
            Self::Tcvb0 => "tcvb0",
        }
    }

    /// Parses a lowercase algorithm name; `cvb1s` takes `samples`.
    pub fn from_name(name: &str, samples: usize) -> Option<Self> {
        Some(match name {
            "gibbs" => Self::Gibbs,
            "cvb" => Self::Cvb,
            "cvb0" => Self::Cvb0,
            "cvb1s" => Self::Cvb1s { samples },
            "cvb1d" => Self::Cvb1d,
            "tcvb0" => Self::Tcvb0,
            _ => return None,
        })
    }
}

impl std::fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceConfig {
    pub algorithm: AlgorithmKind,
    pub topics: usize,
    pub iterations: usize,
    pub seed: u64,
    /// Initial document-topic prior, one entry per topic.
    pub gamma: Vec<f64>,
    pub beta: f64,
    /// Re-estimate `gamma` by the digamma fixed point after every sweep.
    pub estimate_gamma: bool,
    /// Fixed-point steps per sweep when `estimate_gamma` is set. One step
    /// per sweep lets gamma track the posterior; iterating to convergence
    /// from a near-uniform start drives gamma to infinity before any topic
    /// structure forms.
    pub gamma_steps: usize,
    /// Rebuild the moment table from the posteriors every this many sweeps;
    /// `0` disables rebuilding.
    pub rebuild_period: usize,
    /// Record elapsed wall time in traces. Off by default so that traces
    /// are reproducible byte for byte.
    pub record_wall_time: bool,
}

impl InferenceConfig {
    /// Defaults: 100 iterations, `beta = 0.01`, symmetric `gamma = 50 / T`,
    /// gamma re-estimation on with one fixed-point step per sweep, rebuild
    /// every 10 sweeps.
    pub fn new(algorithm: AlgorithmKind, topics: usize) -> Self {
        Self {
            algorithm,
            topics,
            iterations: 100,
            seed: 0,
            gamma: vec![50.0 / topics.max(1) as f64; topics],
            beta: 0.01,
            estimate_gamma: true,
            gamma_steps: 1,
            rebuild_period: 10,
            record_wall_time: false,
        }
    }

    pub fn validate(&self) -> Result<(), InferenceError> {
        let bad = |m: String| Err(InferenceError::InvalidConfig(m));
        if self.topics == 0 {
            return bad("number of topics must be at least 1".into());
        }
        if self.iterations == 0 {
            return bad("iterations must be at least 1".into());
        }
        if self.gamma.len() != self.topics {
            return bad(format!(
                "gamma has {} entries for {} topics",
                self.gamma.len(),
                self.topics
            ));
        }
        if self.estimate_gamma && self.gamma_steps == 0 {
            return bad("gamma_steps must be at least 1 when gamma is re-estimated".into());
        }
        if let AlgorithmKind::Cvb1s { samples: 0 } = self.algorithm {
            return bad("cvb1s needs at least one sample".into());
        }
        if self.topics > u16::MAX as usize {
            return bad("at most 65535 topics are supported".into());
        }
        Ok(())
    }
}
