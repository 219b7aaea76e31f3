use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::gamma::estimate_gamma_steps;
use super::gibbs::gibbs_sweep;
use super::sampled::SampledTopicCounts;
use super::updates::{cvb0_into, cvb1d_into, cvb_into, with_c_into};
use super::{AlgorithmKind, InferenceConfig, InferenceError};
use crate::corpus::{Corpus, HoldoutSplit};
use crate::evaluation::{perplexity, PointEstimates};
use crate::rng::{stream_rng, Rng, INFERENCE_STREAM};
use crate::stats::{HardAssignment, Hyperparams, MomentTable, TokenPosterior, TypePosterior};

/// Posterior representation of a run in progress.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelState {
    Gibbs {
        assignment: HardAssignment,
    },
    /// Per-token posteriors (CVB, CVB0, CVB1s, CVB1d).
    Token {
        posterior: TokenPosterior,
        moments: MomentTable,
        sampler: Option<SampledTopicCounts>,
    },
    /// Per-(document, word type) posteriors (TCVB0).
    Type {
        posterior: TypePosterior,
        moments: MomentTable,
    },
}

impl ModelState {
    /// Token-level state from explicit posteriors. Variances are always
    /// maintained.
    pub fn from_token_posterior(corpus: &Corpus, posterior: TokenPosterior) -> Result<Self, InferenceError> {
        let moments = MomentTable::from_token_posterior(corpus, &posterior, true)?;
        Ok(Self::Token {
            posterior,
            moments,
            sampler: None,
        })
    }

    pub fn from_type_posterior(corpus: &Corpus, posterior: TypePosterior) -> Result<Self, InferenceError> {
        let moments = MomentTable::from_type_posterior(corpus, &posterior, true)?;
        Ok(Self::Type { posterior, moments })
    }

    /// Expected counts of the current state. Gibbs states yield their
    /// integer tallies (zero variance).
    pub fn moments(&self, corpus: &Corpus) -> Result<MomentTable, InferenceError> {
        match self {
            Self::Gibbs { assignment } => Ok(MomentTable::from_assignment(corpus, assignment, true)?),
            Self::Token { moments, .. } | Self::Type { moments, .. } => Ok(moments.clone()),
        }
    }

    /// Recomputes the moment table from the stored posteriors.
    pub fn rebuild(&mut self, corpus: &Corpus) -> Result<(), InferenceError> {
        match self {
            Self::Gibbs { .. } => {}
            Self::Token { posterior, moments, .. } => {
                *moments = MomentTable::from_token_posterior(corpus, posterior, true)?
            }
            Self::Type { posterior, moments } => *moments = MomentTable::from_type_posterior(corpus, posterior, true)?,
        }
        Ok(())
    }

    fn check_shape(&self, corpus: &Corpus, algorithm: AlgorithmKind, topics: usize) -> Result<(), InferenceError> {
        let mismatch = |m: &str| Err(InferenceError::Checkpoint(m.to_string()));
        match (self, algorithm) {
            (Self::Gibbs { assignment }, AlgorithmKind::Gibbs) => {
                if assignment.num_topics() != topics || !assignment.tallies_consistent(corpus) {
                    return mismatch("assignment does not match the corpus");
                }
            }
            (
                Self::Token {
                    posterior,
                    moments,
                    sampler,
                },
                alg,
            ) if alg != AlgorithmKind::Gibbs && alg != AlgorithmKind::Tcvb0 => {
                posterior.check_shape(corpus)?;
                if posterior.num_topics() != topics || moments.num_topics() != topics {
                    return mismatch("posterior has the wrong number of topics");
                }
                let wants_sampler = matches!(alg, AlgorithmKind::Cvb1s { .. });
                if wants_sampler != sampler.is_some() {
                    return mismatch("sampled counts do not match the algorithm");
                }
            }
            (Self::Type { posterior, moments }, AlgorithmKind::Tcvb0) => {
                posterior.check_shape(corpus)?;
                if posterior.num_topics() != topics || moments.num_topics() != topics {
                    return mismatch("posterior has the wrong number of topics");
                }
            }
            _ => return mismatch("state does not match the configured algorithm"),
        }
        Ok(())
    }
}

/// One row of a perplexity trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub perplexity: f64,
    /// Elapsed seconds since the start of the run; `0` unless wall-time
    /// recording is enabled.
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct InferenceOutcome {
    pub state: ModelState,
    pub hyper: Hyperparams,
    /// Perplexity of the random initialization.
    pub initial_perplexity: f64,
    /// One record per sweep.
    pub trace: Vec<IterationRecord>,
}

impl InferenceOutcome {
    pub fn final_perplexity(&self) -> f64 {
        self.trace.last().map_or(self.initial_perplexity, |r| r.perplexity)
    }
}

/// Everything needed to continue a run bit-identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: InferenceConfig,
    pub hyper: Hyperparams,
    pub state: ModelState,
    pub rng: Rng,
    pub completed: usize,
}

impl Checkpoint {
    /// Writes the checkpoint as JSON (temp file + rename).
    pub fn save(&self, path: &Path) -> Result<(), InferenceError> {
        let err = |e: std::io::Error| InferenceError::Checkpoint(format!("{}: {e}", path.display()));
        let json = serde_json::to_vec(self).map_err(|e| InferenceError::Checkpoint(e.to_string()))?;
        let tmp = path.with_extension("tmp");
        let mut f = fs::File::create(&tmp).map_err(err)?;
        f.write_all(&json).map_err(err)?;
        f.sync_all().map_err(err)?;
        fs::rename(&tmp, path).map_err(err)
    }

    pub fn load(path: &Path) -> Result<Self, InferenceError> {
        let bytes = fs::read(path).map_err(|e| InferenceError::Checkpoint(format!("{}: {e}", path.display())))?;
        serde_json::from_slice(&bytes).map_err(|e| InferenceError::Checkpoint(format!("{}: {e}", path.display())))
    }
}

/// A run that advances one sweep at a time over a training corpus.
#[derive(Debug, Clone)]
pub struct InferenceRun {
    config: InferenceConfig,
    hyper: Hyperparams,
    state: ModelState,
    rng: Rng,
    completed: usize,
    q: Vec<f64>,
    c: Vec<f64>,
    order: Vec<usize>,
}

impl InferenceRun {
    /// Random initialization: Dirichlet(1) posteriors for the variational
    /// algorithms, uniform topic draws for Gibbs.
    pub fn new(config: InferenceConfig, train: &Corpus) -> Result<Self, InferenceError> {
        config.validate()?;
        let mut rng = stream_rng(config.seed, INFERENCE_STREAM);
        let t = config.topics;
        let state = match config.algorithm {
            AlgorithmKind::Gibbs => ModelState::Gibbs {
                assignment: HardAssignment::random(train, t, &mut rng),
            },
            AlgorithmKind::Tcvb0 => ModelState::from_type_posterior(train, TypePosterior::random(train, t, &mut rng))?,
            AlgorithmKind::Cvb1s { samples } => {
                let posterior = TokenPosterior::random(train, t, &mut rng);
                let moments = MomentTable::from_token_posterior(train, &posterior, true)?;
                let sampler = SampledTopicCounts::new(train, &posterior, samples, &mut rng);
                ModelState::Token {
                    posterior,
                    moments,
                    sampler: Some(sampler),
                }
            }
            _ => ModelState::from_token_posterior(train, TokenPosterior::random(train, t, &mut rng))?,
        };
        Self::assemble(config, train, state, rng, 0)
    }

    /// Starts from a caller-supplied state. CVB1s states without sampled
    /// counts get fresh samples drawn from the posterior.
    pub fn with_state(config: InferenceConfig, train: &Corpus, mut state: ModelState) -> Result<Self, InferenceError> {
        config.validate()?;
        let mut rng = stream_rng(config.seed, INFERENCE_STREAM);
        if let (AlgorithmKind::Cvb1s { samples }, ModelState::Token { posterior, sampler, .. }) =
            (config.algorithm, &mut state)
        {
            if sampler.is_none() {
                *sampler = Some(SampledTopicCounts::new(train, posterior, samples, &mut rng));
            }
        }
        Self::assemble(config, train, state, rng, 0)
    }

    pub fn resume(checkpoint: Checkpoint, train: &Corpus) -> Result<Self, InferenceError> {
        let Checkpoint {
            config,
            hyper,
            state,
            rng,
            completed,
        } = checkpoint;
        let mut run = Self::assemble(config, train, state, rng, completed)?;
        if hyper.num_topics() != run.config.topics || hyper.vocab_size() != train.vocab_size() {
            return Err(InferenceError::Checkpoint(
                "hyperparameters do not match the corpus".into(),
            ));
        }
        run.hyper = hyper;
        Ok(run)
    }

    fn assemble(
        config: InferenceConfig,
        train: &Corpus,
        state: ModelState,
        rng: Rng,
        completed: usize,
    ) -> Result<Self, InferenceError> {
        config.validate()?;
        state.check_shape(train, config.algorithm, config.topics)?;
        let hyper = Hyperparams::new(config.gamma.clone(), config.beta, train.vocab_size())?;
        let t = config.topics;
        Ok(Self {
            config,
            hyper,
            state,
            rng,
            completed,
            q: vec![0.0; t],
            c: vec![0.0; t],
            order: Vec::new(),
        })
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            config: self.config.clone(),
            hyper: self.hyper.clone(),
            state: self.state.clone(),
            rng: self.rng.clone(),
            completed: self.completed,
        }
    }

    pub fn config(&self) -> &InferenceConfig {
        &self.config
    }

    pub fn hyper(&self) -> &Hyperparams {
        &self.hyper
    }

    /// Replaces the document-topic prior, e.g. between sweeps.
    pub fn set_gamma(&mut self, gamma: Vec<f64>) -> Result<(), InferenceError> {
        Ok(self.hyper.set_gamma(gamma)?)
    }

    pub fn state(&self) -> &ModelState {
        &self.state
    }

    pub fn completed(&self) -> usize {
        self.completed
    }

    pub fn into_parts(self) -> (ModelState, Hyperparams) {
        (self.state, self.hyper)
    }

    /// One full sweep, then the periodic rebuild and the gamma update.
    pub fn sweep(&mut self, train: &Corpus) -> Result<(), InferenceError> {
        let h = &self.hyper;
        match (&mut self.state, self.config.algorithm) {
            (ModelState::Gibbs { assignment }, _) => gibbs_sweep(assignment, train, h, &mut self.rng),
            (
                ModelState::Token {
                    posterior,
                    moments,
                    sampler,
                },
                alg,
            ) => {
                let v_beta = h.v_beta();
                for (d, doc) in train.documents().iter().enumerate() {
                    for i in 0..doc.len() {
                        let ex = moments.exclude_token(train, posterior, d, i)?;
                        match alg {
                            AlgorithmKind::Cvb => cvb_into(ex.view(), h, &mut self.q)?,
                            AlgorithmKind::Cvb1d => cvb1d_into(ex.view(), h, &mut self.q)?,
                            AlgorithmKind::Cvb1s { .. } => {
                                let s = sampler.as_ref().expect("cvb1s state carries samples");
                                s.c_factors(d, i, v_beta, &mut self.c);
                                with_c_into(ex.view(), h, &self.c, &mut self.q);
                            }
                            _ => cvb0_into(ex.view(), h, &mut self.q),
                        }
                        ex.include(&self.q);
                        if let Some(s) = sampler.as_mut() {
                            s.resample(d, i, &self.q, &mut self.rng);
                        }
                    }
                }
            }
            (ModelState::Type { posterior, moments }, _) => {
                for (d, doc) in train.documents().iter().enumerate() {
                    // visit types in order of first occurrence, so that a
                    // document of distinct words is swept like its tokens
                    let types = doc.type_counts();
                    self.order.clear();
                    for &w in doc.tokens() {
                        let k = types.binary_search_by_key(&w, |&(v, _)| v).expect("token type present");
                        if !self.order.contains(&k) {
                            self.order.push(k);
                        }
                    }
                    for &k in &self.order {
                        let ex = moments.exclude_type(train, posterior, d, k)?;
                        cvb0_into(ex.view(), h, &mut self.q);
                        ex.include(&self.q);
                    }
                }
            }
        }
        self.completed += 1;
        let period = self.config.rebuild_period;
        if period > 0 && self.completed.is_multiple_of(period) {
            self.state.rebuild(train)?;
        }
        if self.config.estimate_gamma {
            let steps = self.config.gamma_steps;
            let lengths = train.doc_lengths();
            let gamma = match &self.state {
                ModelState::Gibbs { assignment } => {
                    let m = MomentTable::from_assignment(train, assignment, false)?;
                    estimate_gamma_steps(&m, self.hyper.gamma(), &lengths, steps)?
                }
                ModelState::Token { moments, .. } | ModelState::Type { moments, .. } => {
                    estimate_gamma_steps(moments, self.hyper.gamma(), &lengths, steps)?
                }
            };
            self.hyper.set_gamma(gamma)?;
        }
        Ok(())
    }

    /// Point estimates of the current state.
    pub fn estimates(&self, train: &Corpus) -> Result<PointEstimates, InferenceError> {
        let m = self.state.moments(train)?;
        Ok(PointEstimates::from_moments(&m, &self.hyper))
    }

    /// Held-out perplexity of the current state on `split`'s test tokens.
    pub fn perplexity(&self, train: &Corpus, corpus: &Corpus, split: &HoldoutSplit) -> Result<f64, InferenceError> {
        Ok(perplexity(&self.estimates(train)?, corpus, split)?)
    }
}

/// Trains `config.iterations` sweeps on the training part of `split` and
/// records held-out perplexity after the initialization and every sweep.
pub fn run_inference(
    config: &InferenceConfig,
    corpus: &Corpus,
    split: &HoldoutSplit,
) -> Result<InferenceOutcome, InferenceError> {
    config.validate()?;
    let train = split.training_corpus(corpus)?;
    let start = Instant::now();
    let mut run = InferenceRun::new(config.clone(), &train)?;
    let initial_perplexity = run.perplexity(&train, corpus, split)?;
    let mut trace = Vec::with_capacity(config.iterations);
    for iteration in 1..=config.iterations {
        run.sweep(&train)?;
        let perplexity = run.perplexity(&train, corpus, split)?;
        let seconds = if config.record_wall_time {
            start.elapsed().as_secs_f64()
        } else {
            0.0
        };
        trace.push(IterationRecord {
            iteration,
            perplexity,
            seconds,
        });
    }
    let (state, hyper) = run.into_parts();
    Ok(InferenceOutcome {
        state,
        hyper,
        initial_perplexity,
        trace,
    })
}
