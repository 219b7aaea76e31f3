//! Exact local projections on collapsed models small enough to enumerate.
//!
//! For token `(d, i)` with word `v`, the projection of each factor is the
//! power mean of order `alpha` of a count-derived quantity under the
//! factorized posterior of all *other* tokens:
//!
//! * factor `a`: `n_dt^{\d,i} + gamma_t`
//! * factor `b`: `n_tv^{\d,i} + beta`
//! * factor `c`: `1 / (n_t.^{\d,i} + V beta)`
//!
//! Every one of the `T^(n-1)` joint assignments of the other tokens is
//! visited; the probability of an assignment is the product of the token
//! posteriors, and those probabilities already sum to one, so no
//! renormalization is applied.

use rand::Rng as _;
use rand_distr::{Distribution, Exp1};

use super::{weighted_power_mean, Alpha, DivergenceError};
use crate::corpus::{Corpus, Document, Vocabulary};
use crate::rng::Rng;
use crate::stats::{Hyperparams, TokenPosterior};

/// A corpus, priors and full token posterior small enough for exact
/// enumeration.
#[derive(Debug, Clone)]
pub struct TinyCollapsedModel {
    corpus: Corpus,
    hyper: Hyperparams,
    posterior: TokenPosterior,
}

impl TinyCollapsedModel {
    /// Maximum number of tokens in the corpus.
    pub const ENUMERATION_CAP: usize = 12;
    /// Maximum number of joint states `T^(n-1)` (that is, `3^11`).
    pub const STATE_BUDGET: usize = 177_147;

    pub fn new(corpus: Corpus, hyper: Hyperparams, posterior: TokenPosterior) -> Result<Self, DivergenceError> {
        let n = corpus.total_tokens();
        if n > Self::ENUMERATION_CAP {
            return Err(DivergenceError::BudgetExceeded(format!(
                "{n} tokens exceeds the cap of {}",
                Self::ENUMERATION_CAP
            )));
        }
        let t = hyper.num_topics();
        let states = (t as u128).pow(n as u32 - 1);
        if states > Self::STATE_BUDGET as u128 {
            return Err(DivergenceError::BudgetExceeded(format!(
                "{t}^{} = {states} states exceeds the budget of {}",
                n - 1,
                Self::STATE_BUDGET
            )));
        }
        if posterior.num_topics() != t || hyper.vocab_size() != corpus.vocab_size() {
            return Err(DivergenceError::InvalidModel(
                "hyperparameters, posterior and corpus disagree".into(),
            ));
        }
        posterior
            .check_shape(&corpus)
            .map_err(|e| DivergenceError::InvalidModel(e.to_string()))?;
        Ok(Self {
            corpus,
            hyper,
            posterior,
        })
    }

    /// Random model: tokens uniform over the vocabulary, posteriors from
    /// Dirichlet(1), `gamma_t` in `[0.1, 2)` and `beta` in `[0.01, 1)`.
    pub fn random(spec: &TinyModelSpec, rng: &mut Rng) -> Result<Self, DivergenceError> {
        let docs = spec
            .doc_lengths
            .iter()
            .map(|&n| Document::from_tokens((0..n).map(|_| rng.random_range(0..spec.vocab_size)).collect()))
            .collect();
        let corpus = Corpus::new(docs, Vocabulary::synthetic(spec.vocab_size))
            .map_err(|e| DivergenceError::InvalidModel(e.to_string()))?;
        let gamma = (0..spec.topics).map(|_| rng.random_range(0.1..2.0)).collect();
        let beta = rng.random_range(0.01..1.0);
        let hyper =
            Hyperparams::new(gamma, beta, spec.vocab_size).map_err(|e| DivergenceError::InvalidModel(e.to_string()))?;
        let q = corpus
            .documents()
            .iter()
            .map(|doc| {
                (0..doc.len())
                    .map(|_| {
                        let raw: Vec<f64> = (0..spec.topics).map(|_| Exp1.sample(rng)).collect();
                        let s: f64 = raw.iter().sum();
                        raw.into_iter().map(|x| x / s).collect()
                    })
                    .collect()
            })
            .collect();
        let posterior = TokenPosterior::from_vectors(q).map_err(|e| DivergenceError::InvalidModel(e.to_string()))?;
        Self::new(corpus, hyper, posterior)
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn hyperparams(&self) -> &Hyperparams {
        &self.hyper
    }

    pub fn posterior(&self) -> &TokenPosterior {
        &self.posterior
    }
}

/// Shape of a random [`TinyCollapsedModel`].
#[derive(Debug, Clone)]
pub struct TinyModelSpec {
    pub doc_lengths: Vec<usize>,
    pub topics: usize,
    pub vocab_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionFactor {
    A,
    B,
    C,
}

/// Exact distributions of the excluded counts for one token, per topic.
///
/// `doc_topic[t][k]` is the probability that `k` other tokens of the same
/// document take topic `t`; likewise for same-word tokens and all tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcludedCountDistribution {
    pub doc_topic: Vec<Vec<f64>>,
    pub word_topic: Vec<Vec<f64>>,
    pub topic_total: Vec<Vec<f64>>,
}

impl ExcludedCountDistribution {
    /// Outcomes and probabilities of the quantity behind `factor` for topic
    /// `t`.
    pub fn factor_variable(&self, factor: ProjectionFactor, t: usize, hyper: &Hyperparams) -> (Vec<f64>, Vec<f64>) {
        let (hist, value): (&[f64], Box<dyn Fn(f64) -> f64>) = match factor {
            ProjectionFactor::A => {
                let g = hyper.gamma()[t];
                (&self.doc_topic[t], Box::new(move |k| k + g))
            }
            ProjectionFactor::B => {
                let b = hyper.beta();
                (&self.word_topic[t], Box::new(move |k| k + b))
            }
            ProjectionFactor::C => {
                let vb = hyper.v_beta();
                (&self.topic_total[t], Box::new(move |k| 1.0 / (k + vb)))
            }
        };
        let outcomes = (0..hist.len()).map(|k| value(k as f64)).collect();
        (outcomes, hist.to_vec())
    }
}

/// Enumerates every joint assignment of the tokens other than `(d, i)`.
pub fn enumerate_excluded_counts(
    model: &TinyCollapsedModel,
    d: usize,
    i: usize,
) -> Result<ExcludedCountDistribution, DivergenceError> {
    let corpus = &model.corpus;
    if d >= corpus.num_documents() || i >= corpus.document(d).len() {
        return Err(DivergenceError::InvalidModel(format!(
            "token ({d}, {i}) does not exist"
        )));
    }
    let topics = model.hyper.num_topics();
    let word = corpus.document(d).tokens()[i];

    // (same document, same word, posterior) for every other token
    let others: Vec<(bool, bool, &[f64])> = corpus
        .documents()
        .iter()
        .enumerate()
        .flat_map(|(dd, doc)| doc.tokens().iter().enumerate().map(move |(ii, &w)| (dd, ii, w)))
        .filter(|&(dd, ii, _)| (dd, ii) != (d, i))
        .map(|(dd, ii, w)| (dd == d, w == word, model.posterior.get(dd, ii)))
        .collect();
    let m = others.len();
    let bins = m + 1;
    let mut dist = ExcludedCountDistribution {
        doc_topic: vec![vec![0.0; bins]; topics],
        word_topic: vec![vec![0.0; bins]; topics],
        topic_total: vec![vec![0.0; bins]; topics],
    };

    let mut z = vec![0usize; m];
    let mut doc_counts = vec![0usize; topics];
    let mut word_counts = vec![0usize; topics];
    let mut totals = vec![0usize; topics];
    loop {
        doc_counts.iter_mut().for_each(|c| *c = 0);
        word_counts.iter_mut().for_each(|c| *c = 0);
        totals.iter_mut().for_each(|c| *c = 0);
        let mut prob = 1.0;
        for (&t, &(same_doc, same_word, q)) in z.iter().zip(&others) {
            prob *= q[t];
            totals[t] += 1;
            if same_doc {
                doc_counts[t] += 1;
            }
            if same_word {
                word_counts[t] += 1;
            }
        }
        for t in 0..topics {
            dist.doc_topic[t][doc_counts[t]] += prob;
            dist.word_topic[t][word_counts[t]] += prob;
            dist.topic_total[t][totals[t]] += prob;
        }
        // odometer
        let mut k = 0;
        while k < m {
            z[k] += 1;
            if z[k] < topics {
                break;
            }
            z[k] = 0;
            k += 1;
        }
        if k == m {
            break;
        }
    }
    Ok(dist)
}

/// Per-topic optimum of the local alpha-divergence projection for one
/// factor of `q(z_{d,i})`: `E[g_t^alpha]^(1/alpha)` by exact enumeration,
/// with `exp E[ln g_t]` in the `alpha -> 0` window.
pub fn local_projection_oracle(
    model: &TinyCollapsedModel,
    d: usize,
    i: usize,
    factor: ProjectionFactor,
    alpha: Alpha,
) -> Result<Vec<f64>, DivergenceError> {
    let dist = enumerate_excluded_counts(model, d, i)?;
    (0..model.hyper.num_topics())
        .map(|t| {
            let (outcomes, probs) = dist.factor_variable(factor, t, &model.hyper);
            weighted_power_mean(&outcomes, &probs, alpha)
        })
        .collect()
}
