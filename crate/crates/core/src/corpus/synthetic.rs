//! Corpora sampled from the LDA generative process:
//! `theta_d ~ Dir(gamma)`, `phi_t ~ Dir(beta)`, then for every token
//! `z ~ Multi(theta_d)` and `w ~ Multi(phi_z)`.

use rand::distr::weighted::WeightedIndex;
use rand::Rng as _;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use super::{Corpus, CorpusError, Document, Vocabulary};
use crate::matrix::Matrix;
use crate::rng::{stream_rng, Rng, SYNTHETIC_STREAM};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub topics: usize,
    pub documents: usize,
    pub vocab_size: usize,
    pub doc_len: usize,
    pub gamma: Vec<f64>,
    pub beta: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub corpus: Corpus,
    /// D x T document-topic proportions used for generation.
    pub theta: Matrix,
    /// T x V topic-word distributions used for generation.
    pub phi: Matrix,
}

fn invalid(msg: String) -> CorpusError {
    CorpusError::InvalidParameter(msg)
}

/// Draws from `Dir(alpha)` in log space so that tiny concentrations (the
/// usual `beta = 0.01`) cannot underflow every component to zero.
fn sample_dirichlet(alpha: &[f64], rng: &mut Rng) -> Vec<f64> {
    let logs: Vec<f64> = alpha
        .iter()
        .map(|&a| {
            if a >= 1.0 {
                Gamma::new(a, 1.0).expect("shape > 0").sample(rng).ln()
            } else {
                // G(a) = G(a + 1) * U^(1/a)
                let g = Gamma::new(a + 1.0, 1.0).expect("shape > 0").sample(rng);
                let u: f64 = 1.0 - rng.random::<f64>();
                g.ln() + u.ln() / a
            }
        })
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logs.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|x| *x /= sum);
    out
}

fn check_dims(topics: usize, documents: usize, vocab_size: usize, doc_len: usize) -> Result<(), CorpusError> {
    if topics == 0 || documents == 0 || vocab_size == 0 || doc_len == 0 {
        return Err(invalid(format!(
            "all dimensions must be >= 1 (T={topics}, D={documents}, V={vocab_size}, len={doc_len})"
        )));
    }
    Ok(())
}

fn check_gamma(gamma: &[f64], topics: usize) -> Result<(), CorpusError> {
    if gamma.len() != topics {
        return Err(invalid(format!("gamma has {} entries, expected {topics}", gamma.len())));
    }
    if !gamma.iter().all(|&g| g > 0.0 && g.is_finite()) {
        return Err(invalid("gamma entries must be positive and finite".into()));
    }
    Ok(())
}

pub fn synthesize_lda_corpus(config: &SyntheticConfig) -> Result<SyntheticCorpus, CorpusError> {
    let SyntheticConfig {
        topics,
        documents,
        vocab_size,
        doc_len,
        ..
    } = *config;
    check_dims(topics, documents, vocab_size, doc_len)?;
    check_gamma(&config.gamma, topics)?;
    if !(config.beta > 0.0 && config.beta.is_finite()) {
        return Err(invalid(format!("beta must be positive, got {}", config.beta)));
    }
    let mut rng = stream_rng(config.seed, SYNTHETIC_STREAM);
    let beta = vec![config.beta; vocab_size];
    let phi = Matrix::from_rows((0..topics).map(|_| sample_dirichlet(&beta, &mut rng)).collect());
    let (corpus, theta) = sample_documents(&phi, &config.gamma, documents, doc_len, &mut rng)?;
    Ok(SyntheticCorpus { corpus, theta, phi })
}

/// Samples documents from fixed topics `phi` (rows must be distributions).
pub fn synthesize_with_topics(
    phi: &Matrix,
    gamma: &[f64],
    documents: usize,
    doc_len: usize,
    seed: u64,
) -> Result<SyntheticCorpus, CorpusError> {
    check_dims(phi.rows(), documents, phi.cols(), doc_len)?;
    check_gamma(gamma, phi.rows())?;
    let mut rng = stream_rng(seed, SYNTHETIC_STREAM);
    let (corpus, theta) = sample_documents(phi, gamma, documents, doc_len, &mut rng)?;
    Ok(SyntheticCorpus {
        corpus,
        theta,
        phi: phi.clone(),
    })
}

fn sample_documents(
    phi: &Matrix,
    gamma: &[f64],
    documents: usize,
    doc_len: usize,
    rng: &mut Rng,
) -> Result<(Corpus, Matrix), CorpusError> {
    let word_dists = phi
        .iter_rows()
        .map(|row| WeightedIndex::new(row).map_err(|e| invalid(format!("bad topic row: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    let mut theta = Matrix::zeros(documents, phi.rows());
    let mut docs = Vec::with_capacity(documents);
    for d in 0..documents {
        let theta_d = sample_dirichlet(gamma, rng);
        let topic_dist = WeightedIndex::new(&theta_d).map_err(|e| invalid(format!("bad theta: {e}")))?;
        let tokens = (0..doc_len)
            .map(|_| word_dists[topic_dist.sample(rng)].sample(rng))
            .collect();
        theta.row_mut(d).copy_from_slice(&theta_d);
        docs.push(Document::from_tokens(tokens));
    }
    let corpus = Corpus::new(docs, Vocabulary::synthetic(phi.cols()))?;
    Ok((corpus, theta))
}
