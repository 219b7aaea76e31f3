//! Held-out perplexity, multi-run experiments and model diagnostics.

use std::io::{self, BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{split_holdout, Corpus, CorpusError, HoldoutSplit};
use crate::inference::{run_inference, AlgorithmKind, InferenceConfig, InferenceError, InferenceOutcome};
use crate::matrix::Matrix;
use crate::stats::{Hyperparams, MomentTable, StatsError};

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("the holdout split has no test tokens")]
pub struct EmptyTestSet;

#[derive(Debug, Error)]
pub enum EvaluationError {
    #[error("at least one run is required")]
    NoRuns,
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    EmptyTestSet(#[from] EmptyTestSet),
    #[error("malformed CSV at line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Smoothed plug-in estimates of the document-topic and topic-word
/// distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct PointEstimates {
    /// D x T, `(E[n_dt] + gamma_t) / (n_d + sum gamma)`.
    pub theta: Matrix,
    /// T x V, `(E[n_tv] + beta) / (E[n_t] + V beta)`.
    pub phi: Matrix,
}

impl PointEstimates {
    pub fn from_moments(m: &MomentTable, h: &Hyperparams) -> Self {
        let topics = m.num_topics();
        let vocab = m.vocab_size();
        let gamma_sum = h.gamma_sum();
        let mut theta = Matrix::zeros(m.num_documents(), topics);
        for d in 0..m.num_documents() {
            let row = m.doc_topic(d);
            let len: f64 = row.iter().sum();
            for (t, &e) in row.iter().enumerate() {
                theta.set(d, t, (e + h.gamma()[t]) / (len + gamma_sum));
            }
        }
        let mut phi = Matrix::zeros(topics, vocab);
        let inv: Vec<f64> = m.topic_total().iter().map(|&e| 1.0 / (e + h.v_beta())).collect();
        for v in 0..vocab {
            let word = m.word_topic(v);
            for t in 0..topics {
                let e = word.map_or(0.0, |w| w[t]);
                phi.set(t, v, (e + h.beta()) * inv[t]);
            }
        }
        Self { theta, phi }
    }

    /// `p(w | d) = sum_t theta[d, t] phi[t, w]`.
    pub fn predictive(&self, d: usize, w: usize) -> f64 {
        self.theta
            .row(d)
            .iter()
            .enumerate()
            .map(|(t, th)| th * self.phi.get(t, w))
            .sum()
    }
}

/// `exp(-mean log p(w | d))` over the held-out tokens of `split`.
pub fn perplexity(est: &PointEstimates, corpus: &Corpus, split: &HoldoutSplit) -> Result<f64, EmptyTestSet> {
    assert_eq!(
        est.theta.rows(),
        corpus.num_documents(),
        "estimates and corpus disagree on D"
    );
    let mut n = 0usize;
    let mut log_lik = 0.0;
    for (d, w) in split.test_words(corpus) {
        log_lik += est.predictive(d, w).ln();
        n += 1;
    }
    if n == 0 {
        return Err(EmptyTestSet);
    }
    Ok((-log_lik / n as f64).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerplexityRecord {
    pub run: usize,
    pub seed: u64,
    pub iteration: usize,
    pub algorithm: String,
    pub perplexity: f64,
    pub seconds: f64,
}

/// Per-iteration perplexities; iteration 0 is the random initialization.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PerplexityTrace {
    pub records: Vec<PerplexityRecord>,
}

impl PerplexityTrace {
    pub const HEADER: &'static str = "run,seed,iteration,algorithm,perplexity,seconds";

    pub fn push_outcome(&mut self, run: usize, seed: u64, algorithm: AlgorithmKind, outcome: &InferenceOutcome) {
        let record = |iteration, perplexity, seconds| PerplexityRecord {
            run,
            seed,
            iteration,
            algorithm: algorithm.name().to_string(),
            perplexity,
            seconds,
        };
        self.records.push(record(0, outcome.initial_perplexity, 0.0));
        for r in &outcome.trace {
            self.records.push(record(r.iteration, r.perplexity, r.seconds));
        }
    }

    /// CSV with LF line endings. Floats use the shortest representation
    /// that parses back to the same value.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{}", Self::HEADER)?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{:?},{:?}",
                r.run, r.seed, r.iteration, r.algorithm, r.perplexity, r.seconds
            )?;
        }
        out.flush()
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self, EvaluationError> {
        let mut records = Vec::new();
        for (row, fields) in csv_rows(input, Self::HEADER)? {
            let [run, seed, iteration, algorithm, perplexity, seconds] = &fields[..] else {
                return Err(csv_error(row, "expected 6 fields"));
            };
            records.push(PerplexityRecord {
                run: parse_field(row, run)?,
                seed: parse_field(row, seed)?,
                iteration: parse_field(row, iteration)?,
                algorithm: algorithm.to_string(),
                perplexity: parse_field(row, perplexity)?,
                seconds: parse_field(row, seconds)?,
            });
        }
        Ok(Self { records })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub algorithm: String,
    pub mean_perplexity: f64,
    /// Sample standard deviation (`n - 1` denominator); 0 for one run.
    pub std_perplexity: f64,
}

impl SummaryRow {
    pub const HEADER: &'static str = "algorithm,mean_perplexity,std_perplexity";

    pub fn from_values(algorithm: &str, values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self {
            algorithm: algorithm.to_string(),
            mean_perplexity: mean,
            std_perplexity: std,
        }
    }

    pub fn write_csv<W: Write>(rows: &[SummaryRow], mut out: W) -> io::Result<()> {
        writeln!(out, "{}", Self::HEADER)?;
        for r in rows {
            writeln!(out, "{},{:?},{:?}", r.algorithm, r.mean_perplexity, r.std_perplexity)?;
        }
        out.flush()
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Vec<Self>, EvaluationError> {
        let mut rows = Vec::new();
        for (row, fields) in csv_rows(input, Self::HEADER)? {
            let [algorithm, mean, std] = &fields[..] else {
                return Err(csv_error(row, "expected 3 fields"));
            };
            rows.push(SummaryRow {
                algorithm: algorithm.to_string(),
                mean_perplexity: parse_field(row, mean)?,
                std_perplexity: parse_field(row, std)?,
            });
        }
        Ok(rows)
    }
}

fn csv_error(line: usize, message: &str) -> EvaluationError {
    EvaluationError::Csv {
        line,
        message: message.to_string(),
    }
}

fn parse_field<T: std::str::FromStr>(line: usize, s: &str) -> Result<T, EvaluationError> {
    s.parse().map_err(|_| csv_error(line, &format!("cannot parse {s:?}")))
}

fn csv_rows<R: BufRead>(input: R, header: &str) -> Result<Vec<(usize, Vec<String>)>, EvaluationError> {
    let mut lines = input.lines();
    if lines.next().transpose()?.as_deref() != Some(header) {
        return Err(csv_error(1, &format!("expected header {header:?}")));
    }
    let mut out = Vec::new();
    for (k, line) in lines.enumerate() {
        let line = line?;
        out.push((k + 2, line.split(',').map(str::to_string).collect()));
    }
    Ok(out)
}

/// One seeded run of an [`averaged_experiment`].
#[derive(Debug, Clone)]
pub struct RunResult {
    pub run: usize,
    pub seed: u64,
    pub split: HoldoutSplit,
    pub outcome: InferenceOutcome,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub algorithm: AlgorithmKind,
    pub runs: Vec<RunResult>,
    pub trace: PerplexityTrace,
    /// Mean and spread of the final-iteration perplexities.
    pub summary: SummaryRow,
}

impl ExperimentResult {
    pub fn final_perplexities(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.outcome.final_perplexity()).collect()
    }
}

/// Runs `config` `n_runs` times with seeds `config.seed + r`, each on its
/// own holdout split drawn with the same seed. Runs execute in parallel;
/// results do not depend on scheduling.
pub fn averaged_experiment(
    config: &InferenceConfig,
    corpus: &Corpus,
    ratio: f64,
    n_runs: usize,
) -> Result<ExperimentResult, EvaluationError> {
    if n_runs == 0 {
        return Err(EvaluationError::NoRuns);
    }
    config.validate()?;
    let runs = (0..n_runs)
        .into_par_iter()
        .map(|run| {
            let seed = config.seed.wrapping_add(run as u64);
            let split = split_holdout(corpus, ratio, seed)?;
            let mut cfg = config.clone();
            cfg.seed = seed;
            let outcome = run_inference(&cfg, corpus, &split)?;
            Ok(RunResult {
                run,
                seed,
                split,
                outcome,
            })
        })
        .collect::<Result<Vec<_>, EvaluationError>>()?;
    let mut trace = PerplexityTrace::default();
    for r in &runs {
        trace.push_outcome(r.run, r.seed, config.algorithm, &r.outcome);
    }
    let finals: Vec<f64> = runs.iter().map(|r| r.outcome.final_perplexity()).collect();
    Ok(ExperimentResult {
        algorithm: config.algorithm,
        summary: SummaryRow::from_values(config.algorithm.name(), &finals),
        runs,
        trace,
    })
}

/// The neglected second term of the topic-total expansion,
/// `V[n_t] / (E[n_t] + V beta)^2`, per topic and its maximum.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondTermDiagnostic {
    pub max: f64,
    pub per_topic: Vec<f64>,
}

pub fn second_term_diagnostic(
    m: &MomentTable,
    beta: f64,
    vocab_size: usize,
) -> Result<SecondTermDiagnostic, StatsError> {
    let var = m.topic_total_var().ok_or(StatsError::MissingVariances)?;
    let v_beta = vocab_size as f64 * beta;
    let per_topic: Vec<f64> = m
        .topic_total()
        .iter()
        .zip(var)
        .map(|(&e, &v)| v / (e + v_beta).powi(2))
        .collect();
    let max = per_topic.iter().copied().fold(0.0, f64::max);
    Ok(SecondTermDiagnostic { max, per_topic })
}

/// Result of matching estimated topics to reference topics.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicRecovery {
    /// `pairs[k] = (estimated, reference, cosine)` in matching order.
    pub pairs: Vec<(usize, usize, f64)>,
    pub mean: f64,
    pub min: f64,
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Greedy one-to-one matching by cosine similarity: repeatedly take the
/// most similar unmatched (estimated, reference) pair.
pub fn topic_recovery(estimated: &Matrix, reference: &Matrix) -> TopicRecovery {
    assert_eq!(
        estimated.cols(),
        reference.cols(),
        "topic matrices must share a vocabulary"
    );
    let mut candidates = Vec::with_capacity(estimated.rows() * reference.rows());
    for (i, a) in estimated.iter_rows().enumerate() {
        for (j, b) in reference.iter_rows().enumerate() {
            candidates.push((i, j, cosine(a, b)));
        }
    }
    candidates.sort_by(|x, y| y.2.total_cmp(&x.2).then((x.0, x.1).cmp(&(y.0, y.1))));
    let mut used_est = vec![false; estimated.rows()];
    let mut used_ref = vec![false; reference.rows()];
    let mut pairs = Vec::new();
    for (i, j, c) in candidates {
        if !used_est[i] && !used_ref[j] {
            used_est[i] = true;
            used_ref[j] = true;
            pairs.push((i, j, c));
        }
    }
    let mean = pairs.iter().map(|p| p.2).sum::<f64>() / pairs.len().max(1) as f64;
    let min = pairs.iter().map(|p| p.2).fold(f64::INFINITY, f64::min);
    TopicRecovery { pairs, mean, min }
}
