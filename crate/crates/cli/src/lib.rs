//! Experiment runner behind the `lda-cvb` binary: argument parsing, corpus
//! loading or generation, multi-run training and CSV output.

use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{ArgAction, Parser};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use lda_cvb::corpus::{load_uci_bow, synthesize_lda_corpus, Corpus, CorpusError, SyntheticConfig};
use lda_cvb::evaluation::{
    averaged_experiment, topic_recovery, EvaluationError, PerplexityTrace, PointEstimates, SummaryRow,
};
use lda_cvb::inference::{AlgorithmKind, InferenceConfig, InferenceError, DEFAULT_SAMPLES};
use lda_cvb::Matrix;

#[derive(Debug, Error)]
pub enum CliError {
    /// `--help` or `--version` output; not a failure.
    #[error("{0}")]
    Help(String),
    #[error("{0}")]
    Usage(String),
    #[error("invalid value for {flag}: {message}")]
    InvalidValue { flag: &'static str, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error(transparent)]
    Evaluation(#[from] EvaluationError),
    #[error("manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },
}

fn invalid(flag: &'static str, message: impl Into<String>) -> CliError {
    CliError::InvalidValue {
        flag,
        message: message.into(),
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "lda-cvb",
    version,
    about = "Train LDA with collapsed Gibbs / CVB variants and report held-out perplexity"
)]
struct Args {
    /// UCI bag-of-words docword file (requires --vocab)
    #[arg(long, value_name = "PATH", requires = "vocab", conflicts_with = "synthetic")]
    docword: Option<PathBuf>,
    /// UCI vocabulary file, one term per line
    #[arg(long, value_name = "PATH", requires = "docword")]
    vocab: Option<PathBuf>,
    /// Generate a corpus, e.g. `T=10,D=200,V=500,len=100[,gamma=0.5,beta=0.01]`
    #[arg(long, value_name = "SPEC")]
    synthetic: Option<String>,
    /// Rerun the experiment recorded in a manifest.json
    #[arg(long, value_name = "PATH", conflicts_with_all = ["docword", "synthetic"])]
    manifest: Option<PathBuf>,
    /// gibbs, cvb, cvb0, cvb1s, cvb1d, tcvb0 or all; repeatable or comma separated
    #[arg(long, value_delimiter = ',', default_value = "cvb0")]
    algorithm: Vec<String>,
    /// Number of topics (defaults to T of --synthetic)
    #[arg(long)]
    topics: Option<usize>,
    /// Sweeps per run
    #[arg(long, default_value_t = 100)]
    iterations: usize,
    /// Symmetric topic-word concentration
    #[arg(long, default_value_t = 0.01)]
    beta: f64,
    /// Initial gamma: one value, or one per topic separated by commas
    #[arg(long, value_name = "F|LIST")]
    gamma: Option<String>,
    /// Re-estimate gamma after every sweep (initial value 50/T unless --gamma)
    #[arg(long, default_value_t = true, action = ArgAction::Set, value_name = "BOOL")]
    estimate_gamma: bool,
    /// Digamma fixed-point steps per sweep for --estimate-gamma
    #[arg(long, default_value_t = 1)]
    gamma_steps: usize,
    /// Fraction of each document's tokens held out for perplexity
    #[arg(long, default_value_t = 0.2)]
    holdout: f64,
    /// Base seed; run r uses seed + r
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Independent runs per algorithm
    #[arg(long, default_value_t = 5)]
    runs: usize,
    /// Samples per token for cvb1s
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: usize,
    /// Rebuild expected counts from the posteriors every N sweeps (0 = never)
    #[arg(long, default_value_t = 10)]
    rebuild: usize,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Record elapsed seconds in traces (makes output nondeterministic)
    #[arg(long)]
    wall_time: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub topics: usize,
    pub documents: usize,
    pub vocab_size: usize,
    pub doc_len: usize,
    pub gamma: f64,
    pub beta: f64,
}

impl SyntheticSpec {
    pub fn parse(spec: &str) -> Result<Self, CliError> {
        let mut out = SyntheticSpec {
            topics: 0,
            documents: 0,
            vocab_size: 0,
            doc_len: 0,
            gamma: 0.5,
            beta: 0.01,
        };
        let mut seen = [false; 4];
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| invalid("--synthetic", format!("expected KEY=VALUE, got {part:?}")))?;
            let int = |v: &str| {
                v.parse::<usize>()
                    .map_err(|_| invalid("--synthetic", format!("{key} must be a positive integer, got {v:?}")))
            };
            let real = |v: &str| {
                v.parse::<f64>()
                    .map_err(|_| invalid("--synthetic", format!("{key} must be a number, got {v:?}")))
            };
            match key {
                "T" => (out.topics, seen[0]) = (int(value)?, true),
                "D" => (out.documents, seen[1]) = (int(value)?, true),
                "V" => (out.vocab_size, seen[2]) = (int(value)?, true),
                "len" => (out.doc_len, seen[3]) = (int(value)?, true),
                "gamma" => out.gamma = real(value)?,
                "beta" => out.beta = real(value)?,
                _ => {
                    return Err(invalid(
                        "--synthetic",
                        format!("unknown key {key:?} (use T, D, V, len, gamma, beta)"),
                    ))
                }
            }
        }
        if seen.contains(&false) {
            return Err(invalid("--synthetic", "T, D, V and len are all required"));
        }
        if [out.topics, out.documents, out.vocab_size, out.doc_len].contains(&0) {
            return Err(invalid("--synthetic", "T, D, V and len must be at least 1"));
        }
        if !(out.gamma > 0.0 && out.beta > 0.0 && out.gamma.is_finite() && out.beta.is_finite()) {
            return Err(invalid("--synthetic", "gamma and beta must be positive"));
        }
        Ok(out)
    }

    pub fn config(&self, seed: u64) -> SyntheticConfig {
        SyntheticConfig {
            topics: self.topics,
            documents: self.documents,
            vocab_size: self.vocab_size,
            doc_len: self.doc_len,
            gamma: vec![self.gamma; self.topics],
            beta: self.beta,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusSource {
    Uci { docword: PathBuf, vocab: PathBuf },
    Synthetic(SyntheticSpec),
}

/// A fully validated experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub source: CorpusSource,
    pub algorithms: Vec<AlgorithmKind>,
    pub topics: usize,
    pub iterations: usize,
    pub beta: f64,
    pub gamma: Vec<f64>,
    pub estimate_gamma: bool,
    pub gamma_steps: usize,
    pub holdout: f64,
    pub seed: u64,
    pub runs: usize,
    pub rebuild_period: usize,
    pub record_wall_time: bool,
    #[serde(skip)]
    pub out: PathBuf,
}

impl RunSpec {
    pub fn inference_config(&self, algorithm: AlgorithmKind) -> InferenceConfig {
        InferenceConfig {
            algorithm,
            topics: self.topics,
            iterations: self.iterations,
            seed: self.seed,
            gamma: self.gamma.clone(),
            beta: self.beta,
            estimate_gamma: self.estimate_gamma,
            gamma_steps: self.gamma_steps,
            rebuild_period: self.rebuild_period,
            record_wall_time: self.record_wall_time,
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.topics == 0 {
            return Err(invalid("--topics", "must be at least 1"));
        }
        if self.iterations == 0 {
            return Err(invalid("--iterations", "must be at least 1"));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(invalid("--beta", format!("must be positive, got {}", self.beta)));
        }
        if self.gamma.len() != self.topics {
            return Err(invalid(
                "--gamma",
                format!("expected 1 or {} values, got {}", self.topics, self.gamma.len()),
            ));
        }
        if !self.gamma.iter().all(|g| *g > 0.0 && g.is_finite()) {
            return Err(invalid("--gamma", "values must be positive"));
        }
        if !(self.holdout > 0.0 && self.holdout < 1.0) {
            return Err(invalid(
                "--holdout",
                format!("must lie strictly between 0 and 1, got {}", self.holdout),
            ));
        }
        if self.runs == 0 {
            return Err(invalid("--runs", "must be at least 1"));
        }
        if self.algorithms.is_empty() {
            return Err(invalid("--algorithm", "no algorithm selected"));
        }
        for a in &self.algorithms {
            self.inference_config(*a).validate()?;
        }
        Ok(())
    }
}

fn parse_algorithms(names: &[String], samples: usize) -> Result<Vec<AlgorithmKind>, CliError> {
    if samples == 0 {
        return Err(invalid("--samples", "must be at least 1"));
    }
    let mut out: Vec<AlgorithmKind> = Vec::new();
    for name in names.iter().map(|n| n.trim().to_ascii_lowercase()) {
        let add: Vec<AlgorithmKind> = if name == "all" {
            AlgorithmKind::all()
                .into_iter()
                .map(|a| match a {
                    AlgorithmKind::Cvb1s { .. } => AlgorithmKind::Cvb1s { samples },
                    other => other,
                })
                .collect()
        } else {
            vec![AlgorithmKind::from_name(&name, samples).ok_or_else(|| {
                invalid(
                    "--algorithm",
                    format!("unknown algorithm {name:?} (use gibbs, cvb, cvb0, cvb1s, cvb1d, tcvb0 or all)"),
                )
            })?]
        };
        for a in add {
            if !out.contains(&a) {
                out.push(a);
            }
        }
    }
    Ok(out)
}

fn parse_gamma(value: Option<&str>, topics: usize) -> Result<Vec<f64>, CliError> {
    let Some(value) = value else {
        return Ok(vec![50.0 / topics.max(1) as f64; topics]);
    };
    let values = value
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| invalid("--gamma", format!("cannot parse {v:?} as a number")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(if values.len() == 1 {
        vec![values[0]; topics]
    } else {
        values
    })
}

/// Parses command-line arguments (the first item is the program name).
/// Every value is validated here; a spec returned by this function runs
/// without precondition failures downstream.
pub fn parse_config<I, T>(args: I) -> Result<RunSpec, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = Args::try_parse_from(args).map_err(|e| {
        let text = e.to_string().trim_end().to_string();
        match e.kind() {
            clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => CliError::Help(text),
            _ => CliError::Usage(text),
        }
    })?;
    if let Some(path) = &args.manifest {
        let mut spec = read_manifest(path)?.spec;
        spec.out = args.out.clone();
        spec.validate()?;
        return Ok(spec);
    }
    let source = match (&args.docword, &args.vocab, &args.synthetic) {
        (Some(docword), Some(vocab), None) => CorpusSource::Uci {
            docword: docword.clone(),
            vocab: vocab.clone(),
        },
        (None, None, Some(s)) => CorpusSource::Synthetic(SyntheticSpec::parse(s)?),
        _ => {
            return Err(CliError::Usage(
                "missing corpus: pass --docword PATH --vocab PATH, --synthetic SPEC or --manifest PATH".into(),
            ))
        }
    };
    let topics = match (args.topics, &source) {
        (Some(t), _) => t,
        (None, CorpusSource::Synthetic(s)) => s.topics,
        (None, CorpusSource::Uci { .. }) => return Err(invalid("--topics", "required for UCI corpora")),
    };
    let spec = RunSpec {
        algorithms: parse_algorithms(&args.algorithm, args.samples)?,
        gamma: parse_gamma(args.gamma.as_deref(), topics)?,
        source,
        topics,
        iterations: args.iterations,
        beta: args.beta,
        estimate_gamma: args.estimate_gamma,
        gamma_steps: args.gamma_steps,
        holdout: args.holdout,
        seed: args.seed,
        runs: args.runs,
        rebuild_period: args.rebuild,
        record_wall_time: args.wall_time,
        out: args.out,
    };
    spec.validate()?;
    Ok(spec)
}

/// Reproducibility record written next to the CSV files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub spec: RunSpec,
    pub seeds: Vec<u64>,
    pub files: Vec<String>,
}

pub fn read_manifest(path: &Path) -> Result<Manifest, CliError> {
    let file = File::open(path).map_err(io_err(path))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| CliError::Manifest {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Writes through a temporary file in the same directory, then renames it
/// into place.
pub fn write_atomic(path: &Path, write: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<(), CliError> {
    let tmp = path.with_file_name(format!(
        ".{}.tmp",
        path.file_name().map_or("out".into(), |n| n.to_string_lossy())
    ));
    let file = File::create(&tmp).map_err(io_err(&tmp))?;
    let mut w = BufWriter::new(file);
    write(&mut w).map_err(io_err(&tmp))?;
    let file = w.into_inner().map_err(|e| io_err(&tmp)(e.into_error()))?;
    file.sync_all().map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

/// Trace or summary output.
pub enum CsvTable<'a> {
    Trace(&'a PerplexityTrace),
    Summary(&'a [SummaryRow]),
}

pub fn emit_csv(table: CsvTable<'_>, path: &Path) -> Result<(), CliError> {
    write_atomic(path, |w| match table {
        CsvTable::Trace(t) => t.write_csv(w),
        CsvTable::Summary(rows) => SummaryRow::write_csv(rows, w),
    })
}

/// Greedy-matched cosine similarity between the estimated and generating
/// topics of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryRow {
    pub algorithm: AlgorithmKind,
    pub run: usize,
    pub mean_cosine: f64,
    pub min_cosine: f64,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub summary: Vec<SummaryRow>,
    pub recovery: Vec<RecoveryRow>,
    pub files: Vec<PathBuf>,
}

fn load_corpus(spec: &RunSpec) -> Result<(Corpus, Option<Matrix>), CliError> {
    match &spec.source {
        CorpusSource::Uci { docword, vocab } => {
            let d = File::open(docword).map_err(io_err(docword))?;
            let v = File::open(vocab).map_err(io_err(vocab))?;
            Ok((load_uci_bow(BufReader::new(d), BufReader::new(v))?, None))
        }
        CorpusSource::Synthetic(s) => {
            let generated = synthesize_lda_corpus(&s.config(spec.seed))?;
            Ok((generated.corpus, Some(generated.phi)))
        }
    }
}

/// Runs every algorithm of `spec` and writes `trace_<algorithm>.csv`,
/// `summary.csv`, `manifest.json` and, for synthetic corpora,
/// `recovery.csv` into `spec.out`.
pub fn run(spec: &RunSpec) -> Result<RunReport, CliError> {
    spec.validate()?;
    let (corpus, truth) = load_corpus(spec)?;
    if let Some(t) = &truth {
        if t.cols() != corpus.vocab_size() {
            return Err(CliError::Usage(
                "generated topics do not match the corpus vocabulary".into(),
            ));
        }
    }
    fs::create_dir_all(&spec.out).map_err(io_err(&spec.out))?;
    let mut summary = Vec::new();
    let mut recovery = Vec::new();
    let mut files = Vec::new();
    for &algorithm in &spec.algorithms {
        let result = averaged_experiment(&spec.inference_config(algorithm), &corpus, spec.holdout, spec.runs)?;
        let path = spec.out.join(format!("trace_{}.csv", algorithm.name()));
        emit_csv(CsvTable::Trace(&result.trace), &path)?;
        files.push(path);
        summary.push(result.summary.clone());
        if let Some(truth) = &truth {
            for r in &result.runs {
                let train = r.split.training_corpus(&corpus)?;
                let est = PointEstimates::from_moments(&r.outcome.state.moments(&train)?, &r.outcome.hyper);
                let score = topic_recovery(&est.phi, truth);
                recovery.push(RecoveryRow {
                    algorithm,
                    run: r.run,
                    mean_cosine: score.mean,
                    min_cosine: score.min,
                });
            }
        }
    }
    let path = spec.out.join("summary.csv");
    emit_csv(CsvTable::Summary(&summary), &path)?;
    files.push(path);
    if !recovery.is_empty() {
        let path = spec.out.join("recovery.csv");
        write_atomic(&path, |w| {
            writeln!(w, "algorithm,run,mean_cosine,min_cosine")?;
            for r in &recovery {
                writeln!(w, "{},{},{:?},{:?}", r.algorithm, r.run, r.mean_cosine, r.min_cosine)?;
            }
            Ok(())
        })?;
        files.push(path);
    }
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        spec: spec.clone(),
        seeds: (0..spec.runs as u64).map(|r| spec.seed.wrapping_add(r)).collect(),
        files: files
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect(),
    };
    let path = spec.out.join("manifest.json");
    write_atomic(&path, |w| {
        serde_json::to_writer_pretty(&mut *w, &manifest).map_err(io::Error::other)?;
        writeln!(w)
    })?;
    files.push(path);
    Ok(RunReport {
        summary,
        recovery,
        files,
    })
}


#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
