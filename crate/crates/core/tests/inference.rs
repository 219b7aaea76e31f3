mod common;

use common::lda_corpus;
use lda_cvb::corpus::{split_holdout, Corpus, Document, Vocabulary};
use lda_cvb::evaluation::averaged_experiment;
use lda_cvb::inference::{gibbs_sweep, run_inference, AlgorithmKind, Checkpoint, InferenceConfig, InferenceRun};
use lda_cvb::rng::stream_rng;
use lda_cvb::stats::{HardAssignment, Hyperparams};

fn every_algorithm() -> Vec<AlgorithmKind> {
    AlgorithmKind::all()
        .into_iter()
        .map(|a| match a {
            AlgorithmKind::Cvb1s { .. } => AlgorithmKind::Cvb1s { samples: 8 },
            other => other,
        })
        .collect()
}

fn config(alg: AlgorithmKind, topics: usize, iterations: usize, seed: u64) -> InferenceConfig {
    let mut c = InferenceConfig::new(alg, topics);
    c.iterations = iterations;
    c.seed = seed;
    c
}

#[test]
fn runs_are_deterministic() {
    let corpus = lda_corpus(3, 20, 40, 15, 1);
    let split = split_holdout(&corpus, 0.2, 1).unwrap();
    for alg in every_algorithm() {
        let a = run_inference(&config(alg, 3, 5, 9), &corpus, &split).unwrap();
        let b = run_inference(&config(alg, 3, 5, 9), &corpus, &split).unwrap();
        assert_eq!(a.trace, b.trace, "{alg}");
        assert_eq!(a.state, b.state, "{alg}");
    }
}

#[test]
fn checkpoint_resume_is_bit_identical() {
    let corpus = lda_corpus(3, 20, 40, 15, 2);
    let dir = tempfile::tempdir().unwrap();
    for alg in every_algorithm() {
        let mut straight = InferenceRun::new(config(alg, 3, 10, 4), &corpus).unwrap();
        let mut first = InferenceRun::new(config(alg, 3, 10, 4), &corpus).unwrap();
        for _ in 0..3 {
            straight.sweep(&corpus).unwrap();
            first.sweep(&corpus).unwrap();
        }
        let path = dir.path().join(format!("{alg}.json"));
        first.checkpoint().save(&path).unwrap();
        let loaded = Checkpoint::load(&path).unwrap();
        assert_eq!(loaded, first.checkpoint(), "{alg}");
        let mut resumed = InferenceRun::resume(loaded, &corpus).unwrap();
        for _ in 0..4 {
            straight.sweep(&corpus).unwrap();
            resumed.sweep(&corpus).unwrap();
        }
        assert_eq!(resumed.completed(), 7);
        assert_eq!(resumed.checkpoint(), straight.checkpoint(), "{alg}");
    }
}

#[test]
fn single_topic_perplexity_never_moves() {
    let corpus = lda_corpus(2, 15, 30, 12, 3);
    let split = split_holdout(&corpus, 0.3, 3).unwrap();
    for alg in every_algorithm() {
        let out = run_inference(&config(alg, 1, 6, 5), &corpus, &split).unwrap();
        assert!(out.initial_perplexity >= 1.0);
        for r in &out.trace {
            assert!(
                (r.perplexity - out.initial_perplexity).abs() < 1e-9 * out.initial_perplexity,
                "{alg}"
            );
        }
    }
}

#[test]
fn training_beats_the_initialization() {
    let corpus = lda_corpus(4, 60, 80, 40, 4);
    for alg in every_algorithm() {
        let result = averaged_experiment(&config(alg, 4, 30, 12), &corpus, 0.2, 5).unwrap();
        let improved = result
            .runs
            .iter()
            .filter(|r| r.outcome.final_perplexity() <= r.outcome.initial_perplexity)
            .count();
        assert!(improved >= 4, "{alg}: {improved}/5");
        assert!(result.final_perplexities().iter().all(|&p| p >= 1.0));
    }
}

#[test]
fn gibbs_samples_its_conditional() {
    // A single token: its conditional is proportional to gamma.
    let corpus = Corpus::new(vec![Document::from_tokens(vec![0])], Vocabulary::synthetic(3)).unwrap();
    let h = Hyperparams::new(vec![0.5, 1.5, 3.0], 0.1, 3).unwrap();
    let mut rng = stream_rng(7, 0);
    let mut state = HardAssignment::random(&corpus, 3, &mut rng);
    let draws = 100_000;
    let mut counts = [0usize; 3];
    for _ in 0..draws {
        gibbs_sweep(&mut state, &corpus, &h, &mut rng);
        counts[state.topic(0, 0)] += 1;
    }
    for (t, &c) in counts.iter().enumerate() {
        let p = h.gamma()[t] / h.gamma_sum();
        let se = (p * (1.0 - p) / draws as f64).sqrt();
        assert!((c as f64 / draws as f64 - p).abs() < 3.0 * se, "topic {t}: {c}");
    }
}
