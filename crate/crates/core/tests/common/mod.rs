#![allow(dead_code)]

use lda_cvb::corpus::{synthesize_lda_corpus, Corpus, Document, SyntheticConfig, Vocabulary};
use proptest::prelude::*;

/// Random corpora with every document nonempty.
pub fn corpus_strategy(max_docs: usize, max_len: usize, vocab: usize) -> impl Strategy<Value = Corpus> {
    prop::collection::vec(prop::collection::vec(0..vocab, 1..=max_len), 1..=max_docs).prop_map(move |docs| {
        Corpus::new(
            docs.into_iter().map(Document::from_tokens).collect(),
            Vocabulary::synthetic(vocab),
        )
        .unwrap()
    })
}

pub fn lda_corpus(topics: usize, documents: usize, vocab_size: usize, doc_len: usize, seed: u64) -> Corpus {
    synthesize_lda_corpus(&SyntheticConfig {
        topics,
        documents,
        vocab_size,
        doc_len,
        gamma: vec![0.5; topics],
        beta: 0.05,
        seed,
    })
    .unwrap()
    .corpus
}
