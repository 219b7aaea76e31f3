//! Bag-of-words corpora: loading, validation, holdout splits and synthetic
//! generation from the LDA generative process.

mod split;
mod synthetic;
mod uci;

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use split::{split_holdout, HoldoutSplit};
pub use synthetic::{synthesize_lda_corpus, synthesize_with_topics, SyntheticConfig, SyntheticCorpus};
pub use uci::{load_uci_bow, write_uci_bow};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: word id out of range ({id} not in 1..={vocab_size})")]
    WordIdOutOfRange { line: usize, id: usize, vocab_size: usize },
    #[error("line {line}: document id out of range ({id} not in 1..={documents})")]
    DocIdOutOfRange { line: usize, id: usize, documents: usize },
    #[error("line {line}: count must be positive, got {count}")]
    NonPositiveCount { line: usize, count: i64 },
    #[error("vocabulary has {found} lines but the docword header declares W = {declared}")]
    VocabSizeMismatch { declared: usize, found: usize },
    #[error("docword header declares NNZ = {declared} but {found} entries were read")]
    EntryCountMismatch { declared: usize, found: usize },
    #[error("duplicate vocabulary term {term:?} (line {line})")]
    DuplicateTerm { term: String, line: usize },
    #[error("token id {id} out of range for vocabulary of size {vocab_size}")]
    TokenOutOfRange { id: usize, vocab_size: usize },
    #[error("corpus must contain at least one document and one token")]
    Empty,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Ordered list of distinct terms; a term's id is its position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    terms: Vec<String>,
}

impl Vocabulary {
    pub fn new(terms: Vec<String>) -> Result<Self, CorpusError> {
        if terms.is_empty() {
            return Err(CorpusError::Empty);
        }
        let mut seen = HashSet::with_capacity(terms.len());
        for (i, term) in terms.iter().enumerate() {
            if !seen.insert(term.as_str()) {
                return Err(CorpusError::DuplicateTerm {
                    term: term.clone(),
                    line: i + 1,
                });
            }
        }
        Ok(Self { terms })
    }

    /// Placeholder terms `w0, w1, ...` for generated corpora.
    pub fn synthetic(size: usize) -> Self {
        Self {
            terms: (0..size).map(|v| format!("w{v}")).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn term(&self, id: usize) -> Option<&str> {
        self.terms.get(id).map(String::as_str)
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }
}

/// A document as a token sequence plus its per-type counts `n_dv`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    tokens: Vec<usize>,
    // (word id, count), sorted by word id, counts > 0
    types: Vec<(usize, usize)>,
}

impl Document {
    pub fn from_tokens(tokens: Vec<usize>) -> Self {
        let mut counts = BTreeMap::new();
        for &w in &tokens {
            *counts.entry(w).or_insert(0usize) += 1;
        }
        Self {
            tokens,
            types: counts.into_iter().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[usize] {
        &self.tokens
    }

    /// Distinct word types with their multiplicities, ordered by word id.
    pub fn type_counts(&self) -> &[(usize, usize)] {
        &self.types
    }

    pub fn count_of(&self, word: usize) -> usize {
        self.types
            .binary_search_by_key(&word, |&(w, _)| w)
            .map_or(0, |k| self.types[k].1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    documents: Vec<Document>,
    vocabulary: Vocabulary,
    total_tokens: usize,
}

impl Corpus {
    /// Validates token ids against the vocabulary. Empty documents are
    /// allowed but the corpus as a whole must hold at least one token.
    pub fn new(documents: Vec<Document>, vocabulary: Vocabulary) -> Result<Self, CorpusError> {
        let v = vocabulary.len();
        for doc in &documents {
            if let Some(&(id, _)) = doc.types.last() {
                if id >= v {
                    return Err(CorpusError::TokenOutOfRange { id, vocab_size: v });
                }
            }
        }
        let total_tokens = documents.iter().map(Document::len).sum();
        if documents.is_empty() || total_tokens == 0 {
            return Err(CorpusError::Empty);
        }
        Ok(Self {
            documents,
            vocabulary,
            total_tokens,
        })
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn document(&self, d: usize) -> &Document {
        &self.documents[d]
    }

    pub fn num_documents(&self) -> usize {
        self.documents.len()
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn vocab_size(&self) -> usize {
        self.vocabulary.len()
    }

    /// Total token count `n`.
    pub fn total_tokens(&self) -> usize {
        self.total_tokens
    }

    pub fn doc_lengths(&self) -> Vec<usize> {
        self.documents.iter().map(Document::len).collect()
    }

    /// Corpus-wide count of each word type.
    pub fn word_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.vocab_size()];
        for doc in &self.documents {
            for &(w, c) in doc.type_counts() {
                counts[w] += c;
            }
        }
        counts
    }

    /// The corpus with every document repeated `times` times (all copies of
    /// the original document list, in order).
    pub fn replicated(&self, times: usize) -> Self {
        assert!(times >= 1);
        let documents = (0..times).flat_map(|_| self.documents.iter().cloned()).collect();
        Self {
            documents,
            vocabulary: self.vocabulary.clone(),
            total_tokens: self.total_tokens * times,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn document_type_counts_sum_to_length() {
        let doc = Document::from_tokens(vec![3, 1, 3, 0, 3]);
        assert_eq!(doc.type_counts(), &[(0, 1), (1, 1), (3, 3)]);
        assert_eq!(doc.type_counts().iter().map(|t| t.1).sum::<usize>(), doc.len());
        assert_eq!(doc.count_of(3), 3);
        assert_eq!(doc.count_of(2), 0);
    }

    #[test]
    fn rejects_out_of_range_tokens() {
        let err = Corpus::new(vec![Document::from_tokens(vec![0, 5])], Vocabulary::synthetic(3));
        assert!(matches!(err, Err(CorpusError::TokenOutOfRange { id: 5, .. })));
    }

    #[test]
    fn rejects_duplicate_terms() {
        let err = Vocabulary::new(vec!["a".into(), "b".into(), "a".into()]);
        assert!(matches!(err, Err(CorpusError::DuplicateTerm { line: 3, .. })));
    }

    #[test]
    fn rejects_tokenless_corpus() {
        let err = Corpus::new(vec![Document::from_tokens(vec![])], Vocabulary::synthetic(2));
        assert!(matches!(err, Err(CorpusError::Empty)));
    }

    #[test]
    fn replication_scales_counts() {
        let c = Corpus::new(
            vec![Document::from_tokens(vec![0, 1]), Document::from_tokens(vec![1])],
            Vocabulary::synthetic(2),
        )
        .unwrap();
        let r = c.replicated(2);
        assert_eq!(r.num_documents(), 4);
        assert_eq!(r.total_tokens(), 6);
        assert_eq!(r.word_counts(), vec![2, 4]);
    }
}
