use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::{Corpus, CorpusError, Document};
use crate::rng::{stream_rng, SPLIT_STREAM};

/// Per-document partition of token positions into training and test words.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoldoutSplit {
    train: Vec<Vec<usize>>,
    test: Vec<Vec<usize>>,
    ratio: f64,
    seed: u64,
}

/// Number of held-out tokens for a document of length `len`:
/// `round_half_up(ratio * len)`, clamped so at least one token trains.
fn test_size(len: usize, ratio: f64) -> usize {
    if len <= 1 {
        return 0;
    }
    let k = (ratio * len as f64 + 0.5).floor() as usize;
    k.min(len - 1)
}

/// Holds out a `ratio` fraction of each document's token positions, chosen
/// uniformly at random. Pure function of `(corpus, ratio, seed)`.
pub fn split_holdout(corpus: &Corpus, ratio: f64, seed: u64) -> Result<HoldoutSplit, CorpusError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(CorpusError::InvalidParameter(format!(
            "holdout ratio must lie in (0, 1), got {ratio}"
        )));
    }
    let mut rng = stream_rng(seed, SPLIT_STREAM);
    let mut train = Vec::with_capacity(corpus.num_documents());
    let mut test = Vec::with_capacity(corpus.num_documents());
    for doc in corpus.documents() {
        let n = doc.len();
        let k = test_size(n, ratio);
        let mut held = if k == 0 {
            Vec::new()
        } else {
            index::sample(&mut rng, n, k).into_vec()
        };
        held.sort_unstable();
        let mut is_test = vec![false; n];
        for &i in &held {
            is_test[i] = true;
        }
        train.push((0..n).filter(|&i| !is_test[i]).collect());
        test.push(held);
    }
    Ok(HoldoutSplit {
        train,
        test,
        ratio,
        seed,
    })
}

impl HoldoutSplit {
    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn train_indices(&self, d: usize) -> &[usize] {
        &self.train[d]
    }

    pub fn test_indices(&self, d: usize) -> &[usize] {
        &self.test[d]
    }

    pub fn num_documents(&self) -> usize {
        self.train.len()
    }

    pub fn num_test_tokens(&self) -> usize {
        self.test.iter().map(Vec::len).sum()
    }

    /// The corpus restricted to training tokens. Document indices are kept,
    /// so a document whose tokens were all held out stays as an empty entry.
    pub fn training_corpus(&self, corpus: &Corpus) -> Result<Corpus, CorpusError> {
        self.check_shape(corpus)?;
        let docs = corpus
            .documents()
            .iter()
            .zip(&self.train)
            .map(|(doc, idx)| Document::from_tokens(idx.iter().map(|&i| doc.tokens()[i]).collect()))
            .collect();
        Corpus::new(docs, corpus.vocabulary().clone())
    }

    /// Held-out `(document, word)` pairs in document then position order.
    pub fn test_words<'a>(&'a self, corpus: &'a Corpus) -> impl Iterator<Item = (usize, usize)> + 'a {
        self.test.iter().enumerate().flat_map(move |(d, idx)| {
            let doc = corpus.document(d);
            idx.iter().map(move |&i| (d, doc.tokens()[i]))
        })
    }

    fn check_shape(&self, corpus: &Corpus) -> Result<(), CorpusError> {
        let ok = self.train.len() == corpus.num_documents()
            && corpus
                .documents()
                .iter()
                .enumerate()
                .all(|(d, doc)| self.train[d].len() + self.test[d].len() == doc.len());
        if ok {
            Ok(())
        } else {
            Err(CorpusError::InvalidParameter(
                "holdout split does not match corpus".into(),
            ))
        }
    }
}
