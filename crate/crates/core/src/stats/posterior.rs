use rand::Rng as _;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use super::StatsError;
use crate::corpus::Corpus;
use crate::rng::Rng;

/// Ragged table of length-`topics` probability vectors, one per item of
/// each document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Ragged {
    topics: usize,
    offsets: Vec<usize>,
    values: Vec<f64>,
}

impl Ragged {
    fn filled(lengths: impl Iterator<Item = usize>, topics: usize, mut fill: impl FnMut(&mut [f64])) -> Self {
        let mut offsets = vec![0];
        for len in lengths {
            offsets.push(offsets.last().unwrap() + len);
        }
        let total = *offsets.last().unwrap();
        let mut values = vec![0.0; total * topics];
        for row in values.chunks_mut(topics) {
            fill(row);
        }
        Self {
            topics,
            offsets,
            values,
        }
    }

    fn get(&self, d: usize, i: usize) -> &[f64] {
        let k = self.offsets[d] + i;
        debug_assert!(k < self.offsets[d + 1]);
        &self.values[k * self.topics..(k + 1) * self.topics]
    }

    fn get_mut(&mut self, d: usize, i: usize) -> &mut [f64] {
        let k = self.offsets[d] + i;
        debug_assert!(k < self.offsets[d + 1]);
        &mut self.values[k * self.topics..(k + 1) * self.topics]
    }

    fn len_of(&self, d: usize) -> usize {
        self.offsets[d + 1] - self.offsets[d]
    }

    fn num_docs(&self) -> usize {
        self.offsets.len() - 1
    }

    fn check(&self, lengths: impl Iterator<Item = usize>, what: &str) -> Result<(), StatsError> {
        let lengths: Vec<usize> = lengths.collect();
        if lengths.len() != self.num_docs() || lengths.iter().enumerate().any(|(d, &n)| n != self.len_of(d)) {
            return Err(StatsError::DimensionMismatch(format!(
                "{what} does not cover the corpus"
            )));
        }
        Ok(())
    }
}

fn dirichlet_one(row: &mut [f64], rng: &mut Rng) {
    for x in row.iter_mut() {
        *x = Exp1.sample(rng);
    }
    let s: f64 = row.iter().sum();
    row.iter_mut().for_each(|x| *x /= s);
}

fn normalized(row: &[f64]) -> bool {
    row.iter().all(|&x| x >= 0.0) && (row.iter().sum::<f64>() - 1.0).abs() < 1e-10
}

/// Per-token variational posteriors `q(z_{d,i})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenPosterior(Ragged);

impl TokenPosterior {
    pub fn uniform(corpus: &Corpus, topics: usize) -> Self {
        let lens = corpus.documents().iter().map(|d| d.len());
        Self(Ragged::filled(lens, topics, |r| r.fill(1.0 / topics as f64)))
    }

    /// Each token's posterior drawn from a symmetric Dirichlet(1, ..., 1).
    pub fn random(corpus: &Corpus, topics: usize, rng: &mut Rng) -> Self {
        let lens = corpus.documents().iter().map(|d| d.len());
        Self(Ragged::filled(lens, topics, |r| dirichlet_one(r, rng)))
    }

    /// Builds from explicit per-document, per-token vectors.
    pub fn from_vectors(docs: Vec<Vec<Vec<f64>>>) -> Result<Self, StatsError> {
        let topics = docs.iter().flatten().next().map_or(1, Vec::len);
        let mut rows = docs.iter().flatten();
        let mut bad = false;
        let table = Ragged::filled(docs.iter().map(Vec::len), topics, |r| {
            let src = rows.next().unwrap();
            if src.len() == r.len() && normalized(src) {
                r.copy_from_slice(src);
            } else {
                bad = true;
            }
        });
        if bad {
            return Err(StatsError::DimensionMismatch(
                "posterior vectors must all have length T and sum to 1".into(),
            ));
        }
        Ok(Self(table))
    }

    pub fn num_topics(&self) -> usize {
        self.0.topics
    }

    pub fn num_documents(&self) -> usize {
        self.0.num_docs()
    }

    pub fn doc_len(&self, d: usize) -> usize {
        self.0.len_of(d)
    }

    pub fn get(&self, d: usize, i: usize) -> &[f64] {
        self.0.get(d, i)
    }

    pub fn get_mut(&mut self, d: usize, i: usize) -> &mut [f64] {
        self.0.get_mut(d, i)
    }

    pub fn check_shape(&self, corpus: &Corpus) -> Result<(), StatsError> {
        self.0
            .check(corpus.documents().iter().map(|d| d.len()), "token posterior")
    }
}

/// Per-(document, word type) posteriors `q(z_{d,v})`, indexed by the type's
/// position in [`crate::corpus::Document::type_counts`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypePosterior(Ragged);

impl TypePosterior {
    pub fn random(corpus: &Corpus, topics: usize, rng: &mut Rng) -> Self {
        let lens = corpus.documents().iter().map(|d| d.type_counts().len());
        Self(Ragged::filled(lens, topics, |r| dirichlet_one(r, rng)))
    }

    pub fn uniform(corpus: &Corpus, topics: usize) -> Self {
        let lens = corpus.documents().iter().map(|d| d.type_counts().len());
        Self(Ragged::filled(lens, topics, |r| r.fill(1.0 / topics as f64)))
    }

    pub fn num_topics(&self) -> usize {
        self.0.topics
    }

    pub fn num_types(&self, d: usize) -> usize {
        self.0.len_of(d)
    }

    pub fn get(&self, d: usize, k: usize) -> &[f64] {
        self.0.get(d, k)
    }

    pub fn get_mut(&mut self, d: usize, k: usize) -> &mut [f64] {
        self.0.get_mut(d, k)
    }

    /// The equivalent token-level posterior: every token of type `v` in
    /// document `d` carries `q(z_{d,v})`.
    pub fn to_token_posterior(&self, corpus: &Corpus) -> TokenPosterior {
        let topics = self.num_topics();
        let docs = corpus
            .documents()
            .iter()
            .enumerate()
            .map(|(d, doc)| {
                doc.tokens()
                    .iter()
                    .map(|&w| {
                        let k = doc.type_counts().binary_search_by_key(&w, |t| t.0).unwrap();
                        self.get(d, k).to_vec()
                    })
                    .collect()
            })
            .collect::<Vec<Vec<Vec<f64>>>>();
        if docs.iter().all(Vec::is_empty) {
            return TokenPosterior(Ragged::filled(docs.iter().map(Vec::len), topics, |_| {}));
        }
        TokenPosterior::from_vectors(docs).expect("type posterior rows are normalized")
    }

    pub fn check_shape(&self, corpus: &Corpus) -> Result<(), StatsError> {
        self.0.check(
            corpus.documents().iter().map(|d| d.type_counts().len()),
            "type posterior",
        )
    }
}

/// Collapsed Gibbs state: one topic per token plus exact integer tallies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardAssignment {
    topics: usize,
    vocab_size: usize,
    offsets: Vec<usize>,
    z: Vec<usize>,
    doc_topic: Vec<u32>,
    // word-major: [v * topics + t]
    word_topic: Vec<u32>,
    topic_total: Vec<u32>,
}

impl HardAssignment {
    /// Topics drawn uniformly at random.
    pub fn random(corpus: &Corpus, topics: usize, rng: &mut Rng) -> Self {
        let z = corpus
            .documents()
            .iter()
            .map(|doc| (0..doc.len()).map(|_| rng.random_range(0..topics)).collect())
            .collect();
        Self::from_assignments(corpus, topics, z).expect("sampled topics are in range")
    }

    pub fn from_assignments(corpus: &Corpus, topics: usize, z: Vec<Vec<usize>>) -> Result<Self, StatsError> {
        if z.len() != corpus.num_documents() || z.iter().zip(corpus.documents()).any(|(zd, doc)| zd.len() != doc.len())
        {
            return Err(StatsError::DimensionMismatch(
                "assignment does not cover the corpus".into(),
            ));
        }
        if z.iter().flatten().any(|&t| t >= topics) {
            return Err(StatsError::DimensionMismatch("topic id out of range".into()));
        }
        let vocab_size = corpus.vocab_size();
        let mut state = Self {
            topics,
            vocab_size,
            offsets: Vec::with_capacity(z.len() + 1),
            z: Vec::with_capacity(corpus.total_tokens()),
            doc_topic: vec![0; corpus.num_documents() * topics],
            word_topic: vec![0; vocab_size * topics],
            topic_total: vec![0; topics],
        };
        state.offsets.push(0);
        for (d, (zd, doc)) in z.into_iter().zip(corpus.documents()).enumerate() {
            for (&t, &w) in zd.iter().zip(doc.tokens()) {
                state.doc_topic[d * topics + t] += 1;
                state.word_topic[w * topics + t] += 1;
                state.topic_total[t] += 1;
            }
            state.z.extend(zd);
            state.offsets.push(state.z.len());
        }
        Ok(state)
    }

    pub fn num_topics(&self) -> usize {
        self.topics
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn topic(&self, d: usize, i: usize) -> usize {
        self.z[self.offsets[d] + i]
    }

    pub fn doc_topic(&self, d: usize) -> &[u32] {
        &self.doc_topic[d * self.topics..(d + 1) * self.topics]
    }

    pub fn word_topic(&self, v: usize) -> &[u32] {
        &self.word_topic[v * self.topics..(v + 1) * self.topics]
    }

    pub fn topic_total(&self) -> &[u32] {
        &self.topic_total
    }

    /// Removes token `(d, i)` (word `w`) from the tallies and returns its
    /// topic. The stored topic is left in place until [`Self::assign`].
    pub fn remove(&mut self, d: usize, i: usize, w: usize) -> usize {
        let t = self.topic(d, i);
        self.doc_topic[d * self.topics + t] -= 1;
        self.word_topic[w * self.topics + t] -= 1;
        self.topic_total[t] -= 1;
        t
    }

    pub fn assign(&mut self, d: usize, i: usize, w: usize, t: usize) {
        self.z[self.offsets[d] + i] = t;
        self.doc_topic[d * self.topics + t] += 1;
        self.word_topic[w * self.topics + t] += 1;
        self.topic_total[t] += 1;
    }

    /// Recounts from `z` and reports whether every tally matches exactly.
    pub fn tallies_consistent(&self, corpus: &Corpus) -> bool {
        let z = (0..corpus.num_documents())
            .map(|d| self.z[self.offsets[d]..self.offsets[d + 1]].to_vec())
            .collect();
        match Self::from_assignments(corpus, self.topics, z) {
            Ok(fresh) => fresh == *self,
            Err(_) => false,
        }
    }
}
