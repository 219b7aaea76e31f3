//! Persistent joint samples `z^(1..S)` backing the CVB1s topic-total factor.
//!
//! Every sample assigns a topic to every token. For token `(d, i)` the
//! factor `c(t) = 1/S sum_s 1/(n_t^{\d,i}(z^(s)) + V beta)` only needs the
//! per-sample topic totals with that token's own draw removed, so the
//! samples are kept as totals plus per-token draws and refreshed from the
//! token's new posterior right after it is updated.

use serde::{Deserialize, Serialize};

use super::updates::{inverse_total, sample_categorical};
use crate::corpus::Corpus;
use crate::rng::Rng;
use crate::stats::TokenPosterior;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledTopicCounts {
    samples: usize,
    topics: usize,
    offsets: Vec<usize>,
    /// `z[(offset(d) + i) * S + s]`
    z: Vec<u16>,
    /// `totals[s * T + t]`
    totals: Vec<u32>,
}

impl SampledTopicCounts {
    /// Draws `samples` independent joint assignments from `q`.
    pub fn new(corpus: &Corpus, q: &TokenPosterior, samples: usize, rng: &mut Rng) -> Self {
        assert!(samples >= 1, "at least one sample is required");
        let topics = q.num_topics();
        assert!(topics <= u16::MAX as usize + 1, "too many topics for sampled counts");
        let mut offsets = Vec::with_capacity(corpus.num_documents() + 1);
        offsets.push(0);
        for doc in corpus.documents() {
            offsets.push(offsets.last().unwrap() + doc.len());
        }
        let n = *offsets.last().unwrap();
        let mut out = Self {
            samples,
            topics,
            offsets,
            z: vec![0; n * samples],
            totals: vec![0; samples * topics],
        };
        for (d, doc) in corpus.documents().iter().enumerate() {
            for i in 0..doc.len() {
                let g = out.offsets[d] + i;
                for s in 0..samples {
                    let t = sample_categorical(q.get(d, i), rng);
                    out.z[g * samples + s] = t as u16;
                    out.totals[s * topics + t] += 1;
                }
            }
        }
        out
    }

    pub fn num_samples(&self) -> usize {
        self.samples
    }

    /// Per-topic sample average of `1/(n_t^{\d,i} + V beta)` for token `(d, i)`.
    pub fn c_factors(&self, d: usize, i: usize, v_beta: f64, out: &mut [f64]) {
        let g = self.offsets[d] + i;
        out.iter_mut().for_each(|c| *c = 0.0);
        for s in 0..self.samples {
            let own = self.z[g * self.samples + s] as usize;
            let row = &self.totals[s * self.topics..(s + 1) * self.topics];
            for (t, c) in out.iter_mut().enumerate() {
                let n = row[t] - u32::from(t == own);
                *c += inverse_total(f64::from(n), v_beta);
            }
        }
        let inv = 1.0 / self.samples as f64;
        out.iter_mut().for_each(|c| *c *= inv);
    }

    /// Redraws token `(d, i)` in every sample from its posterior `q`.
    pub fn resample(&mut self, d: usize, i: usize, q: &[f64], rng: &mut Rng) {
        let g = self.offsets[d] + i;
        for s in 0..self.samples {
            let slot = &mut self.z[g * self.samples + s];
            self.totals[s * self.topics + *slot as usize] -= 1;
            let t = sample_categorical(q, rng);
            *slot = t as u16;
            self.totals[s * self.topics + t] += 1;
        }
    }

    /// Topic totals of sample `s`.
    pub fn totals(&self, s: usize) -> &[u32] {
        &self.totals[s * self.topics..(s + 1) * self.topics]
    }
}
