use serde::{Deserialize, Serialize};

use super::{HardAssignment, StatsError, TokenPosterior, TypePosterior, NEGATIVE_TOLERANCE};
use crate::corpus::Corpus;

const UNOBSERVED: usize = usize::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Tables {
    // [d * T + t]
    doc_topic: Vec<f64>,
    // [slot * T + t], one slot per word observed in the corpus
    word_topic: Vec<f64>,
    topic_total: Vec<f64>,
}

impl Tables {
    fn zeros(docs: usize, slots: usize, topics: usize) -> Self {
        Self {
            doc_topic: vec![0.0; docs * topics],
            word_topic: vec![0.0; slots * topics],
            topic_total: vec![0.0; topics],
        }
    }

    fn refresh_totals(&mut self, topics: usize) {
        self.topic_total.iter_mut().for_each(|x| *x = 0.0);
        for row in self.word_topic.chunks(topics) {
            for (acc, x) in self.topic_total.iter_mut().zip(row) {
                *acc += x;
            }
        }
    }

    fn max_abs_diff(&self, other: &Self) -> f64 {
        let pairs = self
            .doc_topic
            .iter()
            .zip(&other.doc_topic)
            .chain(self.word_topic.iter().zip(&other.word_topic))
            .chain(self.topic_total.iter().zip(&other.topic_total));
        pairs.map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    fn entries(&self) -> impl Iterator<Item = &f64> {
        self.doc_topic.iter().chain(&self.word_topic).chain(&self.topic_total)
    }
}

/// Statistics with one token (or one word type) removed, i.e. the `\d,i`
/// (or `\d,v`) quantities for the document and word being updated.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExcludedMoments {
    pub doc_topic: Vec<f64>,
    pub word_topic: Vec<f64>,
    pub topic_total: Vec<f64>,
    pub variances: Option<ExcludedVariances>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExcludedVariances {
    pub doc_topic: Vec<f64>,
    pub word_topic: Vec<f64>,
    pub topic_total: Vec<f64>,
}

impl ExcludedMoments {
    pub fn new(doc_topic: Vec<f64>, word_topic: Vec<f64>, topic_total: Vec<f64>) -> Self {
        assert!(doc_topic.len() == word_topic.len() && word_topic.len() == topic_total.len());
        Self {
            doc_topic,
            word_topic,
            topic_total,
            variances: None,
        }
    }

    pub fn with_variances(mut self, doc_topic: Vec<f64>, word_topic: Vec<f64>, topic_total: Vec<f64>) -> Self {
        assert!(doc_topic.len() == self.num_topics());
        assert!(word_topic.len() == self.num_topics() && topic_total.len() == self.num_topics());
        self.variances = Some(ExcludedVariances {
            doc_topic,
            word_topic,
            topic_total,
        });
        self
    }

    pub fn num_topics(&self) -> usize {
        self.doc_topic.len()
    }
}

fn resize(buf: &mut Vec<f64>, n: usize) {
    buf.clear();
    buf.resize(n, 0.0);
}

fn excluded(value: f64, removed: f64, table: &'static str, index: usize) -> Result<f64, StatsError> {
    let x = value - removed;
    if x >= 0.0 {
        Ok(x)
    } else if x > -NEGATIVE_TOLERANCE {
        Ok(0.0)
    } else {
        Err(StatsError::Desynchronized { table, index, value: x })
    }
}

/// Expected counts (and optional variances) under a factorized posterior.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentTable {
    topics: usize,
    vocab_size: usize,
    word_slot: Vec<usize>,
    mean: Tables,
    var: Option<Tables>,
    #[serde(skip)]
    scratch: ExcludedMoments,
}

// the scratch view is a workspace, not part of the table's value
impl PartialEq for MomentTable {
    fn eq(&self, other: &Self) -> bool {
        self.topics == other.topics
            && self.vocab_size == other.vocab_size
            && self.word_slot == other.word_slot
            && self.mean == other.mean
            && self.var == other.var
    }
}

impl MomentTable {
    fn empty(corpus: &Corpus, topics: usize, with_variances: bool) -> Self {
        let mut word_slot = vec![UNOBSERVED; corpus.vocab_size()];
        let mut slots = 0;
        for (w, &count) in corpus.word_counts().iter().enumerate() {
            if count > 0 {
                word_slot[w] = slots;
                slots += 1;
            }
        }
        let docs = corpus.num_documents();
        Self {
            topics,
            vocab_size: corpus.vocab_size(),
            word_slot,
            mean: Tables::zeros(docs, slots, topics),
            var: with_variances.then(|| Tables::zeros(docs, slots, topics)),
            scratch: ExcludedMoments::default(),
        }
    }

    /// All-zero moments: the prior-only model.
    pub fn prior_only(corpus: &Corpus, topics: usize, with_variances: bool) -> Self {
        Self::empty(corpus, topics, with_variances)
    }

    fn accumulate(&mut self, d: usize, slot: usize, weight: f64, q: &[f64]) {
        let t0 = self.topics;
        for (t, &p) in q.iter().enumerate() {
            self.mean.doc_topic[d * t0 + t] += weight * p;
            self.mean.word_topic[slot * t0 + t] += weight * p;
        }
        if let Some(var) = self.var.as_mut() {
            for (t, &p) in q.iter().enumerate() {
                let v = weight * p * (1.0 - p);
                var.doc_topic[d * t0 + t] += v;
                var.word_topic[slot * t0 + t] += v;
            }
        }
    }

    fn finish(mut self) -> Self {
        self.mean.refresh_totals(self.topics);
        if let Some(var) = self.var.as_mut() {
            var.refresh_totals(self.topics);
        }
        self
    }

    /// Moments of a token-level posterior: `E[n_dt] = sum_i q_{d,i}(t)` and
    /// `V[n_dt] = sum_i q_{d,i}(t) (1 - q_{d,i}(t))`, likewise per word and
    /// per topic.
    pub fn from_token_posterior(corpus: &Corpus, q: &TokenPosterior, with_variances: bool) -> Result<Self, StatsError> {
        q.check_shape(corpus)?;
        let mut table = Self::empty(corpus, q.num_topics(), with_variances);
        for (d, doc) in corpus.documents().iter().enumerate() {
            for (i, &w) in doc.tokens().iter().enumerate() {
                let slot = table.word_slot[w];
                table.accumulate(d, slot, 1.0, q.get(d, i));
            }
        }
        Ok(table.finish())
    }

    /// Moments of a type-level posterior, each type weighted by `n_dv`.
    pub fn from_type_posterior(corpus: &Corpus, q: &TypePosterior, with_variances: bool) -> Result<Self, StatsError> {
        q.check_shape(corpus)?;
        let mut table = Self::empty(corpus, q.num_topics(), with_variances);
        for (d, doc) in corpus.documents().iter().enumerate() {
            for (k, &(w, n)) in doc.type_counts().iter().enumerate() {
                let slot = table.word_slot[w];
                table.accumulate(d, slot, n as f64, q.get(d, k));
            }
        }
        Ok(table.finish())
    }

    /// Integer Gibbs tallies viewed as (degenerate) moments; variances, when
    /// requested, are identically zero.
    pub fn from_assignment(corpus: &Corpus, state: &HardAssignment, with_variances: bool) -> Result<Self, StatsError> {
        if state.vocab_size() != corpus.vocab_size() {
            return Err(StatsError::DimensionMismatch(
                "assignment vocabulary differs from corpus".into(),
            ));
        }
        let mut table = Self::empty(corpus, state.num_topics(), with_variances);
        let t0 = table.topics;
        for d in 0..corpus.num_documents() {
            for (t, &n) in state.doc_topic(d).iter().enumerate() {
                table.mean.doc_topic[d * t0 + t] = f64::from(n);
            }
        }
        for (w, &slot) in table.word_slot.iter().enumerate() {
            if slot != UNOBSERVED {
                for (t, &n) in state.word_topic(w).iter().enumerate() {
                    table.mean.word_topic[slot * t0 + t] = f64::from(n);
                }
            }
        }
        Ok(table.finish())
    }

    pub fn num_topics(&self) -> usize {
        self.topics
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn num_documents(&self) -> usize {
        self.mean.doc_topic.len() / self.topics
    }

    pub fn has_variances(&self) -> bool {
        self.var.is_some()
    }

    pub fn doc_topic(&self, d: usize) -> &[f64] {
        &self.mean.doc_topic[d * self.topics..(d + 1) * self.topics]
    }

    /// `E[n_tv]` over topics for word `v`; `None` for words absent from the
    /// corpus the table was built on (their expectations are zero).
    pub fn word_topic(&self, v: usize) -> Option<&[f64]> {
        let slot = *self.word_slot.get(v)?;
        (slot != UNOBSERVED).then(|| &self.mean.word_topic[slot * self.topics..(slot + 1) * self.topics])
    }

    pub fn topic_total(&self) -> &[f64] {
        &self.mean.topic_total
    }

    pub fn doc_topic_var(&self, d: usize) -> Option<&[f64]> {
        self.var
            .as_ref()
            .map(|v| &v.doc_topic[d * self.topics..(d + 1) * self.topics])
    }

    pub fn word_topic_var(&self, v: usize) -> Option<&[f64]> {
        let slot = *self.word_slot.get(v)?;
        if slot == UNOBSERVED {
            return None;
        }
        self.var
            .as_ref()
            .map(|var| &var.word_topic[slot * self.topics..(slot + 1) * self.topics])
    }

    pub fn topic_total_var(&self) -> Option<&[f64]> {
        self.var.as_ref().map(|v| v.topic_total.as_slice())
    }

    fn slot_of(&self, w: usize) -> Result<usize, StatsError> {
        match self.word_slot.get(w) {
            Some(&s) if s != UNOBSERVED => Ok(s),
            _ => Err(StatsError::DimensionMismatch(format!(
                "word {w} has no statistics in this table"
            ))),
        }
    }

    fn exclude_into_scratch(&mut self, d: usize, slot: usize, weight: f64, q: &[f64]) -> Result<(), StatsError> {
        let t0 = self.topics;
        if q.len() != t0 {
            return Err(StatsError::DimensionMismatch(format!(
                "posterior has {} topics, table has {t0}",
                q.len()
            )));
        }
        let s = &mut self.scratch;
        resize(&mut s.doc_topic, t0);
        resize(&mut s.word_topic, t0);
        resize(&mut s.topic_total, t0);
        for (t, &p) in q.iter().enumerate() {
            let r = weight * p;
            s.doc_topic[t] = excluded(self.mean.doc_topic[d * t0 + t], r, "E[n_dt]", d * t0 + t)?;
            s.word_topic[t] = excluded(self.mean.word_topic[slot * t0 + t], r, "E[n_tv]", slot * t0 + t)?;
            s.topic_total[t] = excluded(self.mean.topic_total[t], r, "E[n_t]", t)?;
        }
        match self.var.as_ref() {
            Some(var) => {
                let sv = s.variances.get_or_insert_with(ExcludedVariances::default);
                resize(&mut sv.doc_topic, t0);
                resize(&mut sv.word_topic, t0);
                resize(&mut sv.topic_total, t0);
                for (t, &p) in q.iter().enumerate() {
                    let r = weight * p * (1.0 - p);
                    sv.doc_topic[t] = excluded(var.doc_topic[d * t0 + t], r, "V[n_dt]", d * t0 + t)?;
                    sv.word_topic[t] = excluded(var.word_topic[slot * t0 + t], r, "V[n_tv]", slot * t0 + t)?;
                    sv.topic_total[t] = excluded(var.topic_total[t], r, "V[n_t]", t)?;
                }
            }
            None => s.variances = None,
        }
        Ok(())
    }

    /// Opens the `\d,i` view for token `i` of document `d`, subtracting the
    /// token's stored posterior. The table itself is untouched until
    /// [`Exclusion::include`].
    pub fn exclude_token<'a>(
        &'a mut self,
        corpus: &Corpus,
        posterior: &'a mut TokenPosterior,
        d: usize,
        i: usize,
    ) -> Result<Exclusion<'a>, StatsError> {
        let w = corpus.document(d).tokens()[i];
        let slot = self.slot_of(w)?;
        let stored = posterior.get_mut(d, i);
        self.exclude_into_scratch(d, slot, 1.0, stored)?;
        Ok(Exclusion {
            table: self,
            stored,
            d,
            slot,
            weight: 1.0,
        })
    }

    /// Opens the `\d,v` view for the `k`-th word type of document `d`,
    /// subtracting `n_dv` copies of its posterior.
    pub fn exclude_type<'a>(
        &'a mut self,
        corpus: &Corpus,
        posterior: &'a mut TypePosterior,
        d: usize,
        k: usize,
    ) -> Result<Exclusion<'a>, StatsError> {
        let (w, n) = corpus.document(d).type_counts()[k];
        let slot = self.slot_of(w)?;
        let stored = posterior.get_mut(d, k);
        self.exclude_into_scratch(d, slot, n as f64, stored)?;
        Ok(Exclusion {
            table: self,
            stored,
            d,
            slot,
            weight: n as f64,
        })
    }

    /// Maximum violation of the conservation identities and entry bounds.
    pub fn verify_conservation(&self, corpus: &Corpus) -> ConservationReport {
        let t0 = self.topics;
        let doc_length = corpus
            .documents()
            .iter()
            .enumerate()
            .map(|(d, doc)| (self.doc_topic(d).iter().sum::<f64>() - doc.len() as f64).abs())
            .fold(0.0, f64::max);
        let mut per_topic = vec![0.0; t0];
        for row in self.mean.word_topic.chunks(t0) {
            for (acc, x) in per_topic.iter_mut().zip(row) {
                *acc += x;
            }
        }
        let topic_word = per_topic
            .iter()
            .zip(&self.mean.topic_total)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let total = (self.mean.topic_total.iter().sum::<f64>() - corpus.total_tokens() as f64).abs();
        let negative = self.mean.entries().map(|&x| (-x).max(0.0)).fold(0.0, f64::max);
        let variance_bound = self.var.as_ref().map_or(0.0, |var| {
            var.entries()
                .zip(self.mean.entries())
                .map(|(&v, &e)| (v - e).max(-v).max(0.0))
                .fold(0.0, f64::max)
        });
        ConservationReport {
            doc_length,
            topic_word,
            total,
            negative,
            variance_bound,
        }
    }

    /// Largest entrywise difference over all mean (and variance) tables.
    pub fn max_abs_diff(&self, other: &MomentTable) -> Result<f64, StatsError> {
        if self.topics != other.topics
            || self.word_slot != other.word_slot
            || self.mean.doc_topic.len() != other.mean.doc_topic.len()
        {
            return Err(StatsError::DimensionMismatch(
                "moment tables have different shapes".into(),
            ));
        }
        let mut diff = self.mean.max_abs_diff(&other.mean);
        match (&self.var, &other.var) {
            (Some(a), Some(b)) => diff = diff.max(a.max_abs_diff(b)),
            (None, None) => {}
            _ => return Err(StatsError::MissingVariances),
        }
        Ok(diff)
    }

    #[cfg(test)]
    pub(crate) fn doc_topic_mut(&mut self, d: usize) -> &mut [f64] {
        &mut self.mean.doc_topic[d * self.topics..(d + 1) * self.topics]
    }
}

/// An outstanding exclusion. Dropping it without calling
/// [`Exclusion::include`] leaves table and posterior unchanged.
#[must_use = "an exclusion does nothing until `include` is called"]
pub struct Exclusion<'a> {
    table: &'a mut MomentTable,
    stored: &'a mut [f64],
    d: usize,
    slot: usize,
    weight: f64,
}

impl Exclusion<'_> {
    /// Statistics with this token (or type) removed.
    pub fn view(&self) -> &ExcludedMoments {
        &self.table.scratch
    }

    /// The posterior currently stored for the excluded item.
    pub fn current(&self) -> &[f64] {
        self.stored
    }

    /// Adds `q_new` (times the multiplicity) back into the tables and stores
    /// it as the item's posterior.
    pub fn include(self, q_new: &[f64]) {
        let Exclusion {
            table,
            stored,
            d,
            slot,
            weight,
        } = self;
        let t0 = table.topics;
        assert_eq!(q_new.len(), t0, "posterior length must equal the number of topics");
        let s = &table.scratch;
        for (t, &p) in q_new.iter().enumerate() {
            let a = weight * p;
            table.mean.doc_topic[d * t0 + t] = s.doc_topic[t] + a;
            table.mean.word_topic[slot * t0 + t] = s.word_topic[t] + a;
            table.mean.topic_total[t] = s.topic_total[t] + a;
        }
        if let (Some(var), Some(sv)) = (table.var.as_mut(), s.variances.as_ref()) {
            for (t, &p) in q_new.iter().enumerate() {
                let a = weight * p * (1.0 - p);
                var.doc_topic[d * t0 + t] = sv.doc_topic[t] + a;
                var.word_topic[slot * t0 + t] = sv.word_topic[t] + a;
                var.topic_total[t] = sv.topic_total[t] + a;
            }
        }
        stored.copy_from_slice(q_new);
    }
}

/// Maximum absolute violations found by [`MomentTable::verify_conservation`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConservationReport {
    /// `max_d |sum_t E[n_dt] - n_d|`
    pub doc_length: f64,
    /// `max_t |sum_v E[n_tv] - E[n_t]|`
    pub topic_word: f64,
    /// `|sum_t E[n_t] - n|`
    pub total: f64,
    /// Most negative mean entry, as a positive magnitude.
    pub negative: f64,
    /// Largest breach of `0 <= Var <= E`.
    pub variance_bound: f64,
}

impl ConservationReport {
    pub fn max_violation(&self) -> f64 {
        self.doc_length
            .max(self.topic_word)
            .max(self.total)
            .max(self.negative)
            .max(self.variance_bound)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Document, Vocabulary};
    use crate::rng::stream_rng;

    fn two_token_corpus() -> Corpus {
        Corpus::new(vec![Document::from_tokens(vec![0, 1])], Vocabulary::synthetic(2)).unwrap()
    }

    fn half_posterior() -> TokenPosterior {
        TokenPosterior::from_vectors(vec![vec![vec![0.5, 0.5], vec![0.5, 0.5]]]).unwrap()
    }

    #[test]
    fn init_from_two_half_tokens() {
        let c = two_token_corpus();
        let m = MomentTable::from_token_posterior(&c, &half_posterior(), true).unwrap();
        assert_eq!(m.doc_topic(0), &[1.0, 1.0]);
        assert_eq!(m.doc_topic_var(0).unwrap(), &[0.5, 0.5]);
        assert_eq!(m.topic_total(), &[1.0, 1.0]);
    }

    #[test]
    fn degenerate_posterior_has_zero_variance() {
        let c = two_token_corpus();
        let q = TokenPosterior::from_vectors(vec![vec![vec![1.0, 0.0], vec![1.0, 0.0]]]).unwrap();
        let m = MomentTable::from_token_posterior(&c, &q, true).unwrap();
        assert!(m.doc_topic_var(0).unwrap().iter().all(|&v| v == 0.0));
        assert!(m.topic_total_var().unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn variance_flag_does_not_change_means() {
        let c = two_token_corpus();
        let mut rng = stream_rng(4, 0);
        let q = TokenPosterior::random(&c, 3, &mut rng);
        let a = MomentTable::from_token_posterior(&c, &q, true).unwrap();
        let b = MomentTable::from_token_posterior(&c, &q, false).unwrap();
        assert!(!b.has_variances());
        assert_eq!(a.mean, b.mean);
    }

    #[test]
    fn exclude_one_of_two_tokens() {
        let c = two_token_corpus();
        let mut q = half_posterior();
        let mut m = MomentTable::from_token_posterior(&c, &q, true).unwrap();
        let ex = m.exclude_token(&c, &mut q, 0, 0).unwrap();
        assert_eq!(ex.view().doc_topic, vec![0.5, 0.5]);
        assert_eq!(ex.view().variances.as_ref().unwrap().doc_topic, vec![0.25, 0.25]);
        drop(ex);
        // untouched until include
        assert_eq!(m.doc_topic(0), &[1.0, 1.0]);
    }

    #[test]
    fn exclude_include_round_trip_and_update() {
        let c = Corpus::new(
            vec![
                Document::from_tokens(vec![0, 1, 1, 2]),
                Document::from_tokens(vec![2, 0]),
            ],
            Vocabulary::synthetic(3),
        )
        .unwrap();
        let mut rng = stream_rng(5, 0);
        let mut q = TokenPosterior::random(&c, 3, &mut rng);
        let mut m = MomentTable::from_token_posterior(&c, &q, true).unwrap();
        let start = m.clone();

        let ex = m.exclude_token(&c, &mut q, 0, 2).unwrap();
        let same = ex.current().to_vec();
        ex.include(&same);
        assert!(m.max_abs_diff(&start).unwrap() < 1e-12);

        let old = q.get(0, 2).to_vec();
        let new = vec![0.2, 0.3, 0.5];
        let before = m.doc_topic(0).to_vec();
        m.exclude_token(&c, &mut q, 0, 2).unwrap().include(&new);
        for t in 0..3 {
            assert!((m.doc_topic(0)[t] - (before[t] - old[t] + new[t])).abs() < 1e-12);
        }
        assert_eq!(q.get(0, 2), &new[..]);
        let rebuilt = MomentTable::from_token_posterior(&c, &q, true).unwrap();
        assert!(m.max_abs_diff(&rebuilt).unwrap() < 1e-12);
    }

    #[test]
    fn type_exclusion_scales_by_multiplicity() {
        // one document: word 0 three times, word 1 twice
        let c = Corpus::new(
            vec![Document::from_tokens(vec![0, 0, 1, 0, 1])],
            Vocabulary::synthetic(2),
        )
        .unwrap();
        let mut rng = stream_rng(6, 0);
        let mut q = TypePosterior::random(&c, 2, &mut rng);
        q.get_mut(0, 0).copy_from_slice(&[0.4, 0.6]);
        q.get_mut(0, 1).copy_from_slice(&[1.0, 0.0]);
        let mut m = MomentTable::from_type_posterior(&c, &q, true).unwrap();
        assert!((m.doc_topic(0)[0] - 3.2).abs() < 1e-12);
        let start = m.clone();
        let ex = m.exclude_type(&c, &mut q, 0, 0).unwrap();
        // 3.2 - 3 * 0.4 = 2.0
        assert!((ex.view().doc_topic[0] - 2.0).abs() < 1e-12);
        assert!((ex.view().variances.as_ref().unwrap().doc_topic[0] - 0.0).abs() < 1e-12);
        let same = ex.current().to_vec();
        ex.include(&same);
        assert!(m.max_abs_diff(&start).unwrap() < 1e-12);
    }

    #[test]
    fn type_exclusion_with_unit_multiplicity_matches_token_exclusion() {
        let c = Corpus::new(vec![Document::from_tokens(vec![2, 0, 1])], Vocabulary::synthetic(3)).unwrap();
        let mut rng = stream_rng(7, 0);
        let mut qt = TypePosterior::random(&c, 3, &mut rng);
        let mut q = qt.to_token_posterior(&c);
        let mut mt = MomentTable::from_type_posterior(&c, &qt, true).unwrap();
        let mut m = MomentTable::from_token_posterior(&c, &q, true).unwrap();
        // token 1 is word 0, which is type 0
        let a = m.exclude_token(&c, &mut q, 0, 1).unwrap().view().clone();
        let b = mt.exclude_type(&c, &mut qt, 0, 0).unwrap().view().clone();
        let (va, vb) = (a.variances.unwrap(), b.variances.unwrap());
        let pairs = [
            (&a.doc_topic, &b.doc_topic),
            (&a.word_topic, &b.word_topic),
            (&a.topic_total, &b.topic_total),
            (&va.doc_topic, &vb.doc_topic),
            (&va.word_topic, &vb.word_topic),
            (&va.topic_total, &vb.topic_total),
        ];
        for (x, y) in pairs {
            assert!(x.iter().zip(y).all(|(p, q)| (p - q).abs() < 1e-12));
        }
    }

    #[test]
    fn desynchronization_is_an_error() {
        let c = two_token_corpus();
        let mut q = half_posterior();
        let mut m = MomentTable::from_token_posterior(&c, &q, false).unwrap();
        m.doc_topic_mut(0)[0] = 0.1;
        let err = m.exclude_token(&c, &mut q, 0, 0).err().unwrap();
        assert!(matches!(err, StatsError::Desynchronized { table: "E[n_dt]", .. }));
        // rounding noise is clamped
        m.doc_topic_mut(0)[0] = 0.5 - 1e-12;
        let ex = m.exclude_token(&c, &mut q, 0, 0).unwrap();
        assert_eq!(ex.view().doc_topic[0], 0.0);
    }

    #[test]
    fn conservation_report_detects_corruption() {
        let c = two_token_corpus();
        let m = MomentTable::from_token_posterior(&c, &half_posterior(), true).unwrap();
        let r = m.verify_conservation(&c);
        assert!(r.max_violation() < 1e-9 * c.total_tokens() as f64);
        let mut bad = m.clone();
        bad.doc_topic_mut(0)[1] += 0.25;
        assert!((bad.verify_conservation(&c).doc_length - 0.25).abs() < 1e-12);
    }

    #[test]
    fn gibbs_tallies_as_moments() {
        let c = two_token_corpus();
        let s = HardAssignment::from_assignments(&c, 2, vec![vec![1, 1]]).unwrap();
        let m = MomentTable::from_assignment(&c, &s, true).unwrap();
        assert_eq!(m.doc_topic(0), &[0.0, 2.0]);
        assert_eq!(m.word_topic(1).unwrap(), &[0.0, 1.0]);
        assert_eq!(m.topic_total(), &[0.0, 2.0]);
        assert!(m.verify_conservation(&c).max_violation() == 0.0);
    }
}
