use super::updates::{collapsed_weight, inverse_total, normalize, sample_categorical};
use crate::corpus::Corpus;
use crate::rng::Rng;
use crate::stats::{HardAssignment, Hyperparams};

fn gibbs_weights_into(state: &HardAssignment, d: usize, v: usize, h: &Hyperparams, out: &mut [f64]) {
    let (beta, v_beta) = (h.beta(), h.v_beta());
    let doc = state.doc_topic(d);
    let word = state.word_topic(v);
    let total = state.topic_total();
    for (t, o) in out.iter_mut().enumerate() {
        let c = inverse_total(f64::from(total[t]), v_beta);
        *o = collapsed_weight(f64::from(doc[t]), f64::from(word[t]), c, h.gamma()[t], beta);
    }
}

/// Collapsed conditional `p(z_{d,i} = t | rest)` for a token of word `v`
/// in document `d`. `state` must already exclude that token.
pub fn gibbs_conditional(state: &HardAssignment, d: usize, v: usize, h: &Hyperparams) -> Vec<f64> {
    let mut out = vec![0.0; state.num_topics()];
    gibbs_weights_into(state, d, v, h, &mut out);
    normalize(&mut out);
    out
}

/// One pass over every token in document order: remove, resample from the
/// collapsed conditional, reinsert.
pub fn gibbs_sweep(state: &mut HardAssignment, corpus: &Corpus, h: &Hyperparams, rng: &mut Rng) {
    let mut weights = vec![0.0; state.num_topics()];
    for (d, doc) in corpus.documents().iter().enumerate() {
        for (i, &w) in doc.tokens().iter().enumerate() {
            state.remove(d, i, w);
            gibbs_weights_into(state, d, w, h, &mut weights);
            let t = sample_categorical(&weights, rng);
            state.assign(d, i, w, t);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Document, Vocabulary};
    use crate::rng::stream_rng;

    #[test]
    fn empty_counts_follow_gamma() {
        let c = Corpus::new(vec![Document::from_tokens(vec![0])], Vocabulary::synthetic(3)).unwrap();
        let mut s = HardAssignment::from_assignments(&c, 3, vec![vec![2]]).unwrap();
        s.remove(0, 0, 0);
        let h = Hyperparams::new(vec![1.0, 2.0, 5.0], 0.01, 3).unwrap();
        let p = gibbs_conditional(&s, 0, 0, &h);
        for (pt, g) in p.iter().zip([1.0, 2.0, 5.0]) {
            assert!((pt - g / 8.0).abs() < 1e-12);
        }
    }

    #[test]
    fn worked_two_topic_example() {
        // after exclusion: n_dt = (2, 0), n_tv = (3, 1), n_t = (10, 5)
        let corpus = Corpus::new(
            vec![
                Document::from_tokens(vec![1, 1, 0]),
                Document::from_tokens(vec![0, 0, 0, 2, 2, 2, 2, 2, 0, 2, 2, 2, 2]),
            ],
            Vocabulary::synthetic(5),
        )
        .unwrap();
        let z = vec![vec![0, 0, 0], vec![0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1]];
        let mut s = HardAssignment::from_assignments(&corpus, 2, z).unwrap();
        s.remove(0, 2, 0);
        assert_eq!(s.doc_topic(0), &[2, 0]);
        assert_eq!(s.word_topic(0), &[3, 1]);
        assert_eq!(s.topic_total(), &[10, 5]);
        let h = Hyperparams::symmetric(2, 0.5, 0.1, 5).unwrap();
        let p = gibbs_conditional(&s, 0, 0, &h);
        let w = [2.5 * 3.1 / 10.5, 0.5 * 1.1 / 5.5];
        assert!((p[0] - w[0] / (w[0] + w[1])).abs() < 1e-12);
        assert!((p[0] - 0.88068).abs() < 1e-5);
        assert!((p[1] - 0.11932).abs() < 1e-5);
    }

    #[test]
    fn single_topic_sweep_is_a_no_op() {
        let c = Corpus::new(vec![Document::from_tokens(vec![0, 1, 2, 1])], Vocabulary::synthetic(3)).unwrap();
        let mut rng = stream_rng(1, 0);
        let mut s = HardAssignment::random(&c, 1, &mut rng);
        let before = s.clone();
        let h = Hyperparams::symmetric(1, 0.5, 0.1, 3).unwrap();
        gibbs_sweep(&mut s, &c, &h, &mut rng);
        assert_eq!(s, before);
    }

    #[test]
    fn sweep_preserves_tallies() {
        let c = Corpus::new(
            vec![
                Document::from_tokens(vec![0, 1, 2, 1, 3]),
                Document::from_tokens(vec![3, 3, 0]),
            ],
            Vocabulary::synthetic(4),
        )
        .unwrap();
        let mut rng = stream_rng(2, 0);
        let mut s = HardAssignment::random(&c, 3, &mut rng);
        let h = Hyperparams::symmetric(3, 0.5, 0.1, 4).unwrap();
        for _ in 0..20 {
            gibbs_sweep(&mut s, &c, &h, &mut rng);
            assert!(s.tallies_consistent(&c));
            for d in 0..2 {
                assert_eq!(s.doc_topic(d).iter().sum::<u32>() as usize, c.document(d).len());
            }
        }
    }
}
