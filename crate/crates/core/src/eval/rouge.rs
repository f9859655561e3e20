use std::collections::HashMap;
use std::hash::Hash;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl RougeScore {
    pub fn from_counts(overlap: usize, candidate: usize, reference: usize) -> Self {
        let ratio = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
        let precision = ratio(overlap, candidate);
        let recall = ratio(overlap, reference);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        RougeScore { precision, recall, f1 }
    }
}

fn ngram_counts<T: Eq + Hash>(tokens: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped n-gram overlap. Panics if `n == 0`.
pub fn rouge_n<T: Eq + Hash>(candidate: &[T], reference: &[T], n: usize) -> RougeScore {
    assert!(n >= 1, "ROUGE-N needs n >= 1");
    let cand = ngram_counts(candidate, n);
    let refs = ngram_counts(reference, n);
    let overlap = cand
        .iter()
        .map(|(g, &c)| c.min(refs.get(g).copied().unwrap_or(0)))
        .sum();
    RougeScore::from_counts(overlap, cand.values().sum(), refs.values().sum())
}

pub fn lcs_len<T: Eq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn rouge_l<T: Eq>(candidate: &[T], reference: &[T]) -> RougeScore {
    RougeScore::from_counts(lcs_len(candidate, reference), candidate.len(), reference.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_cases() {
        let s = rouge_n(&["a", "b", "c"], &["a", "b", "c"], 1);
        assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));
        let s = rouge_n(&["a", "b", "c"], &["a", "b", "d"], 1);
        assert_eq!((s.precision, s.recall, s.f1), (2.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0));
        assert_eq!(rouge_n(&["a", "b"], &["c", "d"], 1), RougeScore::default());
        let s = rouge_n(&["a", "b", "c"], &["a", "b", "d"], 2);
        assert_eq!((s.precision, s.recall), (0.5, 0.5));
        // Clipping: the candidate repeats a unigram the reference holds once.
        let s = rouge_n(&["a", "a", "a"], &["a", "b"], 1);
        assert_eq!((s.precision, s.recall), (1.0 / 3.0, 0.5));
    }

    #[test]
    fn lcs_cases() {
        let s = rouge_l(&["a", "b", "c", "d"], &["a", "c", "b", "d"]);
        assert_eq!((s.precision, s.recall, s.f1), (0.75, 0.75, 0.75));
        assert_eq!(rouge_l(&["x", "a", "y", "b"], &["a", "b"]).recall, 1.0);
        assert_eq!(rouge_l::<&str>(&[], &["a"]), RougeScore::default());
        assert_eq!(rouge_l::<&str>(&["a"], &[]), RougeScore::default());
    }

    proptest! {
        #[test]
        fn scores_are_bounded(a in proptest::collection::vec(0u8..5, 0..12), b in proptest::collection::vec(0u8..5, 0..12), n in 1usize..4) {
            for s in [rouge_n(&a, &b, n), rouge_l(&a, &b)] {
                prop_assert!((0.0..=1.0).contains(&s.precision));
                prop_assert!((0.0..=1.0).contains(&s.recall));
                prop_assert!(s.f1 <= s.precision.max(s.recall) + 1e-12);
            }
        }

        #[test]
        fn swapping_exchanges_precision_and_recall(a in proptest::collection::vec(0u8..4, 0..10), b in proptest::collection::vec(0u8..4, 0..10), n in 1usize..3) {
            let x = rouge_n(&a, &b, n);
            let y = rouge_n(&b, &a, n);
            prop_assert_eq!(x.precision, y.recall);
            prop_assert_eq!(x.recall, y.precision);
            prop_assert!((x.f1 - y.f1).abs() < 1e-12);
        }

        #[test]
        fn invariant_under_token_relabeling(a in proptest::collection::vec(0u8..6, 0..10), b in proptest::collection::vec(0u8..6, 0..10), shift in 1u8..6) {
            let relabel = |v: &[u8]| v.iter().map(|t| (t + shift) % 6).collect::<Vec<_>>();
            let (ra, rb) = (relabel(&a), relabel(&b));
            prop_assert_eq!(rouge_n(&a, &b, 1), rouge_n(&ra, &rb, 1));
            prop_assert_eq!(rouge_n(&a, &b, 2), rouge_n(&ra, &rb, 2));
            prop_assert_eq!(rouge_l(&a, &b), rouge_l(&ra, &rb));
        }
    }
}
