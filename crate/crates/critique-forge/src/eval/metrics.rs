//! Pure metric functions: unbiased pass@k, Rouge-L, word overlap ratio, and
//! the shared tokenizer.

use std::collections::BTreeSet;

use super::MetricError;

/// Unbiased pass@k estimator in stable product form:
/// `1 - prod_{i=n-c+1..=n} (1 - k/i)`, which equals `1 - C(n-c,k)/C(n,k)`
/// without forming binomials. Exactly 1 when `n - c < k`.
pub fn pass_at_k(n: u64, c: u64, k: u64) -> Result<f64, MetricError> {
    if k == 0 || k > n {
        return Err(MetricError::Domain(format!(
            "pass@k requires 1 <= k <= n, got k={k}, n={n}"
        )));
    }
    if c > n {
        return Err(MetricError::Domain(format!(
            "pass@k requires c <= n, got c={c}, n={n}"
        )));
    }
    if n - c < k {
        return Ok(1.0);
    }
    let product: f64 = ((n - c + 1)..=n)
        .map(|i| 1.0 - k as f64 / i as f64)
        .product();
    Ok(1.0 - product)
}

/// Shared tokenizer for the text metrics: Unicode lowercase, split on
/// maximal runs of non-alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|part| !part.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// F-measure weight for Rouge-L.
pub const ROUGE_BETA: f64 = 1.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
}

/// Rouge-L over token sequences: precision and recall from the LCS length,
/// combined with a beta-weighted F-measure (`f = p = r` whenever `p = r`).
pub fn rouge_l<T: Eq>(candidate: &[T], reference: &[T]) -> RougeScore {
    let lcs = lcs_length(candidate, reference) as f64;
    let precision = if candidate.is_empty() {
        0.0
    } else {
        lcs / candidate.len() as f64
    };
    let recall = if reference.is_empty() {
        0.0
    } else {
        lcs / reference.len() as f64
    };
    let beta_sq = ROUGE_BETA * ROUGE_BETA;
    let f = if precision + recall == 0.0 {
        0.0
    } else {
        (1.0 + beta_sq) * precision * recall / (recall + beta_sq * precision)
    };
    RougeScore {
        precision,
        recall,
        f,
    }
}

/// LCS length via the rolling two-row dynamic program.
fn lcs_length<T: Eq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut curr = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            curr[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(curr[j])
            };
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// Fraction of the generated text's unique tokens that also occur anywhere
/// in the pooled user queries. Order-invariant by construction.
pub fn word_overlap_ratio(generated: &str, user_queries: &[String]) -> Result<f64, MetricError> {
    let generated_vocab: BTreeSet<String> = tokenize(generated).into_iter().collect();
    if generated_vocab.is_empty() {
        return Err(MetricError::Domain(
            "word overlap ratio requires generated text with at least one token".into(),
        ));
    }
    let query_vocab: BTreeSet<String> = user_queries
        .iter()
        .flat_map(|q| tokenize(q))
        .collect();
    let shared = generated_vocab.intersection(&query_vocab).count();
    Ok(shared as f64 / generated_vocab.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pass_at_k_trivial_endpoints() {
        assert_eq!(pass_at_k(4, 0, 1).unwrap(), 0.0);
        assert_eq!(pass_at_k(4, 4, 1).unwrap(), 1.0);
    }

    #[test]
    fn pass_at_k_half_correct_single_draw() {
        // Oracle: of the four 1-subsets of 4 samples, 2 contain a success.
        assert!((pass_at_k(4, 2, 1).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn pass_at_k_domain_errors() {
        assert!(pass_at_k(4, 2, 0).is_err());
        assert!(pass_at_k(4, 2, 5).is_err());
        assert!(pass_at_k(4, 5, 1).is_err());
    }

    #[test]
    fn pass_at_k_exhausts_to_one() {
        // n - c < k forces at least one success into every subset.
        assert_eq!(pass_at_k(5, 4, 3).unwrap(), 1.0);
        assert_eq!(pass_at_k(4, 4, 4).unwrap(), 1.0);
    }

    /// Independent oracle: enumerate all C(n,k) index subsets and count
    /// those containing at least one of the first `c` (successful) samples.
    fn brute_force_pass_at_k(n: u64, c: u64, k: u64) -> f64 {
        use itertools::Itertools;
        let subsets = (0..n).combinations(k as usize);
        let (mut hits, mut total) = (0u64, 0u64);
        for subset in subsets {
            total += 1;
            if subset.iter().any(|&i| i < c) {
                hits += 1;
            }
        }
        hits as f64 / total as f64
    }

    #[test]
    fn pass_at_k_matches_exhaustive_enumeration() {
        for n in 1..=6u64 {
            for c in 0..=n {
                for k in 1..=n {
                    let estimate = pass_at_k(n, c, k).unwrap();
                    let oracle = brute_force_pass_at_k(n, c, k);
                    assert!(
                        (estimate - oracle).abs() < 1e-12,
                        "n={n} c={c} k={k}: {estimate} vs {oracle}"
                    );
                }
            }
        }
    }

    proptest! {
        #[test]
        fn pass_at_k_monotone_in_c_and_k(n in 1u64..=12) {
            for k in 1..=n {
                let mut last = 0.0;
                for c in 0..=n {
                    let v = pass_at_k(n, c, k).unwrap();
                    prop_assert!(v + 1e-15 >= last, "not monotone in c");
                    last = v;
                }
            }
            for c in 0..=n {
                let mut last = 0.0;
                for k in 1..=n {
                    let v = pass_at_k(n, c, k).unwrap();
                    prop_assert!(v + 1e-15 >= last, "not monotone in k");
                    last = v;
                }
            }
        }
    }

    #[test]
    fn tokenizer_lowercases_and_splits_on_non_alphanumerics() {
        assert_eq!(
            tokenize("Hello, World!  x2 -- done"),
            vec!["hello", "world", "x2", "done"]
        );
        assert_eq!(tokenize("Éclair über"), vec!["éclair", "über"]);
        assert!(tokenize("--- !!").is_empty());
    }

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn rouge_identical_sequences_score_one() {
        let s = toks(&["a", "b", "c"]);
        let score = rouge_l(&s, &s);
        assert_eq!((score.precision, score.recall, score.f), (1.0, 1.0, 1.0));
    }

    #[test]
    fn rouge_disjoint_sequences_score_zero() {
        let score = rouge_l(&toks(&["a", "b"]), &toks(&["x", "y"]));
        assert_eq!(score.f, 0.0);
    }

    #[test]
    fn rouge_partial_overlap_example() {
        // LCS("the cat sat", "the cat ran") = 2, so P = R = 2/3, and with
        // P = R the F-measure collapses to the same value.
        let score = rouge_l(&toks(&["the", "cat", "sat"]), &toks(&["the", "cat", "ran"]));
        assert!((score.precision - 2.0 / 3.0).abs() < 1e-12);
        assert!((score.recall - 2.0 / 3.0).abs() < 1e-12);
        assert!((score.f - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn rouge_empty_sides() {
        let empty: Vec<String> = vec![];
        let s = toks(&["a"]);
        assert_eq!(rouge_l(&empty, &s).f, 0.0);
        assert_eq!(rouge_l(&s, &empty).f, 0.0);
        assert_eq!(rouge_l(&empty, &empty).f, 0.0);
    }

    /// Independent oracle: memoized recursive LCS, a different route from
    /// the iterative two-row table in the implementation.
    fn lcs_recursive<T: Eq>(a: &[T], b: &[T]) -> usize {
        fn go<T: Eq>(
            a: &[T],
            b: &[T],
            i: usize,
            j: usize,
            memo: &mut Vec<Vec<Option<usize>>>,
        ) -> usize {
            if i == a.len() || j == b.len() {
                return 0;
            }
            if let Some(v) = memo[i][j] {
                return v;
            }
            let v = if a[i] == b[j] {
                1 + go(a, b, i + 1, j + 1, memo)
            } else {
                go(a, b, i + 1, j, memo).max(go(a, b, i, j + 1, memo))
            };
            memo[i][j] = Some(v);
            v
        }
        let mut memo = vec![vec![None; b.len()]; a.len()];
        go(a, b, 0, 0, &mut memo)
    }

    #[test]
    fn rouge_matches_recursive_lcs_oracle_on_random_pairs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let len_a = rng.gen_range(0..=20);
            let len_b = rng.gen_range(0..=20);
            let a: Vec<u8> = (0..len_a).map(|_| rng.gen_range(0..10)).collect();
            let b: Vec<u8> = (0..len_b).map(|_| rng.gen_range(0..10)).collect();
            let lcs = lcs_recursive(&a, &b) as f64;
            let score = rouge_l(&a, &b);
            let p = if a.is_empty() { 0.0 } else { lcs / a.len() as f64 };
            let r = if b.is_empty() { 0.0 } else { lcs / b.len() as f64 };
            let beta_sq = ROUGE_BETA * ROUGE_BETA;
            let f = if p + r == 0.0 {
                0.0
            } else {
                (1.0 + beta_sq) * p * r / (r + beta_sq * p)
            };
            assert!((score.precision - p).abs() < 1e-12);
            assert!((score.recall - r).abs() < 1e-12);
            assert!((score.f - f).abs() < 1e-12);
        }
    }

    #[test]
    fn word_overlap_examples() {
        // Full containment.
        assert_eq!(
            word_overlap_ratio("alpha beta", &["beta gamma alpha delta".into()]).unwrap(),
            1.0
        );
        // Disjoint vocabularies.
        assert_eq!(
            word_overlap_ratio("alpha beta", &["gamma delta".into()]).unwrap(),
            0.0
        );
        // {a,b,c,d} vs {a,c,x} -> 2/4.
        assert_eq!(
            word_overlap_ratio("a b c d", &["a c x".into()]).unwrap(),
            0.5
        );
    }

    #[test]
    fn word_overlap_rejects_empty_generated_vocab() {
        assert!(word_overlap_ratio("?!", &["a".into()]).is_err());
    }

    proptest! {
        #[test]
        fn word_overlap_is_order_invariant(
            mut words in prop::collection::vec("[a-f]{1,3}", 1..12),
            queries in prop::collection::vec("[a-h ]{0,20}", 0..4),
        ) {
            let forward = word_overlap_ratio(&words.join(" "), &queries).unwrap();
            words.reverse();
            let backward = word_overlap_ratio(&words.join(" "), &queries).unwrap();
            prop_assert_eq!(forward, backward);
        }
    }
}
