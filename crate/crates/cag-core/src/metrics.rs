//! Summarization quality metrics: ROUGE-N, ROUGE-L, ROUGE-S, and
//! compression ratio.
//!
//! Tokenization is shared by all variants: lowercase, then split on maximal
//! runs of non-alphanumeric characters. Overlaps are clipped multiset
//! counts (each reference occurrence matches at most one candidate
//! occurrence), precision divides by the candidate count, recall by the
//! reference count, and a zero denominator yields a zero score rather than
//! an error.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("invalid argument: {0}")]
    InvalidArg(String),
}

/// Precision / recall / F1 triple. All in [0, 1]; `f1` is 0 when both
/// inputs are empty of matches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl RougeScore {
    pub const ZERO: RougeScore = RougeScore {
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
    };

    fn from_counts(overlap: u64, candidate_total: u64, reference_total: u64) -> Self {
        let precision = if candidate_total == 0 {
            0.0
        } else {
            overlap as f64 / candidate_total as f64
        };
        let recall = if reference_total == 0 {
            0.0
        } else {
            overlap as f64 / reference_total as f64
        };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            precision,
            recall,
            f1,
        }
    }
}

/// The score bundle a benchmark record carries: one ROUGE-N order plus L
/// and S.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RougeScores {
    /// Which n the `rouge_n` field was computed with.
    pub n: usize,
    pub rouge_n: RougeScore,
    pub rouge_l: RougeScore,
    pub rouge_s: RougeScore,
}

impl RougeScores {
    pub const fn zero(n: usize) -> Self {
        Self {
            n,
            rouge_n: RougeScore::ZERO,
            rouge_l: RougeScore::ZERO,
            rouge_s: RougeScore::ZERO,
        }
    }
}

/// Lowercase and split on non-alphanumeric runs. `"The cat-sat!!"` →
/// `["the", "cat", "sat"]`.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

/// Intern both token streams into ids so n-gram and pair maps hash integers
/// instead of strings.
fn intern(candidate: &str, reference: &str) -> (Vec<u32>, Vec<u32>) {
    let mut ids: HashMap<String, u32> = HashMap::new();
    let mut assign = |tokens: Vec<String>| -> Vec<u32> {
        tokens
            .into_iter()
            .map(|t| {
                let next = ids.len() as u32;
                *ids.entry(t).or_insert(next)
            })
            .collect()
    };
    let c = assign(tokenize(candidate));
    let r = assign(tokenize(reference));
    (c, r)
}

fn ngram_counts(seq: &[u32], n: usize) -> HashMap<&[u32], u64> {
    let mut counts: HashMap<&[u32], u64> = HashMap::new();
    if seq.len() >= n {
        for gram in seq.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

fn clipped_overlap<K: std::hash::Hash + Eq>(a: &HashMap<K, u64>, b: &HashMap<K, u64>) -> u64 {
    a.iter()
        .map(|(k, &count)| count.min(b.get(k).copied().unwrap_or(0)))
        .sum()
}

/// ROUGE-N: clipped n-gram overlap. `n` must be at least 1.
pub fn rouge_n(candidate: &str, reference: &str, n: usize) -> Result<RougeScore, MetricsError> {
    if n == 0 {
        return Err(MetricsError::InvalidArg("rouge_n requires n >= 1".into()));
    }
    let (c, r) = intern(candidate, reference);
    let c_grams = ngram_counts(&c, n);
    let r_grams = ngram_counts(&r, n);
    let overlap = clipped_overlap(&c_grams, &r_grams);
    let c_total = c.len().saturating_sub(n - 1) as u64;
    let r_total = r.len().saturating_sub(n - 1) as u64;
    Ok(RougeScore::from_counts(overlap, c_total, r_total))
}

/// ROUGE-L: longest common subsequence of the token streams.
pub fn rouge_l(candidate: &str, reference: &str) -> RougeScore {
    let (c, r) = intern(candidate, reference);
    let lcs = lcs_length(&c, &r);
    RougeScore::from_counts(lcs, c.len() as u64, r.len() as u64)
}

/// Two-row LCS table; O(|a|·|b|) time, O(min) memory would also work but
/// the benchmark texts are modest.
fn lcs_length(a: &[u32], b: &[u32]) -> u64 {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0u32; b.len() + 1];
    let mut curr = vec![0u32; b.len() + 1];
    for &x in a {
        for (j, &y) in b.iter().enumerate() {
            curr[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(curr[j])
            };
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()] as u64
}

/// ROUGE-S: skip-bigrams with unlimited gap, clipped multiset overlap,
/// denominators C(len, 2).
///
/// Pair counting is restricted to tokens appearing in both texts (pairs
/// outside the shared vocabulary can't overlap), which keeps the pair maps
/// proportional to the shared content rather than all C(n, 2) pairs.
pub fn rouge_s(candidate: &str, reference: &str) -> RougeScore {
    let (c, r) = intern(candidate, reference);
    let c_vocab: std::collections::HashSet<u32> = c.iter().copied().collect();
    let shared: std::collections::HashSet<u32> =
        r.iter().copied().filter(|t| c_vocab.contains(t)).collect();
    let c_shared: Vec<u32> = c.iter().copied().filter(|t| shared.contains(t)).collect();
    let r_shared: Vec<u32> = r.iter().copied().filter(|t| shared.contains(t)).collect();
    let overlap = clipped_overlap(
        &skip_bigram_counts(&c_shared),
        &skip_bigram_counts(&r_shared),
    );
    let pairs = |len: usize| (len * len.saturating_sub(1) / 2) as u64;
    RougeScore::from_counts(overlap, pairs(c.len()), pairs(r.len()))
}

fn skip_bigram_counts(seq: &[u32]) -> HashMap<(u32, u32), u64> {
    let mut pairs: HashMap<(u32, u32), u64> = HashMap::new();
    let mut seen: HashMap<u32, u64> = HashMap::new();
    for &b in seq {
        for (&a, &count) in seen.iter() {
            *pairs.entry((a, b)).or_insert(0) += count;
        }
        *seen.entry(b).or_insert(0) += 1;
    }
    pairs
}

/// Convenience bundle: ROUGE-N at order `n`, plus L and S.
pub fn rouge_all(candidate: &str, reference: &str, n: usize) -> Result<RougeScores, MetricsError> {
    Ok(RougeScores {
        n,
        rouge_n: rouge_n(candidate, reference, n)?,
        rouge_l: rouge_l(candidate, reference),
        rouge_s: rouge_s(candidate, reference),
    })
}

/// 1 − output/original, in characters. Positive when the output is smaller.
/// `original_chars` must be non-zero.
pub fn compression_ratio(original_chars: usize, output_chars: usize) -> Result<f64, MetricsError> {
    if original_chars == 0 {
        return Err(MetricsError::InvalidArg(
            "compression ratio per an empty original is undefined".into(),
        ));
    }
    Ok(1.0 - output_chars as f64 / original_chars as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_lowercases_and_strips_punctuation() {
        assert_eq!(tokenize("The cat-sat!!"), ["the", "cat", "sat"]);
        assert_eq!(tokenize("  a  b  "), ["a", "b"]);
        assert_eq!(tokenize("don't"), ["don", "t"]);
        assert_eq!(tokenize("número 42"), ["número", "42"]);
        assert!(tokenize("!!! ---").is_empty());
        assert!(tokenize("").is_empty());
    }

    #[test]
    fn rouge_1_fixture() {
        let s = rouge_n("the cat sat", "the cat ran", 1).unwrap();
        let expected = 2.0 / 3.0;
        assert!((s.precision - expected).abs() < 1e-12);
        assert!((s.recall - expected).abs() < 1e-12);
        assert!((s.f1 - expected).abs() < 1e-12);
    }

    #[test]
    fn rouge_2_fixture() {
        let s = rouge_n("the cat sat", "the cat ran", 2).unwrap();
        assert!((s.f1 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rouge_l_fixture() {
        let s = rouge_l("the cat sat", "the cat ran");
        assert!((s.f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn rouge_s_fixture() {
        // Candidate pairs {ab, ac, bc}, reference pairs {ac, ab, cb}: two match.
        let s = rouge_s("a b c", "a c b");
        assert!((s.f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn identical_texts_score_one() {
        let text = "one two three four";
        assert_eq!(rouge_n(text, text, 1).unwrap().f1, 1.0);
        assert_eq!(rouge_n(text, text, 2).unwrap().f1, 1.0);
        assert_eq!(rouge_l(text, text).f1, 1.0);
        assert_eq!(rouge_s(text, text).f1, 1.0);
    }

    #[test]
    fn disjoint_texts_score_zero() {
        assert_eq!(rouge_n("a b", "c d", 1).unwrap(), RougeScore::ZERO);
        assert_eq!(rouge_l("a b", "c d"), RougeScore::ZERO);
        assert_eq!(rouge_s("a b", "c d"), RougeScore::ZERO);
    }

    #[test]
    fn empty_inputs_score_zero_not_nan() {
        for (c, r) in [("", ""), ("a b", ""), ("", "a b")] {
            let s = rouge_n(c, r, 1).unwrap();
            assert_eq!(s, RougeScore::ZERO);
            assert_eq!(rouge_l(c, r), RougeScore::ZERO);
            assert_eq!(rouge_s(c, r), RougeScore::ZERO);
        }
        // n larger than both texts: 0, not NaN.
        assert_eq!(rouge_n("a b", "a b", 5).unwrap(), RougeScore::ZERO);
    }

    #[test]
    fn overlap_counts_are_clipped() {
        // "a" appears 3x in candidate, once in reference: one match only.
        let s = rouge_n("a a a", "a b c", 1).unwrap();
        assert!((s.precision - 1.0 / 3.0).abs() < 1e-12);
        assert!((s.recall - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn swapping_roles_swaps_precision_and_recall() {
        let a = "the quick brown fox jumps";
        let b = "the brown fox sleeps";
        for n in [1, 2] {
            let ab = rouge_n(a, b, n).unwrap();
            let ba = rouge_n(b, a, n).unwrap();
            assert_eq!(ab.precision, ba.recall);
            assert_eq!(ab.recall, ba.precision);
            assert_eq!(ab.f1, ba.f1);
        }
        let (ab, ba) = (rouge_l(a, b), rouge_l(b, a));
        assert_eq!((ab.precision, ab.recall, ab.f1), (ba.recall, ba.precision, ba.f1));
        let (ab, ba) = (rouge_s(a, b), rouge_s(b, a));
        assert_eq!((ab.precision, ab.recall, ab.f1), (ba.recall, ba.precision, ba.f1));
    }

    #[test]
    fn rouge_n_rejects_zero_order() {
        assert!(rouge_n("a", "a", 0).is_err());
    }

    #[test]
    fn compression_ratio_examples() {
        // The motivating run: 813,380 chars in, 55,590 out.
        let r = compression_ratio(813_380, 55_590).unwrap();
        assert!((r - 0.9317).abs() < 1e-4);
        assert_eq!(compression_ratio(100, 100).unwrap(), 0.0);
        assert_eq!(compression_ratio(100, 0).unwrap(), 1.0);
        // Expansion goes negative rather than clamping.
        assert!(compression_ratio(100, 150).unwrap() < 0.0);
        assert!(compression_ratio(0, 10).is_err());
    }

    #[test]
    fn skip_bigrams_count_all_ordered_pairs() {
        // "a b a": pairs (a,b), (a,a), (b,a) — one each.
        let (c, _) = intern("a b a", "a b a");
        let counts = skip_bigram_counts(&c);
        assert_eq!(counts.len(), 3);
        assert!(counts.values().all(|&v| v == 1));
    }
}
