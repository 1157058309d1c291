//! Sentence-level BLEU-4 over whitespace tokens.

use std::collections::HashMap;

/// Stand-in precision for n-gram orders with no clipped match.
pub const SMOOTHING_EPSILON: f64 = 1e-9;
pub const MAX_ORDER: usize = 4;

pub fn tokenize(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}

fn ngram_counts<'a, 'b>(tokens: &'b [&'a str], n: usize) -> HashMap<&'b [&'a str], usize> {
    let mut counts = HashMap::new();
    for w in tokens.windows(n) {
        *counts.entry(w).or_insert(0) += 1;
    }
    counts
}

/// Clipped n-gram precision as (matches, candidate n-grams).
pub fn modified_precision(candidate: &[&str], reference: &[&str], n: usize) -> (usize, usize) {
    let cand = ngram_counts(candidate, n);
    let refc = ngram_counts(reference, n);
    let matches = cand.iter().map(|(g, &c)| c.min(refc.get(g).copied().unwrap_or(0))).sum();
    (matches, candidate.len().saturating_sub(n - 1))
}

/// BLEU of `candidate` against one `reference`. Orders above the shorter
/// sequence's length are left out and the remaining orders weighted
/// uniformly, so any non-empty sequence scores 1 against itself.
pub fn bleu(candidate: &[&str], reference: &[&str]) -> f64 {
    let (c, r) = (candidate.len(), reference.len());
    if c == 0 || r == 0 {
        return 0.0;
    }
    let orders = MAX_ORDER.min(c).min(r);
    let log_sum: f64 = (1..=orders)
        .map(|n| {
            let (m, total) = modified_precision(candidate, reference, n);
            let p = if m == 0 { SMOOTHING_EPSILON } else { m as f64 / total as f64 };
            p.ln()
        })
        .sum();
    let bp = if c < r { (1.0 - r as f64 / c as f64).exp() } else { 1.0 };
    bp * (log_sum / orders as f64).exp()
}

/// BLEU over whitespace-split program outputs.
pub fn bleu_text(candidate: &str, reference: &str) -> f64 {
    bleu(&tokenize(candidate), &tokenize(reference))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity() {
        assert_eq!(bleu_text("1 2 3 4 5 6", "1 2 3 4 5 6"), 1.0);
        assert_eq!(bleu_text("7", "7"), 1.0);
    }

    #[test]
    fn brevity_only() {
        assert!((bleu_text("a b c d", "a b c d e") - (-0.25f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn empty_candidate() {
        assert_eq!(bleu_text("", "a b"), 0.0);
        assert_eq!(bleu_text("  \n", "a b"), 0.0);
    }

    #[test]
    fn clipping() {
        assert_eq!(modified_precision(&["a", "a", "a"], &["a", "b"], 1), (1, 3));
    }

    #[test]
    fn not_symmetric() {
        let (x, y) = ("a b c d e f", "a b c d");
        assert_ne!(bleu_text(x, y), bleu_text(y, x));
    }
}
