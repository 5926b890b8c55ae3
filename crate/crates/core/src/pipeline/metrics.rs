use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::sexpr::LogicalForm;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct F1 {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Logical-form exact match on canonical prints.
pub fn exact_match(pred: Option<&LogicalForm>, gold: &LogicalForm) -> bool {
    pred.is_some_and(|p| p.print_canonical() == gold.print_canonical())
}

/// Answer-set precision, recall and F1. Both sets empty scores 1; exactly
/// one empty scores 0.
pub fn answer_f1(pred: &BTreeSet<String>, gold: &BTreeSet<String>) -> F1 {
    match (pred.is_empty(), gold.is_empty()) {
        (true, true) => return F1 { precision: 1.0, recall: 1.0, f1: 1.0 },
        (true, false) | (false, true) => return F1 { precision: 0.0, recall: 0.0, f1: 0.0 },
        _ => {}
    }
    let hit = pred.intersection(gold).count() as f64;
    let precision = hit / pred.len() as f64;
    let recall = hit / gold.len() as f64;
    let f1 = if hit == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    F1 { precision, recall, f1 }
}

/// Mean over `trials` of whether one uniformly drawn predicted answer is in
/// `gold`.
pub fn hits_at_1(pred: &BTreeSet<String>, gold: &BTreeSet<String>, trials: usize, seed: u64) -> f64 {
    if pred.is_empty() || trials == 0 {
        return 0.0;
    }
    let pool: Vec<&String> = pred.iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hits = (0..trials).filter(|_| gold.contains(*pool.choose(&mut rng).expect("non-empty"))).count();
    hits as f64 / trials as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sexpr::parse;

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn f1_cases() {
        assert_eq!(answer_f1(&set(&["a"]), &set(&["a"])), F1 { precision: 1.0, recall: 1.0, f1: 1.0 });
        assert_eq!(answer_f1(&set(&["a", "b"]), &set(&["b", "c"])), F1 { precision: 0.5, recall: 0.5, f1: 0.5 });
        assert_eq!(answer_f1(&set(&[]), &set(&["a"])).f1, 0.0);
        assert_eq!(answer_f1(&set(&["a"]), &set(&[])).f1, 0.0);
        assert_eq!(answer_f1(&set(&[]), &set(&[])).f1, 1.0);
        assert_eq!(answer_f1(&set(&["a"]), &set(&["b"])).f1, 0.0);
    }

    #[test]
    fn em_is_order_insensitive_for_and() {
        let a = parse("(AND sf.engine (JOIN sf.oxidizer ox1))").unwrap();
        let b = parse("(AND (JOIN sf.oxidizer ox1) sf.engine)").unwrap();
        assert!(exact_match(Some(&a), &b));
        assert!(!exact_match(None, &b));
    }

    #[test]
    fn hits_extremes() {
        assert_eq!(hits_at_1(&set(&["a", "b"]), &set(&["a", "b", "c"]), 100, 1), 1.0);
        assert_eq!(hits_at_1(&set(&["x", "y"]), &set(&["a"]), 100, 1), 0.0);
        assert_eq!(hits_at_1(&set(&[]), &set(&["a"]), 100, 1), 0.0);
        let h = hits_at_1(&set(&["a", "b"]), &set(&["a"]), 100, 9);
        assert!(h > 0.3 && h < 0.7);
    }
}
