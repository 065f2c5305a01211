//! Brute-force reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;

use qprune::eval::RocPoint;
use rand::Rng;

/// Pair-counting AUC: 1 per positive above a negative, 1/2 per tie.
pub fn auc_pairs(pairs: &[(f64, bool)]) -> f64 {
    let pos: Vec<f64> = pairs.iter().filter(|p| p.1).map(|p| p.0).collect();
    let neg: Vec<f64> = pairs.iter().filter(|p| !p.1).map(|p| p.0).collect();
    let mut wins = 0.0;
    for &p in &pos {
        for &n in &neg {
            if p > n {
                wins += 1.0;
            } else if p == n {
                wins += 0.5;
            }
        }
    }
    wins / (pos.len() * neg.len()) as f64
}

pub fn trapezoid(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum()
}

/// Labelled scores drawn from a handful of values so ties are common,
/// with at least one label of each class.
pub fn random_labelled(rng: &mut impl Rng, max_n: usize) -> Vec<(f64, bool)> {
    let n = rng.gen_range(2..=max_n);
    let levels = rng.gen_range(1..=10);
    let mut pairs: Vec<(f64, bool)> = (0..n)
        .map(|_| (rng.gen_range(0..levels) as f64 / 4.0, rng.gen_bool(0.4)))
        .collect();
    pairs[0].1 = true;
    pairs[1].1 = false;
    pairs
}

/// KL divergence from the collection model to the smoothed passage model,
/// summed over every lexicon term.
pub fn cdd_naive(passage: &[String], corpus: &[Vec<String>], lambda: f64) -> f64 {
    let mut coll: HashMap<&str, f64> = HashMap::new();
    let mut total = 0.0;
    for doc in corpus {
        for t in doc {
            *coll.entry(t).or_default() += 1.0;
            total += 1.0;
        }
    }
    let mut local: HashMap<&str, f64> = HashMap::new();
    for t in passage {
        *local.entry(t).or_default() += 1.0;
    }
    let len = passage.len() as f64;
    coll.iter()
        .map(|(t, c)| {
            let pc = c / total;
            let pd = local.get(t).copied().unwrap_or(0.0) / len;
            pc * (pc / (lambda * pd + (1.0 - lambda) * pc)).ln()
        })
        .sum()
}

pub fn random_terms(rng: &mut impl Rng, vocab: usize, len: usize) -> Vec<String> {
    (0..len).map(|_| format!("w{}", rng.gen_range(0..vocab))).collect()
}
