//! Paired equivalence test with an unbounded upper margin.
//!
//! With the upper bound at infinity, two one-sided tests reduce to the lower
//! one: `H0: mean(pruned - unpruned) <= -delta`, rejected by a one-sample t
//! test on `d_i = pruned_i - unpruned_i + delta`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_RELATIVE_MARGIN: f64 = 0.05;
pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TostResult {
    /// Absolute margin: `relative_margin * mean_unpruned`.
    pub margin_delta: f64,
    /// `+inf` / `-inf` when every difference is identical.
    pub t_statistic: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub equivalent: bool,
    pub n_queries: usize,
    pub mean_unpruned: f64,
    pub mean_pruned: f64,
}

/// Paired test over per-query values keyed by qid. Both maps must cover
/// the same qids.
pub fn tost_equivalence(
    unpruned: &BTreeMap<String, f64>,
    pruned: &BTreeMap<String, f64>,
    relative_margin: f64,
    alpha: f64,
) -> Result<TostResult> {
    if unpruned.len() != pruned.len() || unpruned.keys().ne(pruned.keys()) {
        let missing = unpruned
            .keys()
            .find(|q| !pruned.contains_key(*q))
            .or_else(|| pruned.keys().find(|q| !unpruned.contains_key(*q)));
        return Err(Error::Pairing(format!(
            "qid sets differ (first unmatched qid: {})",
            missing.map_or("?", String::as_str)
        )));
    }
    let a: Vec<f64> = unpruned.values().copied().collect();
    let b: Vec<f64> = pruned.values().copied().collect();
    tost_paired(&a, &b, relative_margin, alpha)
}

/// Same test over positionally paired slices.
pub fn tost_paired(unpruned: &[f64], pruned: &[f64], relative_margin: f64, alpha: f64) -> Result<TostResult> {
    if unpruned.len() != pruned.len() {
        return Err(Error::Pairing(format!(
            "{} unpruned values vs {} pruned",
            unpruned.len(),
            pruned.len()
        )));
    }
    let n = unpruned.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 paired queries, got {n}"
        )));
    }
    if !(0.0..1.0).contains(&alpha) || alpha == 0.0 {
        return Err(Error::InvalidConfig(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if !(relative_margin.is_finite() && relative_margin >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "margin must be >= 0, got {relative_margin}"
        )));
    }
    let nf = n as f64;
    let mean_unpruned = unpruned.iter().sum::<f64>() / nf;
    let mean_pruned = pruned.iter().sum::<f64>() / nf;
    let delta = relative_margin * mean_unpruned;
    let d: Vec<f64> = pruned.iter().zip(unpruned).map(|(p, u)| p - u + delta).collect();

    let (t_statistic, p_value) = if d.iter().all(|&x| x == d[0]) {
        if d[0] > 0.0 {
            (f64::INFINITY, 0.0)
        } else {
            (f64::NEG_INFINITY, 1.0)
        }
    } else {
        let mean = d.iter().sum::<f64>() / nf;
        let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
        let t = mean / (var / nf).sqrt();
        (t, student_t_sf(t, nf - 1.0))
    };
    Ok(TostResult {
        margin_delta: delta,
        t_statistic,
        p_value,
        alpha,
        equivalent: p_value < alpha,
        n_queries: n,
        mean_unpruned,
        mean_pruned,
    })
}

/// Upper tail `P(T > t)` of Student's t with `df` degrees of freedom.
pub fn student_t_sf(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return if t > 0.0 { 0.0 } else { 1.0 };
    }
    let x = df / (df + t * t);
    let tail = 0.5 * regularized_incomplete_beta(0.5 * df, 0.5, x);
    if t > 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    1.0 - student_t_sf(t, df)
}

/// `I_x(a, b)` via the continued fraction, using the symmetry relation to
/// stay in its fast-converging region.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

/// Modified Lentz evaluation.
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 10_000;
    const EPS: f64 = 1e-16;
    const TINY: f64 = 1e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Lanczos approximation (g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // Reflection.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}
