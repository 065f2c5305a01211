//! Static corpus pruning by quality score.
//!
//! Threshold mode keeps exactly the passages scoring at or above `t`.
//! Fraction mode prunes exactly `floor(fraction * n)` passages: the lowest by
//! `(score ascending, docno ascending)`.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::corpus::Passage;
use crate::error::{Error, Result};
use crate::quality::QualityScoreSet;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PruneSpec {
    Fraction(f64),
    Threshold(f64),
}

impl PruneSpec {
    pub fn fraction(f: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::InvalidConfig(format!("prune fraction {f} outside [0, 1]")));
        }
        Ok(PruneSpec::Fraction(f))
    }

    pub fn threshold(t: f64) -> Result<Self> {
        if t.is_nan() {
            return Err(Error::InvalidConfig("threshold is NaN".into()));
        }
        Ok(PruneSpec::Threshold(t))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneManifest {
    pub estimator: String,
    /// Lowest score that was pruned in fraction mode, `t` in threshold mode.
    /// `-inf` (stored as `null`) when nothing was pruned.
    #[serde(serialize_with = "ser_threshold", deserialize_with = "de_threshold")]
    pub threshold_used: f64,
    /// `None` in threshold mode.
    pub fraction_requested: Option<f64>,
    pub fraction_achieved: f64,
    /// Sorted by docno.
    pub kept: Vec<String>,
    /// Sorted by docno.
    pub pruned: Vec<String>,
}

fn ser_threshold<S: Serializer>(t: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if t.is_finite() {
        s.serialize_some(t)
    } else {
        s.serialize_none()
    }
}

fn de_threshold<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NEG_INFINITY))
}

impl PruneManifest {
    pub fn pruned_set(&self) -> HashSet<&str> {
        self.pruned.iter().map(String::as_str).collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer_pretty(BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_reader(BufReader::new(file))?)
    }
}

/// Outcome of exact-count selection.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub threshold: f64,
    /// In prune order: lowest score first.
    pub pruned: Vec<String>,
}

fn ascending(scores: &QualityScoreSet) -> Vec<(&str, f64)> {
    let mut order: Vec<(&str, f64)> = scores.iter().collect();
    order.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(b.0)));
    order
}

pub fn select_threshold(scores: &QualityScoreSet, fraction: f64) -> Result<Selection> {
    PruneSpec::fraction(fraction)?;
    let order = ascending(scores);
    let count = prune_count(fraction, order.len());
    let pruned: Vec<String> = order[..count].iter().map(|(d, _)| d.to_string()).collect();
    let threshold = order[..count].last().map_or(f64::NEG_INFINITY, |(_, s)| *s);
    Ok(Selection { threshold, pruned })
}

/// `floor(fraction * n)`, guarded against `0.3 * 10 = 2.9999...`.
pub fn prune_count(fraction: f64, n: usize) -> usize {
    let exact = fraction * n as f64;
    let rounded = exact.round();
    let count = if (exact - rounded).abs() < 1e-9 * n.max(1) as f64 {
        rounded
    } else {
        exact.floor()
    };
    (count as usize).min(n)
}

/// Build the manifest for `scores` under `spec`.
pub fn plan(scores: &QualityScoreSet, spec: PruneSpec) -> Result<PruneManifest> {
    let n = scores.len();
    let (threshold_used, fraction_requested, mut pruned) = match spec {
        PruneSpec::Fraction(f) => {
            let sel = select_threshold(scores, f)?;
            (sel.threshold, Some(f), sel.pruned)
        }
        PruneSpec::Threshold(t) => {
            let pruned = scores
                .iter()
                .filter(|&(_, s)| s < t)
                .map(|(d, _)| d.to_owned())
                .collect();
            (t, None, pruned)
        }
    };
    pruned.sort_unstable();
    let pruned_set: HashSet<&str> = pruned.iter().map(String::as_str).collect();
    let mut kept: Vec<String> = scores
        .iter()
        .map(|(d, _)| d)
        .filter(|d| !pruned_set.contains(d))
        .map(str::to_owned)
        .collect();
    kept.sort_unstable();
    let fraction_achieved = if n == 0 { 0.0 } else { pruned.len() as f64 / n as f64 };
    Ok(PruneManifest {
        estimator: scores.estimator.clone(),
        threshold_used,
        fraction_requested,
        fraction_achieved,
        kept,
        pruned,
    })
}

/// Filter `corpus` (order preserved) through the manifest for `scores`
/// and `spec`. Every corpus passage must have a score.
pub fn prune<I>(corpus: I, scores: &QualityScoreSet, spec: PruneSpec) -> Result<(Vec<Passage>, PruneManifest)>
where
    I: IntoIterator<Item = Result<Passage>>,
{
    let manifest = plan(scores, spec)?;
    let pruned = manifest.pruned_set();
    let mut kept = Vec::new();
    for passage in corpus {
        let passage = passage?;
        if scores.get(&passage.docno).is_none() {
            return Err(Error::MissingScore(passage.docno));
        }
        if !pruned.contains(passage.docno.as_str()) {
            kept.push(passage);
        }
    }
    Ok((kept, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(pairs: &[(&str, f64)]) -> QualityScoreSet {
        QualityScoreSet::from_pairs("t", pairs.iter().map(|&(d, s)| (d, s))).unwrap()
    }

    #[test]
    fn fraction_zero_keeps_everything() {
        let s = set(&[("a", 0.1), ("b", 0.2)]);
        let sel = select_threshold(&s, 0.0).unwrap();
        assert!(sel.pruned.is_empty());
        assert_eq!(sel.threshold, f64::NEG_INFINITY);
    }

    #[test]
    fn third_prunes_lowest() {
        let sel = select_threshold(&set(&[("a", 0.1), ("b", 0.2), ("c", 0.3)]), 1.0 / 3.0).unwrap();
        assert_eq!(sel.pruned, ["a"]);
        assert_eq!(sel.threshold, 0.1);
    }

    #[test]
    fn ties_break_by_docno() {
        let sel = select_threshold(&set(&[("b", 0.5), ("a", 0.5), ("c", 0.9)]), 1.0 / 3.0).unwrap();
        assert_eq!(sel.pruned, ["a"]);
    }

    #[test]
    fn floor_count_is_exact_for_decimal_fractions() {
        assert_eq!(prune_count(0.3, 10), 3);
        assert_eq!(prune_count(0.7, 100), 70);
        assert_eq!(prune_count(0.05, 19), 0);
        assert_eq!(prune_count(0.999, 10), 9);
        assert_eq!(prune_count(1.0, 4), 4);
    }

    #[test]
    fn threshold_mode_is_literal() {
        let s = set(&[("a", 0.1), ("b", 0.2), ("c", 0.3)]);
        let m = plan(&s, PruneSpec::threshold(0.2).unwrap()).unwrap();
        assert_eq!(m.kept, ["b", "c"]);
        assert_eq!(m.pruned, ["a"]);
        assert_eq!(m.fraction_requested, None);
        let m = plan(&s, PruneSpec::Threshold(f64::NEG_INFINITY)).unwrap();
        assert!(m.pruned.is_empty());
    }

    #[test]
    fn prune_eight_passages() {
        let scores: Vec<(String, f64)> = (0..8).map(|i| (format!("d{i}"), ((i * 5) % 8) as f64)).collect();
        let s = QualityScoreSet::from_pairs("t", scores).unwrap();
        let corpus: Vec<_> = (0..8).map(|i| Ok(Passage::new(format!("d{i}"), "x"))).collect();
        let (kept, m) = prune(corpus, &s, PruneSpec::fraction(0.25).unwrap()).unwrap();
        assert_eq!(m.pruned, ["d0", "d5"]);
        assert_eq!(kept.len(), 6);
        assert_eq!(m.fraction_achieved, 0.25);
        assert!(kept.windows(2).all(|w| w[0].docno < w[1].docno));
    }

    #[test]
    fn missing_score_is_an_error() {
        let s = set(&[("a", 1.0)]);
        let corpus = vec![Ok(Passage::new("a", "x")), Ok(Passage::new("zz", "y"))];
        let err = prune(corpus, &s, PruneSpec::Fraction(0.0)).unwrap_err();
        assert!(matches!(err, Error::MissingScore(ref d) if d == "zz"));
    }

    #[test]
    fn rejects_out_of_range_fraction() {
        assert!(PruneSpec::fraction(1.5).is_err());
        assert!(PruneSpec::fraction(-0.1).is_err());
        assert!(select_threshold(&set(&[("a", 1.0)]), 2.0).is_err());
    }

    #[test]
    fn manifest_json_round_trip() {
        let s = set(&[("a", 0.1), ("b", 0.2)]);
        let m = plan(&s, PruneSpec::Fraction(0.0)).unwrap();
        let json = serde_json::to_string(&m).unwrap();
        assert!(json.contains("\"threshold_used\":null"));
        let back: PruneManifest = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
    }
}
