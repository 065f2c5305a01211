//! Estimator x fraction sweeps: prune, index, search, evaluate and test
//! each cell against the unpruned baseline.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::TokenizedPassage;
use crate::error::{Error, Result};
use crate::eval::{tost_equivalence, Metric, MetricReport, Qrels, ReportRow, TostResult};
use crate::eval::{DEFAULT_ALPHA, DEFAULT_RELATIVE_MARGIN};
use crate::index::{build_index, index_stats, search_all, Bm25Params, IndexStats, Query};
use crate::pruning::{plan, PruneSpec};
use crate::quality::QualityScoreSet;

/// `0.00, 0.05, ..., 0.70`.
pub fn default_fractions() -> Vec<f64> {
    (0..=14).map(|i| i as f64 / 20.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub fractions: Vec<f64>,
    pub top_k: usize,
    pub bm25: Bm25Params,
    pub metric: Metric,
    pub margin: f64,
    pub alpha: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            fractions: default_fractions(),
            top_k: 10,
            bm25: Bm25Params::default(),
            metric: Metric::RrAt10,
            margin: DEFAULT_RELATIVE_MARGIN,
            alpha: DEFAULT_ALPHA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub report: MetricReport,
    pub tost: TostResult,
    pub index: IndexStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub estimator: String,
    pub fraction: f64,
    pub outcome: std::result::Result<CellResult, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub metric: Metric,
    pub baseline: MetricReport,
    pub baseline_index: IndexStats,
    /// Estimator-major, fractions in the configured order.
    pub cells: Vec<SweepCell>,
}

impl SweepOutcome {
    /// Failed cells appear with a NaN mean and no test outcome.
    pub fn rows(&self) -> Vec<ReportRow> {
        self.cells
            .iter()
            .map(|c| match &c.outcome {
                Ok(r) => ReportRow {
                    estimator: c.estimator.clone(),
                    fraction: c.fraction,
                    metric: self.metric.name().to_owned(),
                    mean: r.report.mean,
                    p_value: Some(r.tost.p_value),
                    equivalent: Some(r.tost.equivalent),
                },
                Err(_) => ReportRow {
                    estimator: c.estimator.clone(),
                    fraction: c.fraction,
                    metric: self.metric.name().to_owned(),
                    mean: f64::NAN,
                    p_value: None,
                    equivalent: None,
                },
            })
            .collect()
    }

    pub fn errors(&self) -> impl Iterator<Item = (&str, f64, &str)> {
        self.cells.iter().filter_map(|c| match &c.outcome {
            Err(e) => Some((c.estimator.as_str(), c.fraction, e.as_str())),
            Ok(_) => None,
        })
    }

    /// Largest fraction `f` such that every cell of `estimator` at a
    /// fraction `<= f` is equivalent. `None` if even the smallest is not.
    pub fn max_equivalent_fraction(&self, estimator: &str) -> Option<f64> {
        let mut cells: Vec<&SweepCell> = self.cells.iter().filter(|c| c.estimator == estimator).collect();
        cells.sort_by(|a, b| a.fraction.total_cmp(&b.fraction));
        let mut best = None;
        for c in cells {
            match &c.outcome {
                Ok(r) if r.tost.equivalent => best = Some(c.fraction),
                _ => break,
            }
        }
        best
    }

    /// `(fraction, num_postings)` for one estimator, for linearity checks.
    pub fn postings_by_fraction(&self, estimator: &str) -> Vec<(f64, u64)> {
        self.cells
            .iter()
            .filter(|c| c.estimator == estimator)
            .filter_map(|c| c.outcome.as_ref().ok().map(|r| (c.fraction, r.index.num_postings)))
            .collect()
    }
}

fn evaluate_pruned(
    passages: &[TokenizedPassage],
    queries: &[Query],
    qrels: &Qrels,
    pruned: &HashSet<&str>,
    cfg: &SweepConfig,
) -> Result<(MetricReport, IndexStats)> {
    let index = build_index(passages.iter().filter(|p| !pruned.contains(p.docno.as_str())))?;
    let runs = search_all(&index, queries, cfg.top_k, cfg.bm25);
    Ok((cfg.metric.evaluate(&runs, qrels), index_stats(&index)))
}

fn run_cell(
    passages: &[TokenizedPassage],
    queries: &[Query],
    qrels: &Qrels,
    scores: &QualityScoreSet,
    fraction: f64,
    baseline: &MetricReport,
    cfg: &SweepConfig,
) -> Result<CellResult> {
    let manifest = plan(scores, PruneSpec::fraction(fraction)?)?;
    if let Some(p) = passages.iter().find(|p| scores.get(&p.docno).is_none()) {
        return Err(Error::MissingScore(p.docno.clone()));
    }
    let pruned = manifest.pruned_set();
    let (report, index) = evaluate_pruned(passages, queries, qrels, &pruned, cfg)?;
    let tost = tost_equivalence(&baseline.per_query, &report.per_query, cfg.margin, cfg.alpha)?;
    Ok(CellResult { report, tost, index })
}

/// Runs every estimator x fraction cell. Cells run in parallel; a failing
/// cell records its error and the others proceed.
pub fn run_sweep(
    passages: &[TokenizedPassage],
    queries: &[Query],
    qrels: &Qrels,
    estimators: &[QualityScoreSet],
    cfg: &SweepConfig,
) -> Result<SweepOutcome> {
    for &f in &cfg.fractions {
        PruneSpec::fraction(f)?;
    }
    let (baseline, baseline_index) = evaluate_pruned(passages, queries, qrels, &HashSet::new(), cfg)?;
    let jobs: Vec<(&QualityScoreSet, f64)> = estimators
        .iter()
        .flat_map(|s| cfg.fractions.iter().map(move |&f| (s, f)))
        .collect();
    let cells = jobs
        .into_par_iter()
        .map(|(scores, fraction)| SweepCell {
            estimator: scores.estimator.clone(),
            fraction,
            outcome: run_cell(passages, queries, qrels, scores, fraction, &baseline, cfg).map_err(|e| e.to_string()),
        })
        .collect();
    Ok(SweepOutcome {
        metric: cfg.metric,
        baseline,
        baseline_index,
        cells,
    })
}
