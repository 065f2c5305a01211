//! Intrinsic (ROC/AUC) and extrinsic (RR@k, nDCG@k) evaluation,
//! equivalence testing, and cost analysis.

pub mod tost;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::RankedList;
use crate::quality::QualityScoreSet;

pub use tost::{
    student_t_cdf, student_t_sf, tost_equivalence, tost_paired, TostResult, DEFAULT_ALPHA, DEFAULT_RELATIVE_MARGIN,
};

/// Grade at or above which a judgment counts as relevant.
pub const DEFAULT_RELEVANCE_THRESHOLD: u32 = 1;

/// qid -> docno -> grade.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Qrels {
    judgments: BTreeMap<String, BTreeMap<String, u32>>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, qid: impl Into<String>, docno: impl Into<String>, grade: u32) {
        self.judgments
            .entry(qid.into())
            .or_default()
            .insert(docno.into(), grade);
    }

    pub fn grade(&self, qid: &str, docno: &str) -> u32 {
        self.judgments.get(qid).and_then(|j| j.get(docno)).copied().unwrap_or(0)
    }

    pub fn query(&self, qid: &str) -> Option<&BTreeMap<String, u32>> {
        self.judgments.get(qid)
    }

    pub fn qids(&self) -> impl Iterator<Item = &str> {
        self.judgments.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, u32)> {
        self.judgments
            .iter()
            .flat_map(|(q, j)| j.iter().map(move |(d, &g)| (q.as_str(), d.as_str(), g)))
    }

    pub fn is_empty(&self) -> bool {
        self.judgments.is_empty()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        for (q, d, g) in self.iter() {
            writeln!(out, "{q} 0 {d} {g}").map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }
}

/// Read a four-column `qid 0 docno grade` file.
pub fn load_qrels(path: impl AsRef<Path>) -> Result<Qrels> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_qrels(BufReader::new(file))
}

pub fn parse_qrels<R: BufRead>(reader: R) -> Result<Qrels> {
    let mut qrels = Qrels::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::parse(i + 1, e.to_string()))?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 4 {
            return Err(Error::parse(i + 1, "expected `qid 0 docno grade`"));
        }
        let grade: i64 = fields[3]
            .parse()
            .map_err(|_| Error::parse(i + 1, format!("invalid grade `{}`", fields[3])))?;
        // Negative grades (e.g. -1 for spam) are treated as non-relevant.
        qrels.insert(fields[0], fields[2], grade.max(0) as u32);
    }
    if qrels.is_empty() {
        return Err(Error::InsufficientData("qrels contain no judgments".into()));
    }
    Ok(qrels)
}

fn check_labels(labels: &[(f64, bool)]) -> Result<(usize, usize)> {
    let positives = labels.iter().filter(|(_, l)| *l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::DegenerateLabels { positives, negatives });
    }
    Ok((positives, negatives))
}

/// Join scores with labels over the labelled docnos.
pub fn labelled_scores(scores: &QualityScoreSet, labels: &BTreeMap<String, bool>) -> Result<Vec<(f64, bool)>> {
    labels
        .iter()
        .map(|(docno, &label)| {
            scores
                .get(docno)
                .map(|s| (s, label))
                .ok_or_else(|| Error::MissingScore(docno.clone()))
        })
        .collect()
}

/// Mann-Whitney AUC with average ranks for ties:
/// `P(pos > neg) + P(pos = neg) / 2`.
pub fn auc(pairs: &[(f64, bool)]) -> Result<f64> {
    let (n_pos, n_neg) = check_labels(pairs)?;
    let mut sorted: Vec<(f64, bool)> = pairs.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j].0 == sorted[i].0 {
            j += 1;
        }
        // ranks i+1 ..= j share their mean
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        let pos_in_group = sorted[i..j].iter().filter(|(_, l)| *l).count();
        rank_sum += avg_rank * pos_in_group as f64;
        i = j;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
}

/// One point per distinct score, scanning thresholds from high to low,
/// from (0, 0) to (1, 1).
pub fn roc_curve(pairs: &[(f64, bool)]) -> Result<Vec<RocPoint>> {
    let (n_pos, n_neg) = check_labels(pairs)?;
    let mut sorted: Vec<(f64, bool)> = pairs.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut points = vec![RocPoint { fpr: 0.0, tpr: 0.0 }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j].0 == sorted[i].0 {
            if sorted[j].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            j += 1;
        }
        points.push(RocPoint {
            fpr: fp as f64 / n_neg as f64,
            tpr: tp as f64 / n_pos as f64,
        });
        i = j;
    }
    Ok(points)
}

/// Positive iff judged relevant for any query; excluded docnos are
/// dropped from both classes. Docnos outside `corpus` are ignored.
pub fn intrinsic_labels<'a, I>(
    qrels: &Qrels,
    corpus: I,
    exclude: &HashSet<String>,
    threshold: u32,
) -> BTreeMap<String, bool>
where
    I: IntoIterator<Item = &'a str>,
{
    let relevant: HashSet<&str> = qrels
        .iter()
        .filter(|&(_, _, g)| g >= threshold)
        .map(|(_, d, _)| d)
        .collect();
    corpus
        .into_iter()
        .filter(|d| !exclude.contains(*d))
        .map(|d| (d.to_owned(), relevant.contains(d)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "RR@10")]
    RrAt10,
    #[serde(rename = "nDCG@10")]
    NdcgAt10,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::RrAt10 => "RR@10",
            Metric::NdcgAt10 => "nDCG@10",
        }
    }

    pub fn evaluate(self, runs: &[RankedList], qrels: &Qrels) -> MetricReport {
        match self {
            Metric::RrAt10 => rr_at_k(runs, qrels, 10, DEFAULT_RELEVANCE_THRESHOLD),
            Metric::NdcgAt10 => ndcg_at_k(runs, qrels, 10),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rr@10" | "rr" | "mrr" => Ok(Metric::RrAt10),
            "ndcg@10" | "ndcg" => Ok(Metric::NdcgAt10),
            _ => Err(Error::InvalidConfig(format!("unknown metric `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric: String,
    pub per_query: BTreeMap<String, f64>,
    pub mean: f64,
    /// Queries scored 0 because they have no relevant judgments.
    pub flagged: Vec<String>,
}

fn per_query_report<F>(name: String, runs: &[RankedList], qrels: &Qrels, mut score: F) -> MetricReport
where
    F: FnMut(&str, Option<&RankedList>) -> Option<f64>,
{
    let by_qid: HashMap<&str, &RankedList> = runs.iter().map(|r| (r.qid.as_str(), r)).collect();
    let qids: std::collections::BTreeSet<&str> = qrels.qids().chain(by_qid.keys().copied()).collect();
    let mut per_query = BTreeMap::new();
    let mut flagged = Vec::new();
    for qid in qids {
        let value = score(qid, by_qid.get(qid).copied()).unwrap_or_else(|| {
            flagged.push(qid.to_owned());
            0.0
        });
        per_query.insert(qid.to_owned(), value);
    }
    let mean = if per_query.is_empty() {
        0.0
    } else {
        per_query.values().sum::<f64>() / per_query.len() as f64
    };
    MetricReport {
        metric: name,
        per_query,
        mean,
        flagged,
    }
}

fn has_relevant(qrels: &Qrels, qid: &str, threshold: u32) -> bool {
    qrels.query(qid).is_some_and(|j| j.values().any(|&g| g >= threshold))
}

/// Reciprocal rank of the first docno graded `>= threshold` within the
/// top `k`. Queries absent from the run score 0.
pub fn rr_at_k(runs: &[RankedList], qrels: &Qrels, k: usize, threshold: u32) -> MetricReport {
    per_query_report(format!("RR@{k}"), runs, qrels, |qid, run| {
        if !has_relevant(qrels, qid, threshold) {
            return None;
        }
        let rr = run.and_then(|r| {
            r.docnos()
                .take(k)
                .position(|d| qrels.grade(qid, d) >= threshold)
                .map(|i| 1.0 / (i + 1) as f64)
        });
        Some(rr.unwrap_or(0.0))
    })
}

fn dcg(grades: impl Iterator<Item = u32>) -> f64 {
    grades
        .enumerate()
        .map(|(i, g)| (2f64.powi(g as i32) - 1.0) / ((i + 2) as f64).log2())
        .sum()
}

/// Exponential-gain nDCG with a `log2(rank + 1)` discount.
pub fn ndcg_at_k(runs: &[RankedList], qrels: &Qrels, k: usize) -> MetricReport {
    per_query_report(format!("nDCG@{k}"), runs, qrels, |qid, run| {
        let judged = qrels.query(qid)?;
        let mut ideal: Vec<u32> = judged.values().copied().filter(|&g| g > 0).collect();
        if ideal.is_empty() {
            return None;
        }
        ideal.sort_unstable_by(|a, b| b.cmp(a));
        let idcg = dcg(ideal.into_iter().take(k));
        let got = run.map_or(0.0, |r| dcg(r.docnos().take(k).map(|d| qrels.grade(qid, d))));
        Some(got / idcg)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BreakEven {
    pub quality_latency_ms: f64,
    pub encoding_latency_ms: f64,
    /// Fraction of the corpus that must be pruned to pay for scoring it.
    pub fraction: f64,
}

impl BreakEven {
    pub fn exceeds_corpus(&self) -> bool {
        self.fraction > 1.0
    }

    /// Whole-percent label, `>100%` when pruning everything cannot pay
    /// for the scoring cost.
    pub fn label(&self) -> String {
        if self.exceeds_corpus() {
            ">100%".to_owned()
        } else {
            format!("{:.0}%", self.fraction * 100.0)
        }
    }
}

pub fn break_even(quality_latency_ms: f64, encoding_latency_ms: f64) -> Result<BreakEven> {
    for (name, v) in [("quality", quality_latency_ms), ("encoding", encoding_latency_ms)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidConfig(format!("{name} latency must be > 0, got {v}")));
        }
    }
    Ok(BreakEven {
        quality_latency_ms,
        encoding_latency_ms,
        fraction: quality_latency_ms / encoding_latency_ms,
    })
}

/// Largest fraction considered by [`size_linearity`].
pub const LINEARITY_MAX_FRACTION: f64 = 0.7;

/// Maximum relative deviation of postings counts from
/// `(1 - f) * postings(0)` over fractions `0 < f <= 0.7`.
pub fn size_linearity(points: &[(f64, u64)]) -> Result<f64> {
    let base = points
        .iter()
        .find(|(f, _)| *f == 0.0)
        .map(|&(_, p)| p as f64)
        .ok_or_else(|| Error::InsufficientData("size linearity needs a fraction-0 entry".into()))?;
    let mut worst: f64 = 0.0;
    for &(f, postings) in points {
        if f <= 0.0 || f > LINEARITY_MAX_FRACTION + 1e-9 {
            continue;
        }
        let expected = base - f * base;
        worst = worst.max((postings as f64 - expected).abs() / expected);
    }
    Ok(worst)
}

/// One row of a pruning trade-off report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub estimator: String,
    pub fraction: f64,
    pub metric: String,
    pub mean: f64,
    pub p_value: Option<f64>,
    pub equivalent: Option<bool>,
}

pub const REPORT_HEADER: &str = "estimator,fraction,metric,mean,p_value,equivalent";

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

impl ReportRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            csv_field(&self.estimator),
            self.fraction,
            csv_field(&self.metric),
            self.mean,
            self.p_value.map(|p| p.to_string()).unwrap_or_default(),
            self.equivalent.map(|e| e.to_string()).unwrap_or_default(),
        )
    }
}

/// Write the CSV report and its JSON mirror.
pub fn write_report(csv_path: impl AsRef<Path>, json_path: impl AsRef<Path>, rows: &[ReportRow]) -> Result<()> {
    let csv_path = csv_path.as_ref();
    let mut csv = String::from(REPORT_HEADER);
    csv.push('\n');
    for row in rows {
        csv.push_str(&row.to_csv());
        csv.push('\n');
    }
    std::fs::write(csv_path, csv).map_err(|e| Error::io(csv_path, e))?;
    let json_path = json_path.as_ref();
    let file = File::create(json_path).map_err(|e| Error::io(json_path, e))?;
    serde_json::to_writer_pretty(BufWriter::new(file), rows)?;
    Ok(())
}
