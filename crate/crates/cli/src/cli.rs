use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::estimator::EstimatorSpec;

#[derive(Debug, Parser)]
#[command(
    name = "qprune",
    version,
    about = "Quality-based static pruning for passage retrieval"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus with queries, qrels, triples and labels.
    Synth(SynthArgs),
    /// Score every passage of a corpus with one quality estimator.
    Score(ScoreArgs),
    /// Train the hashed-feature linear quality model on triples.
    TrainQuality(TrainArgs),
    /// Drop the lowest-quality passages from a corpus.
    Prune(PruneArgs),
    /// Build a BM25 inverted index.
    Index(IndexArgs),
    /// Run queries against an index and write a TREC run.
    Search(SearchArgs),
    /// Evaluate a run against qrels and write a report row.
    Eval(EvalArgs),
    /// Test whether a pruned run is equivalent to the unpruned one.
    Tost(TostArgs),
    /// Intrinsic ROC/AUC of score files against relevance labels.
    Roc(RocArgs),
    /// Fraction of a corpus that must be pruned to pay for scoring it.
    Breakeven(BreakevenArgs),
    /// Prune/index/search/evaluate every estimator at every fraction.
    Sweep(SweepArgs),
    /// Merge report files into one table and chart.
    Report(ReportArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    pub num_passages: usize,
    #[arg(long, default_value_t = 20_000)]
    pub vocab_size: usize,
    #[arg(long, default_value_t = 0.2)]
    pub low_quality_fraction: f64,
    #[arg(long, default_value_t = 500)]
    pub num_queries: usize,
    #[arg(long, default_value_t = 30)]
    pub min_len: usize,
    #[arg(long, default_value_t = 60)]
    pub max_len: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct EstimatorOptions {
    /// Smoothing weight of the passage model for cdd.
    #[arg(long, default_value_t = qprune::quality::DEFAULT_LAMBDA)]
    pub lambda: f64,
    /// Seed for the random estimator.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct ScoreArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// itn | cdd | unigram-ppl | random | linear:<model> | external:<scores>
    #[arg(long)]
    pub estimator: EstimatorSpec,
    #[command(flatten)]
    pub options: EstimatorOptions,
    /// Score file to write (docno<TAB>score).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub triples: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1 << 18)]
    pub feature_dim: usize,
    #[arg(long, default_value_t = 0.1)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 1)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.0)]
    pub l2: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
#[group(required = true, multiple = false, id = "mode")]
pub struct PruneMode {
    /// Prune exactly floor(fraction * n) passages.
    #[arg(long)]
    pub fraction: Option<f64>,
    /// Keep passages scoring at or above this value.
    #[arg(long, allow_negative_numbers = true)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct PruneArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub scores: PathBuf,
    #[command(flatten)]
    pub mode: PruneMode,
    /// Pruned corpus; the format follows the extension.
    #[arg(long)]
    pub out: PathBuf,
    /// Manifest path; defaults to `<out>.manifest.json`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct IndexArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize, Clone, Copy)]
pub struct Bm25Options {
    #[arg(long, default_value_t = 1.2)]
    pub k1: f64,
    #[arg(long, default_value_t = 0.75)]
    pub b: f64,
    /// Results kept per query.
    #[arg(long, default_value_t = 10)]
    pub topk: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct SearchArgs {
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub queries: PathBuf,
    #[command(flatten)]
    pub bm25: Bm25Options,
    /// Measured passes after one warm-up pass.
    #[arg(long, default_value_t = 1)]
    pub repetitions: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct TestOptions {
    /// Equivalence margin relative to the unpruned mean.
    #[arg(long, default_value_t = qprune::eval::DEFAULT_RELATIVE_MARGIN)]
    pub margin: f64,
    #[arg(long, default_value_t = qprune::eval::DEFAULT_ALPHA)]
    pub alpha: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub run: PathBuf,
    #[arg(long)]
    pub qrels: PathBuf,
    /// RR@10 or nDCG@10; repeat for several.
    #[arg(long = "metric", default_value = "RR@10")]
    pub metrics: Vec<qprune::eval::Metric>,
    /// Unpruned run to test equivalence against.
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    #[command(flatten)]
    pub test: TestOptions,
    /// Estimator column of the report row.
    #[arg(long, default_value = "none")]
    pub label: String,
    /// Fraction column of the report row.
    #[arg(long, default_value_t = 0.0)]
    pub fraction: f64,
    /// Report CSV; a JSON mirror and per-query values are written beside it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct TostArgs {
    #[arg(long)]
    pub unpruned: PathBuf,
    #[arg(long)]
    pub pruned: PathBuf,
    #[arg(long)]
    pub qrels: PathBuf,
    #[arg(long, default_value = "RR@10")]
    pub metric: qprune::eval::Metric,
    #[command(flatten)]
    pub test: TestOptions,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct RocArgs {
    /// Score files, one per estimator.
    #[arg(long = "scores", required = true, num_args = 1..)]
    pub scores: Vec<PathBuf>,
    /// Label source: passages relevant to any query are positive.
    #[arg(long, required_unless_present = "labels")]
    pub qrels: Option<PathBuf>,
    /// Corpus whose docnos are labelled (required with --qrels).
    #[arg(long, requires = "qrels")]
    pub corpus: Option<PathBuf>,
    /// Docnos (one per line) to leave out, e.g. training positives.
    #[arg(long, requires = "qrels")]
    pub exclude: Option<PathBuf>,
    /// Explicit labels instead: docno<TAB>0|1.
    #[arg(long, conflicts_with = "qrels")]
    pub labels: Option<PathBuf>,
    /// JSON with AUC and curve points per estimator.
    #[arg(long)]
    pub out: PathBuf,
    /// Directory for one SVG chart per estimator.
    #[arg(long)]
    pub plot_dir: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct BreakevenArgs {
    /// Quality estimation cost, ms per passage.
    #[arg(long, required_unless_present = "quality_record")]
    pub quality_ms: Option<f64>,
    /// JSON with a `ms_per_passage` field, e.g. the provenance of `score`.
    #[arg(long, conflicts_with = "quality_ms")]
    pub quality_record: Option<PathBuf>,
    /// Dense encoding cost, ms per passage.
    #[arg(long)]
    pub encoding_ms: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long)]
    pub qrels: PathBuf,
    /// Comma-separated estimator specs.
    #[arg(long = "estimator", value_delimiter = ',', required = true)]
    pub estimators: Vec<EstimatorSpec>,
    #[command(flatten)]
    pub options: EstimatorOptions,
    /// Comma-separated fractions; defaults to 0, 0.05, ..., 0.7.
    #[arg(long = "fraction", value_delimiter = ',')]
    pub fractions: Vec<f64>,
    #[command(flatten)]
    pub bm25: Bm25Options,
    #[arg(long, default_value = "RR@10")]
    pub metric: qprune::eval::Metric,
    #[command(flatten)]
    pub test: TestOptions,
    /// Docnos excluded from the ROC labels, e.g. training positives.
    #[arg(long)]
    pub exclude: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    /// Report JSON files (as written by eval or sweep).
    #[arg(long = "input", required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    /// Merged CSV; the JSON mirror is written beside it.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional metric-vs-fraction chart.
    #[arg(long)]
    pub plot: Option<PathBuf>,
}
