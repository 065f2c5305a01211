//! Query-independent passage quality estimation and static pruning for
//! first-stage retrieval.
//!
//! The pipeline: tokenize a [`corpus`], score each passage with a
//! [`quality`] estimator, drop the lowest-scoring fraction with [`pruning`],
//! build a BM25 [`index`] over what remains, and check with [`eval`] whether
//! retrieval effectiveness is statistically equivalent to the unpruned
//! index. [`synth`] generates corpora with planted low-quality passages and
//! [`sweep`] runs the whole loop over a grid of estimators and fractions.

/// Library version, recorded in run provenance.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod corpus;
pub mod error;
pub mod eval;
pub mod index;
pub mod pruning;
pub mod quality;
pub mod sweep;
pub mod synth;

pub use corpus::{tokenize, tokenize_all, CollectionStats, Passage, TokenizedPassage};
pub use error::{Error, Result};
pub use eval::{MetricReport, Qrels, TostResult};
pub use index::{InvertedIndex, Query, RankedList};
pub use pruning::{PruneManifest, PruneSpec};
pub use quality::{Estimator, QualityScoreSet};
