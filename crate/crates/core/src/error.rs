use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate docno `{0}`")]
    DuplicateDocno(String),

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("passage `{0}` has no terms; score is undefined")]
    EmptyPassage(String),

    #[error("term `{term}` is not in the language model vocabulary")]
    MissingTerm { term: String },

    #[error("no quality score for docno `{0}`")]
    MissingScore(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("training diverged at step {step}: loss is {loss}")]
    Divergence { step: usize, loss: f64 },

    #[error("labels are degenerate: {positives} positive, {negatives} negative")]
    DegenerateLabels { positives: usize, negatives: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("pairing mismatch: {0}")]
    Pairing(String),

    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
