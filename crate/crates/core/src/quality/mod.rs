//! Query-independent passage quality estimators. Every estimator produces
//! scores where higher means better quality.

pub mod lexical;
pub mod linear;

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use indexmap::IndexMap;
use rayon::prelude::*;
use xxhash_rust::xxh3::xxh3_64_with_seed;

use crate::corpus::TokenizedPassage;
use crate::error::{Error, Result};

pub use lexical::{cdd, itn, unigram_perplexity, CddConfig, UnigramLM, DEFAULT_LAMBDA};
pub use linear::{
    featurize, load_triples, mean_training_loss, score_linear, sigmoid, train_linear, write_triples, LinearConfig,
    LinearQualityModel, TrainingTriple,
};

/// Score given to passages on which an estimator is undefined (no terms).
/// They sort below every real score and are therefore pruned first.
pub const UNDEFINED_SCORE: f64 = f64::MIN;

/// Named per-passage scores, kept in insertion (corpus) order.
#[derive(Debug, Clone, PartialEq)]
pub struct QualityScoreSet {
    pub estimator: String,
    pub scores: IndexMap<String, f64>,
}

impl QualityScoreSet {
    pub fn new(estimator: impl Into<String>) -> Self {
        QualityScoreSet {
            estimator: estimator.into(),
            scores: IndexMap::new(),
        }
    }

    /// Build from pairs, rejecting duplicates and non-finite values.
    pub fn from_pairs<I, S>(estimator: impl Into<String>, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let mut set = QualityScoreSet::new(estimator);
        for (docno, score) in pairs {
            set.insert(docno.into(), score)?;
        }
        Ok(set)
    }

    pub fn insert(&mut self, docno: String, score: f64) -> Result<()> {
        if !score.is_finite() {
            return Err(Error::InvalidConfig(format!("non-finite score {score} for `{docno}`")));
        }
        if self.scores.contains_key(&docno) {
            return Err(Error::DuplicateDocno(docno));
        }
        self.scores.insert(docno, score);
        Ok(())
    }

    pub fn get(&self, docno: &str) -> Option<f64> {
        self.scores.get(docno).copied()
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.scores.iter().map(|(d, &s)| (d.as_str(), s))
    }
}

/// Write `docno<TAB>score` lines. Values use the shortest representation that
/// parses back to the identical `f64`.
pub fn write_scores(path: impl AsRef<Path>, set: &QualityScoreSet) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for (docno, score) in set.iter() {
        writeln!(out, "{docno}\t{}", format_score(score)).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn format_score(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Read a score file; the estimator name is taken from the file stem.
pub fn load_external_scores(path: impl AsRef<Path>) -> Result<QualityScoreSet> {
    let path = path.as_ref();
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "external".into());
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_scores(BufReader::new(file), name)
}

pub fn parse_scores<R: BufRead>(reader: R, estimator: impl Into<String>) -> Result<QualityScoreSet> {
    let mut set = QualityScoreSet::new(estimator);
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::parse(line_no, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let (docno, raw) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(line_no, "expected docno<TAB>score"))?;
        let score: f64 = raw
            .trim()
            .parse()
            .map_err(|_| Error::parse(line_no, format!("invalid score `{raw}`")))?;
        if !score.is_finite() {
            return Err(Error::parse(line_no, format!("non-finite score `{raw}`")));
        }
        if docno.is_empty() {
            return Err(Error::parse(line_no, "empty docno"));
        }
        set.insert(docno.to_owned(), score)?;
    }
    Ok(set)
}

/// Uniform value in `[0, 1)` derived from `(seed, docno)` alone.
pub fn random_quality(docno: &str, seed: u64) -> f64 {
    let digest = xxh3_64_with_seed(docno.as_bytes(), seed);
    (digest >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// A configured estimator ready to score tokenized passages.
pub enum Estimator {
    Itn,
    Cdd { lm: UnigramLM, cfg: CddConfig },
    UnigramPpl { lm: UnigramLM },
    Random { seed: u64 },
    Linear { model: LinearQualityModel },
}

impl Estimator {
    pub fn name(&self) -> &'static str {
        match self {
            Estimator::Itn => "itn",
            Estimator::Cdd { .. } => "cdd",
            Estimator::UnigramPpl { .. } => "unigram-ppl",
            Estimator::Random { .. } => "random",
            Estimator::Linear { .. } => "linear",
        }
    }

    /// Higher-is-better quality for one passage.
    pub fn quality(&self, p: &TokenizedPassage) -> Result<f64> {
        match self {
            Estimator::Itn => itn(p),
            Estimator::Cdd { lm, cfg } => cdd(p, lm, *cfg).map(|d| -d),
            Estimator::UnigramPpl { lm } => unigram_perplexity(p, lm).map(|ppl| -ppl),
            Estimator::Random { seed } => Ok(random_quality(&p.docno, *seed)),
            Estimator::Linear { model } => Ok(score_linear(model, p)),
        }
    }
}

impl fmt::Debug for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Score every passage in parallel, preserving corpus order. Passages on
/// which the estimator is undefined receive [`UNDEFINED_SCORE`]; any other
/// estimator error aborts with the offending docno attached.
pub fn score_corpus(passages: &[TokenizedPassage], estimator: &Estimator) -> Result<QualityScoreSet> {
    let scored: Vec<Result<(String, f64)>> = passages
        .par_iter()
        .map(|p| match estimator.quality(p) {
            Ok(s) => Ok((p.docno.clone(), s)),
            Err(Error::EmptyPassage(_)) => Ok((p.docno.clone(), UNDEFINED_SCORE)),
            Err(Error::MissingTerm { term }) => Err(Error::InvalidConfig(format!(
                "passage `{}`: term `{term}` missing from language model",
                p.docno
            ))),
            Err(e) => Err(e),
        })
        .collect();
    QualityScoreSet::from_pairs(estimator.name(), scored.into_iter().collect::<Result<Vec<_>>>()?)
}
