use std::cell::OnceCell;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use qprune::corpus::{collect_stats, TokenizedPassage};
use qprune::quality::{
    load_external_scores, score_corpus, CddConfig, Estimator, LinearQualityModel, QualityScoreSet, UnigramLM,
};
use serde::{Serialize, Serializer};

use crate::cli::EstimatorOptions;

#[derive(Debug, Clone, PartialEq)]
pub enum EstimatorSpec {
    Itn,
    Cdd,
    UnigramPpl,
    Random,
    Linear(PathBuf),
    External(PathBuf),
}

impl FromStr for EstimatorSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let spec = match s.split_once(':') {
            None => match s {
                "itn" => EstimatorSpec::Itn,
                "cdd" => EstimatorSpec::Cdd,
                "unigram-ppl" => EstimatorSpec::UnigramPpl,
                "random" => EstimatorSpec::Random,
                _ => return Err(format!("unknown estimator `{s}`")),
            },
            Some(("linear", path)) if !path.is_empty() => EstimatorSpec::Linear(path.into()),
            Some(("external", path)) if !path.is_empty() => EstimatorSpec::External(path.into()),
            _ => {
                return Err(format!(
                    "unknown estimator `{s}` (expected linear:<path> or external:<path>)"
                ))
            }
        };
        Ok(spec)
    }
}

impl fmt::Display for EstimatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimatorSpec::Itn => f.write_str("itn"),
            EstimatorSpec::Cdd => f.write_str("cdd"),
            EstimatorSpec::UnigramPpl => f.write_str("unigram-ppl"),
            EstimatorSpec::Random => f.write_str("random"),
            EstimatorSpec::Linear(p) => write!(f, "linear:{}", p.display()),
            EstimatorSpec::External(p) => write!(f, "external:{}", p.display()),
        }
    }
}

impl Serialize for EstimatorSpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl EstimatorSpec {
    pub fn input(&self) -> Option<&Path> {
        match self {
            EstimatorSpec::Linear(p) | EstimatorSpec::External(p) => Some(p),
            _ => None,
        }
    }
}

/// Scores one tokenized corpus with any number of estimators, building the
/// collection language model at most once.
pub struct Scorer<'a> {
    passages: &'a [TokenizedPassage],
    options: &'a EstimatorOptions,
    lm: OnceCell<UnigramLM>,
}

impl<'a> Scorer<'a> {
    pub fn new(passages: &'a [TokenizedPassage], options: &'a EstimatorOptions) -> Self {
        Scorer {
            passages,
            options,
            lm: OnceCell::new(),
        }
    }

    fn lm(&self) -> Result<UnigramLM> {
        if let Some(lm) = self.lm.get() {
            return Ok(lm.clone());
        }
        let stats = collect_stats(self.passages)?;
        let lm = UnigramLM::from_stats(&stats)?;
        Ok(self.lm.get_or_init(|| lm).clone())
    }

    pub fn score(&self, spec: &EstimatorSpec) -> Result<QualityScoreSet> {
        let estimator = match spec {
            EstimatorSpec::Itn => Estimator::Itn,
            EstimatorSpec::Cdd => Estimator::Cdd {
                lm: self.lm()?,
                cfg: CddConfig::new(self.options.lambda)?,
            },
            EstimatorSpec::UnigramPpl => Estimator::UnigramPpl { lm: self.lm()? },
            EstimatorSpec::Random => Estimator::Random {
                seed: self.options.seed,
            },
            EstimatorSpec::Linear(path) => Estimator::Linear {
                model: LinearQualityModel::load(path).with_context(|| format!("loading model {}", path.display()))?,
            },
            EstimatorSpec::External(path) => return self.external(path),
        };
        score_corpus(self.passages, &estimator).with_context(|| format!("scoring with {spec}"))
    }

    /// External scores restricted to the corpus, in corpus order.
    fn external(&self, path: &Path) -> Result<QualityScoreSet> {
        let all = load_external_scores(path).with_context(|| format!("reading scores {}", path.display()))?;
        let mut set = QualityScoreSet::new(all.estimator.clone());
        for p in self.passages {
            let Some(score) = all.get(&p.docno) else {
                bail!("{}: no score for passage `{}`", path.display(), p.docno);
            };
            set.insert(p.docno.clone(), score)?;
        }
        Ok(set)
    }
}
