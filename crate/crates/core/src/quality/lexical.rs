//! Corpus-statistics estimators: information-to-noise ratio, collection
//! document distance, and unigram perplexity.

use std::collections::{HashMap, HashSet};

use crate::corpus::{CollectionStats, TokenizedPassage};
use crate::error::{Error, Result};

/// Distinct terms over total terms.
pub fn itn(p: &TokenizedPassage) -> Result<f64> {
    if p.is_empty() {
        return Err(Error::EmptyPassage(p.docno.clone()));
    }
    let distinct: HashSet<&str> = p.terms.iter().map(String::as_str).collect();
    Ok(distinct.len() as f64 / p.terms.len() as f64)
}

pub const DEFAULT_LAMBDA: f64 = 0.99;

/// Jelinek-Mercer weight given to the passage model when smoothing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CddConfig {
    lambda: f64,
}

impl CddConfig {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&lambda) {
            return Err(Error::InvalidConfig(format!("lambda must lie in [0, 1), got {lambda}")));
        }
        Ok(CddConfig { lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

impl Default for CddConfig {
    fn default() -> Self {
        CddConfig { lambda: DEFAULT_LAMBDA }
    }
}

/// Maximum-likelihood unigram model of the collection.
#[derive(Debug, Clone)]
pub struct UnigramLM {
    prob: HashMap<String, f64>,
}

impl UnigramLM {
    pub fn from_stats(stats: &CollectionStats) -> Result<Self> {
        if stats.total_terms == 0 {
            return Err(Error::EmptyCorpus);
        }
        let total = stats.total_terms as f64;
        let prob = stats
            .term_freq
            .iter()
            .map(|(t, &n)| (t.clone(), n as f64 / total))
            .collect();
        Ok(UnigramLM { prob })
    }

    /// Build from explicit probabilities. Callers are responsible for
    /// normalization.
    pub fn from_probabilities(prob: HashMap<String, f64>) -> Self {
        UnigramLM { prob }
    }

    pub fn prob(&self, term: &str) -> Option<f64> {
        self.prob.get(term).copied()
    }

    pub fn vocabulary(&self) -> impl Iterator<Item = &str> {
        self.prob.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.prob.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prob.is_empty()
    }

    fn require(&self, term: &str) -> Result<f64> {
        self.prob(term)
            .ok_or_else(|| Error::MissingTerm { term: term.to_owned() })
    }
}

fn term_counts(p: &TokenizedPassage) -> HashMap<&str, usize> {
    let mut counts = HashMap::new();
    for t in &p.terms {
        *counts.entry(t.as_str()).or_insert(0) += 1;
    }
    counts
}

/// KL divergence from the collection model to the smoothed passage model,
/// natural log. Quality is the negation.
///
/// Terms absent from the passage all share the ratio `1 / (1 - lambda)`, so
/// their contribution is folded into one closed-form remainder over the
/// collection mass the passage does not cover.
pub fn cdd(p: &TokenizedPassage, lm: &UnigramLM, cfg: CddConfig) -> Result<f64> {
    if p.is_empty() {
        return Err(Error::EmptyPassage(p.docno.clone()));
    }
    let lambda = cfg.lambda;
    let len = p.terms.len() as f64;
    let mut present = 0.0;
    let mut covered = 0.0;
    for (term, count) in term_counts(p) {
        let pc = lm.require(term)?;
        let pd = count as f64 / len;
        present += pc * (pc / (lambda * pd + (1.0 - lambda) * pc)).ln();
        covered += pc;
    }
    let absent_mass = (1.0 - covered).max(0.0);
    let remainder = absent_mass * (1.0 / (1.0 - lambda)).ln();
    Ok((present + remainder).max(0.0))
}

/// `exp` of the mean negative log-probability under context-free unigram
/// probabilities. Quality is the negation.
pub fn unigram_perplexity(p: &TokenizedPassage, lm: &UnigramLM) -> Result<f64> {
    if p.is_empty() {
        return Err(Error::EmptyPassage(p.docno.clone()));
    }
    let mut nll = 0.0;
    for term in &p.terms {
        nll -= lm.require(term)?.ln();
    }
    Ok((nll / p.terms.len() as f64).exp())
}
