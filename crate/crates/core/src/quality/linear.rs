//! Pointwise supervised quality model: logistic regression over hashed
//! term-frequency features, trained on (query, relevant, non-relevant)
//! triples with the query discarded.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use xxhash_rust::xxh3::xxh3_64_with_seed;

use crate::corpus::{tokenize, TokenizedPassage};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingTriple {
    pub query: String,
    pub pos_text: String,
    pub neg_text: String,
}

impl TrainingTriple {
    pub fn new(query: impl Into<String>, pos: impl Into<String>, neg: impl Into<String>) -> Self {
        TrainingTriple {
            query: query.into(),
            pos_text: pos.into(),
            neg_text: neg.into(),
        }
    }
}

/// Read `query<TAB>pos_text<TAB>neg_text` lines.
pub fn load_triples(path: impl AsRef<Path>) -> Result<Vec<TrainingTriple>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut triples = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.splitn(3, '\t');
        let (Some(q), Some(pos), Some(neg)) = (fields.next(), fields.next(), fields.next()) else {
            return Err(Error::parse(i + 1, "expected query<TAB>pos_text<TAB>neg_text"));
        };
        if pos.is_empty() || neg.is_empty() {
            return Err(Error::parse(i + 1, "empty passage text in triple"));
        }
        triples.push(TrainingTriple::new(q, pos, neg));
    }
    Ok(triples)
}

pub fn write_triples(path: impl AsRef<Path>, triples: &[TrainingTriple]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for t in triples {
        writeln!(out, "{}\t{}\t{}", t.query, t.pos_text, t.neg_text).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearConfig {
    pub feature_dim: usize,
    pub digest_seed: u64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    pub rng_seed: u64,
}

impl Default for LinearConfig {
    fn default() -> Self {
        LinearConfig {
            feature_dim: 1 << 18,
            digest_seed: 0,
            learning_rate: 0.1,
            epochs: 1,
            l2: 0.0,
            rng_seed: 0,
        }
    }
}

impl LinearConfig {
    fn validate(&self) -> Result<()> {
        if self.feature_dim == 0 || self.feature_dim > u32::MAX as usize {
            return Err(Error::InvalidConfig("feature_dim must be in 1..=u32::MAX".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig("learning_rate must be positive".into()));
        }
        if !(self.l2.is_finite() && self.l2 >= 0.0) {
            return Err(Error::InvalidConfig("l2 must be non-negative".into()));
        }
        Ok(())
    }
}

/// Sparse feature vector, sorted by slot, one entry per occupied slot.
pub type Features = Vec<(u32, f64)>;

/// Term-frequency counts hashed into `dim` slots.
pub fn featurize<S: AsRef<str>>(terms: &[S], dim: usize, seed: u64) -> Features {
    let mut slots: Vec<u32> = terms
        .iter()
        .map(|t| (xxh3_64_with_seed(t.as_ref().as_bytes(), seed) % dim as u64) as u32)
        .collect();
    slots.sort_unstable();
    let mut features: Features = Vec::new();
    for slot in slots {
        match features.last_mut() {
            Some((s, n)) if *s == slot => *n += 1.0,
            _ => features.push((slot, 1.0)),
        }
    }
    features
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearQualityModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub feature_dim: usize,
    pub digest_seed: u64,
}

/// On-disk form: only non-zero weights are stored.
#[derive(Serialize, Deserialize)]
struct StoredModel {
    feature_dim: usize,
    digest_seed: u64,
    bias: f64,
    weights: Vec<(u32, f64)>,
}

impl LinearQualityModel {
    pub fn zeros(feature_dim: usize, digest_seed: u64) -> Self {
        LinearQualityModel {
            weights: vec![0.0; feature_dim],
            bias: 0.0,
            feature_dim,
            digest_seed,
        }
    }

    pub fn features<S: AsRef<str>>(&self, terms: &[S]) -> Features {
        featurize(terms, self.feature_dim, self.digest_seed)
    }

    pub fn logit(&self, features: &Features) -> f64 {
        self.bias + features.iter().map(|&(i, x)| self.weights[i as usize] * x).sum::<f64>()
    }

    pub fn score_terms<S: AsRef<str>>(&self, terms: &[S]) -> f64 {
        sigmoid(self.logit(&self.features(terms)))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let stored = StoredModel {
            feature_dim: self.feature_dim,
            digest_seed: self.digest_seed,
            bias: self.bias,
            weights: self
                .weights
                .iter()
                .enumerate()
                .filter(|(_, w)| **w != 0.0)
                .map(|(i, &w)| (i as u32, w))
                .collect(),
        };
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(BufWriter::new(file), &stored)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let stored: StoredModel = serde_json::from_reader(BufReader::new(file))?;
        let mut model = LinearQualityModel::zeros(stored.feature_dim, stored.digest_seed);
        model.bias = stored.bias;
        for (i, w) in stored.weights {
            let slot = model
                .weights
                .get_mut(i as usize)
                .ok_or_else(|| Error::InvalidConfig(format!("weight index {i} out of range")))?;
            *slot = w;
        }
        if !model.bias.is_finite() || model.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidConfig("model contains non-finite weights".into()));
        }
        Ok(model)
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Logistic loss `-[y log σ(z) + (1-y) log(1-σ(z))]`, evaluated stably.
fn logistic_loss(z: f64, target: f64) -> f64 {
    let softplus = if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    };
    softplus - target * z
}

/// Sigmoid of `weights·features + bias`; an empty passage scores `σ(bias)`.
pub fn score_linear(model: &LinearQualityModel, p: &TokenizedPassage) -> f64 {
    model.score_terms(&p.terms)
}

struct Example {
    features: Features,
    target: f64,
}

fn examples<I>(triples: I, cfg: &LinearConfig) -> Vec<Example>
where
    I: IntoIterator<Item = TrainingTriple>,
{
    let mut out = Vec::new();
    for t in triples {
        for (text, target) in [(&t.pos_text, 1.0), (&t.neg_text, 0.0)] {
            out.push(Example {
                features: featurize(&tokenize(text), cfg.feature_dim, cfg.digest_seed),
                target,
            });
        }
    }
    out
}

/// SGD on the pointwise logistic objective. Each epoch visits every
/// positive and negative once in an order shuffled by `rng_seed`.
/// L2 decay is applied lazily to the weights touched by each step.
pub fn train_linear<I>(triples: I, cfg: &LinearConfig) -> Result<LinearQualityModel>
where
    I: IntoIterator<Item = TrainingTriple>,
{
    cfg.validate()?;
    let data = examples(triples, cfg);
    if data.is_empty() {
        return Err(Error::InsufficientData("no training triples".into()));
    }
    let mut model = LinearQualityModel::zeros(cfg.feature_dim, cfg.digest_seed);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut step = 0;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let ex = &data[i];
            let z = model.logit(&ex.features);
            let loss = logistic_loss(z, ex.target);
            if !loss.is_finite() {
                return Err(Error::Divergence { step, loss });
            }
            let grad = sigmoid(z) - ex.target;
            let mut finite = true;
            for &(slot, x) in &ex.features {
                let w = &mut model.weights[slot as usize];
                *w -= cfg.learning_rate * (grad * x + cfg.l2 * *w);
                finite &= w.is_finite();
            }
            model.bias -= cfg.learning_rate * grad;
            if !(finite && model.bias.is_finite()) {
                return Err(Error::Divergence { step, loss });
            }
            step += 1;
        }
    }
    Ok(model)
}

/// Mean logistic loss of `model` over the positives and negatives of `triples`.
pub fn mean_training_loss<'a, I>(model: &LinearQualityModel, triples: I) -> f64
where
    I: IntoIterator<Item = &'a TrainingTriple>,
{
    let mut total = 0.0;
    let mut n = 0usize;
    for t in triples {
        for (text, target) in [(&t.pos_text, 1.0), (&t.neg_text, 0.0)] {
            total += logistic_loss(model.logit(&model.features(&tokenize(text))), target);
            n += 1;
        }
    }
    total / n.max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_model_scores_half() {
        let m = LinearQualityModel::zeros(16, 0);
        assert_eq!(score_linear(&m, &TokenizedPassage::from_terms("d", &["a", "b"])), 0.5);
        assert_eq!(
            score_linear(&m, &TokenizedPassage::from_terms("d", &[] as &[&str])),
            0.5
        );
    }

    #[test]
    fn zero_epochs_keeps_zero_init() {
        let cfg = LinearConfig {
            epochs: 0,
            feature_dim: 64,
            ..Default::default()
        };
        let m = train_linear([TrainingTriple::new("q", "good text", "bad bad")], &cfg).unwrap();
        assert_eq!(m.score_terms(&["good", "text"]), 0.5);
    }

    #[test]
    fn separable_singleton() {
        let cfg = LinearConfig {
            epochs: 100,
            feature_dim: 1024,
            ..Default::default()
        };
        let triple = TrainingTriple::new("q", "useful informative answer", "spam spam spam buy");
        let m = train_linear(vec![triple.clone(); 3], &cfg).unwrap();
        let pos = m.score_terms(&tokenize(&triple.pos_text));
        let neg = m.score_terms(&tokenize(&triple.neg_text));
        assert!(pos > neg, "{pos} <= {neg}");
        let zero = LinearQualityModel::zeros(1024, 0);
        assert!(mean_training_loss(&m, [&triple]) < mean_training_loss(&zero, [&triple]));
    }

    #[test]
    fn hand_computed_fixture() {
        let mut m = LinearQualityModel::zeros(4, 7);
        m.weights = vec![0.5, -1.25, 2.0, 0.125];
        m.bias = -0.3;
        let features: Features = vec![(0, 2.0), (1, 1.0), (3, 4.0)];
        // 0.5*2 - 1.25*1 + 0.125*4 - 0.3 = -0.05
        let z = -0.05f64;
        let expected = 1.0 / (1.0 + (-z).exp());
        assert!((sigmoid(m.logit(&features)) - expected).abs() < 1e-12);
    }

    #[test]
    fn featurize_counts_and_is_deterministic() {
        let f = featurize(&["a", "b", "a"], 1 << 18, 3);
        assert_eq!(f.iter().map(|(_, n)| n).sum::<f64>(), 3.0);
        assert!(f.windows(2).all(|w| w[0].0 < w[1].0));
        assert_eq!(f, featurize(&["a", "a", "b"], 1 << 18, 3));
        let single = featurize(&["x"; 5], 8, 0);
        assert_eq!(single.len(), 1);
        assert_eq!(single[0].1, 5.0);
    }

    #[test]
    fn persistence_round_trip() {
        let mut m = LinearQualityModel::zeros(32, 9);
        m.weights[3] = 0.25;
        m.weights[31] = -1.5e-7;
        m.bias = 0.1;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        m.save(&path).unwrap();
        assert_eq!(LinearQualityModel::load(&path).unwrap(), m);
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = LinearConfig {
            feature_dim: 0,
            ..Default::default()
        };
        assert!(train_linear([TrainingTriple::new("q", "a", "b")], &cfg).is_err());
        assert!(train_linear(Vec::new(), &LinearConfig::default()).is_err());
    }

    #[test]
    fn divergence_reports_step() {
        let cfg = LinearConfig {
            learning_rate: 1e308,
            epochs: 50,
            feature_dim: 8,
            ..Default::default()
        };
        let triple = TrainingTriple::new("q", "a b c d", "a a a a a a");
        match train_linear(vec![triple; 4], &cfg) {
            Err(Error::Divergence { step, .. }) => assert!(step < 8),
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
