//! Deterministic synthetic corpora with planted quality structure.
//!
//! Three kinds of passage are generated:
//!
//! * **answer** passages (high quality, judged relevant): every answer term
//!   of their query plus text that draws heavily on a small band of
//!   register terms found in no other kind of passage;
//! * **ordinary** passages (high quality, unjudged): Zipf-distributed text
//!   with a share of rare terms;
//! * **low-quality** passages: a few terms repeated 5-20 times (often
//!   another query's answer terms, i.e. keyword stuffing, otherwise common
//!   words) together with
//!   boilerplate n-grams shared across all low-quality passages.
//!
//! Terms are `t` followed by a zero-padded integer, which the Porter stemmer
//! leaves untouched. Rank `r` in the Zipf distribution is term `r`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{write_corpus, CorpusFormat, Passage};
use crate::error::{Error, Result};
use crate::eval::Qrels;
use crate::index::{write_queries, Query};
use crate::quality::{write_triples, TrainingTriple};

const RELEVANT_PER_QUERY: usize = 2;
const REGISTER_SIZE: usize = 100;
const REGISTER_SHARE: f64 = 0.3;
const ORDINARY_RARE_SHARE: f64 = 0.3;
const NUM_BOILERPLATE: usize = 25;
const STUFFING_SHARE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub num_passages: usize,
    pub vocab_size: usize,
    pub low_quality_fraction: f64,
    pub num_queries: usize,
    pub passage_len_range: (usize, usize),
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            num_passages: 10_000,
            vocab_size: 20_000,
            low_quality_fraction: 0.2,
            num_queries: 500,
            passage_len_range: (30, 60),
            seed: 42,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_owned()));
        if self.num_queries == 0 {
            return bad("num_queries must be >= 1");
        }
        if self.vocab_size < 10 {
            return bad("vocab_size must be >= 10");
        }
        if !(0.0..1.0).contains(&self.low_quality_fraction) {
            return bad("low_quality_fraction must lie in [0, 1)");
        }
        let (lo, hi) = self.passage_len_range;
        if lo == 0 || lo > hi {
            return bad("passage_len_range must satisfy 1 <= min <= max");
        }
        if self.num_queries > self.num_high_quality() {
            return Err(Error::InvalidConfig(format!(
                "{} queries need as many high-quality passages, only {} available",
                self.num_queries,
                self.num_high_quality()
            )));
        }
        Ok(())
    }

    pub fn num_low_quality(&self) -> usize {
        (self.low_quality_fraction * self.num_passages as f64).round() as usize
    }

    pub fn num_high_quality(&self) -> usize {
        self.num_passages - self.num_low_quality().min(self.num_passages)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PassageKind {
    Answer,
    Ordinary,
    LowQuality,
}

impl PassageKind {
    pub fn is_high_quality(self) -> bool {
        !matches!(self, PassageKind::LowQuality)
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub passages: Vec<Passage>,
    pub kinds: Vec<PassageKind>,
    pub queries: Vec<Query>,
    pub qrels: Qrels,
    pub triples: Vec<TrainingTriple>,
    /// Docnos used as triple positives; exclude them from intrinsic labels.
    pub train_docnos: Vec<String>,
}

impl SynthCorpus {
    /// Ground truth: `true` for high-quality passages, in corpus order.
    pub fn quality_labels(&self) -> impl Iterator<Item = (&str, bool)> {
        self.passages
            .iter()
            .zip(&self.kinds)
            .map(|(p, k)| (p.docno.as_str(), k.is_high_quality()))
    }

    /// Writes `corpus.jsonl`, `queries.tsv`, `qrels.txt`, `triples.tsv`,
    /// `labels.tsv` and `train_docnos.txt` into `dir`.
    pub fn write_to_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_corpus(dir.join("corpus.jsonl"), &self.passages, CorpusFormat::Jsonl)?;
        write_queries(dir.join("queries.tsv"), &self.queries)?;
        self.qrels.save(dir.join("qrels.txt"))?;
        write_triples(dir.join("triples.tsv"), &self.triples)?;
        let labels: String = self
            .quality_labels()
            .map(|(d, hq)| format!("{d}\t{}\n", u8::from(hq)))
            .collect();
        let path = dir.join("labels.tsv");
        fs::write(&path, labels).map_err(|e| Error::io(&path, e))?;
        let train: String = self.train_docnos.iter().map(|d| format!("{d}\n")).collect();
        let path = dir.join("train_docnos.txt");
        fs::write(&path, train).map_err(|e| Error::io(&path, e))?;
        Ok(())
    }
}

/// Inverse-CDF sampler over ranks with weight `1 / (rank + 1)`.
struct Zipf {
    cdf: Vec<f64>,
}

impl Zipf {
    fn new(n: usize) -> Self {
        let mut acc = 0.0;
        let cdf = (0..n)
            .map(|r| {
                acc += 1.0 / (r + 1) as f64;
                acc
            })
            .collect();
        Zipf { cdf }
    }

    fn sample(&self, rng: &mut impl Rng) -> usize {
        let total = *self.cdf.last().expect("non-empty vocabulary");
        let u = rng.gen::<f64>() * total;
        self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1)
    }
}

struct Vocabulary {
    width: usize,
    size: usize,
}

impl Vocabulary {
    fn term(&self, rank: usize) -> String {
        format!("t{:0width$}", rank, width = self.width)
    }
}

pub fn generate(config: &SynthConfig) -> Result<SynthCorpus> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let vocab = Vocabulary {
        width: (config.vocab_size - 1).to_string().len().max(4),
        size: config.vocab_size,
    };

    // The answer register is a small band of terms reserved for answer
    // passages; every other draw comes from the first `common` ranks.
    let register_size = (vocab.size / 100).clamp(1, REGISTER_SIZE);
    let common = vocab.size - register_size;
    let register: Vec<usize> = (common..vocab.size).collect();
    let zipf = Zipf::new(common);

    // Answer terms come from the rarer half of the common ranks.
    let mut answer_pool: Vec<usize> = (common / 2..common).collect();
    answer_pool.shuffle(&mut rng);
    let mut next_answer = 0;
    let mut answer_terms: Vec<Vec<usize>> = Vec::with_capacity(config.num_queries);
    for _ in 0..config.num_queries {
        let n = rng.gen_range(2..=4).min(answer_pool.len());
        let terms = (0..n)
            .map(|_| {
                let t = answer_pool[next_answer % answer_pool.len()];
                next_answer += 1;
                t
            })
            .collect();
        answer_terms.push(terms);
    }

    let boilerplate: Vec<Vec<usize>> = (0..NUM_BOILERPLATE)
        .map(|_| {
            let n = rng.gen_range(3..=5);
            (0..n).map(|_| rng.gen_range(0..common)).collect()
        })
        .collect();

    let n = config.num_passages;
    let n_lq = config.num_low_quality().min(n);
    let n_answer = (RELEVANT_PER_QUERY * config.num_queries).min(n - n_lq);
    let mut kinds: Vec<PassageKind> = std::iter::repeat_n(PassageKind::LowQuality, n_lq)
        .chain(std::iter::repeat_n(PassageKind::Answer, n_answer))
        .chain(std::iter::repeat_n(PassageKind::Ordinary, n - n_lq - n_answer))
        .collect();
    kinds.shuffle(&mut rng);

    let docno_width = n.saturating_sub(1).to_string().len();
    let (len_lo, len_hi) = config.passage_len_range;
    let mut passages = Vec::with_capacity(n);
    // answer passage slots in corpus order -> query
    let mut answer_slot = 0usize;
    let mut relevant: Vec<Vec<usize>> = vec![Vec::new(); config.num_queries];
    for (i, kind) in kinds.iter().enumerate() {
        let len = rng.gen_range(len_lo..=len_hi);
        let ranks: Vec<usize> = match kind {
            PassageKind::Ordinary => (0..len)
                .map(|_| {
                    if rng.gen_bool(ORDINARY_RARE_SHARE) {
                        rng.gen_range(common / 2..common)
                    } else {
                        zipf.sample(&mut rng)
                    }
                })
                .collect(),
            PassageKind::Answer => {
                let q = answer_slot % config.num_queries;
                answer_slot += 1;
                relevant[q].push(i);
                let mut ranks = answer_terms[q].clone();
                while ranks.len() < len {
                    let r = if rng.gen_bool(REGISTER_SHARE) {
                        register[rng.gen_range(0..register.len())]
                    } else {
                        zipf.sample(&mut rng)
                    };
                    ranks.push(r);
                }
                ranks.shuffle(&mut rng);
                ranks
            }
            PassageKind::LowQuality => {
                let mut ranks = Vec::with_capacity(len);
                for _ in 0..rng.gen_range(1..=2) {
                    ranks.extend(&boilerplate[rng.gen_range(0..boilerplate.len())]);
                }
                let body = len.saturating_sub(ranks.len()).max(1);
                let repeats = rng.gen_range(5..=20);
                let distinct = (body / repeats).max(1);
                let set: Vec<usize> = (0..distinct)
                    .map(|_| {
                        if rng.gen_bool(STUFFING_SHARE) {
                            let q = &answer_terms[rng.gen_range(0..answer_terms.len())];
                            q[rng.gen_range(0..q.len())]
                        } else {
                            zipf.sample(&mut rng)
                        }
                    })
                    .collect();
                ranks.extend((0..body).map(|j| set[j % set.len()]));
                ranks
            }
        };
        let text = ranks.iter().map(|&r| vocab.term(r)).collect::<Vec<_>>().join(" ");
        passages.push(Passage::new(format!("p{:0docno_width$}", i), text));
    }

    let qid_width = (config.num_queries - 1).to_string().len();
    let queries: Vec<Query> = answer_terms
        .iter()
        .enumerate()
        .map(|(q, terms)| {
            let text = terms.iter().map(|&r| vocab.term(r)).collect::<Vec<_>>().join(" ");
            Query::new(format!("q{:0qid_width$}", q), text)
        })
        .collect();

    let mut qrels = Qrels::new();
    for (q, docs) in relevant.iter().enumerate() {
        for &d in docs {
            qrels.insert(queries[q].qid.clone(), passages[d].docno.clone(), 1);
        }
    }

    let low_quality: Vec<usize> = (0..n).filter(|&i| kinds[i] == PassageKind::LowQuality).collect();
    let ordinary: Vec<usize> = (0..n).filter(|&i| kinds[i] == PassageKind::Ordinary).collect();
    let mut triples = Vec::with_capacity(config.num_queries);
    let mut train_docnos = Vec::with_capacity(config.num_queries);
    for (q, docs) in relevant.iter().enumerate() {
        let pos = docs[0];
        let neg = if !low_quality.is_empty() {
            low_quality[rng.gen_range(0..low_quality.len())]
        } else if !ordinary.is_empty() {
            ordinary[rng.gen_range(0..ordinary.len())]
        } else {
            // Every passage answers some query; take one that is not ours.
            match (0..n).find(|i| !docs.contains(i)) {
                Some(i) => i,
                None => continue,
            }
        };
        triples.push(TrainingTriple::new(
            queries[q].text.clone(),
            passages[pos].text.clone(),
            passages[neg].text.clone(),
        ));
        train_docnos.push(passages[pos].docno.clone());
    }

    Ok(SynthCorpus {
        passages,
        kinds,
        queries,
        qrels,
        triples,
        train_docnos,
    })
}

/// Per-kind passage counts, handy for reports.
pub fn kind_counts(corpus: &SynthCorpus) -> BTreeMap<&'static str, usize> {
    let mut counts = BTreeMap::new();
    for k in &corpus.kinds {
        let name = match k {
            PassageKind::Answer => "answer",
            PassageKind::Ordinary => "ordinary",
            PassageKind::LowQuality => "low_quality",
        };
        *counts.entry(name).or_insert(0) += 1;
    }
    counts
}
