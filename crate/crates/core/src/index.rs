//! In-memory inverted index with exhaustive document-at-a-time BM25.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::corpus::{tokenize, TokenizedPassage};
use crate::error::{Error, Result};

/// Byte costs behind [`IndexStats::estimated_bytes`].
pub const BYTES_PER_POSTING: u64 = 8;
pub const BYTES_PER_LEXICON_ENTRY: u64 = 16;
pub const BYTES_PER_DOC_LENGTH: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvertedIndex {
    /// Postings sorted by internal doc id; doc frequency is the list length.
    lexicon: HashMap<String, Vec<Posting>>,
    doc_lengths: Vec<u32>,
    docnos: Vec<String>,
    avgdl: f64,
    total_terms: u64,
}

impl InvertedIndex {
    pub fn num_docs(&self) -> usize {
        self.docnos.len()
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.lexicon.get(term).map_or(0, Vec::len)
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.lexicon.get(term).map_or(&[], Vec::as_slice)
    }

    pub fn docno(&self, doc: u32) -> &str {
        &self.docnos[doc as usize]
    }

    pub fn docnos(&self) -> &[String] {
        &self.docnos
    }

    pub fn doc_length(&self, doc: u32) -> u32 {
        self.doc_lengths[doc as usize]
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.lexicon.keys().map(String::as_str)
    }

    pub fn stats(&self) -> IndexStats {
        index_stats(self)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_reader(BufReader::new(file))?)
    }
}

/// Internal ids follow stream order.
pub fn build_index<'a, I>(passages: I) -> Result<InvertedIndex>
where
    I: IntoIterator<Item = &'a TokenizedPassage>,
{
    let mut lexicon: HashMap<String, Vec<Posting>> = HashMap::new();
    let mut doc_lengths = Vec::new();
    let mut docnos = Vec::new();
    let mut total_terms = 0u64;
    for p in passages {
        let doc =
            u32::try_from(docnos.len()).map_err(|_| Error::InvalidConfig("more than u32::MAX passages".into()))?;
        let mut tfs: HashMap<&str, u32> = HashMap::new();
        for t in &p.terms {
            *tfs.entry(t.as_str()).or_insert(0) += 1;
        }
        for (term, tf) in tfs {
            lexicon.entry(term.to_owned()).or_default().push(Posting { doc, tf });
        }
        doc_lengths.push(p.terms.len() as u32);
        docnos.push(p.docno.clone());
        total_terms += p.terms.len() as u64;
    }
    if docnos.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let avgdl = total_terms as f64 / docnos.len() as f64;
    Ok(InvertedIndex {
        lexicon,
        doc_lengths,
        docnos,
        avgdl,
        total_terms,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Bm25Params {
    pub fn new(k1: f64, b: f64) -> Result<Self> {
        if !(k1.is_finite() && k1 > 0.0) {
            return Err(Error::InvalidConfig(format!("k1 must be > 0, got {k1}")));
        }
        if !(0.0..=1.0).contains(&b) {
            return Err(Error::InvalidConfig(format!("b must lie in [0, 1], got {b}")));
        }
        Ok(Bm25Params { k1, b })
    }
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

/// `ln(1 + (N - df + 0.5) / (df + 0.5))`; positive for every `df <= N`.
pub fn idf(num_docs: usize, df: usize) -> f64 {
    let (n, df) = (num_docs as f64, df as f64);
    (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDoc {
    pub docno: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub qid: String,
    /// Descending score, ties by ascending docno.
    pub results: Vec<ScoredDoc>,
}

impl RankedList {
    pub fn empty(qid: impl Into<String>) -> Self {
        RankedList {
            qid: qid.into(),
            results: Vec::new(),
        }
    }

    pub fn docnos(&self) -> impl Iterator<Item = &str> {
        self.results.iter().map(|r| r.docno.as_str())
    }
}

/// Heap entry ordered so that the *worst* candidate is the maximum.
struct Candidate<'a> {
    score: f64,
    docno: &'a str,
    doc: u32,
}

impl Ord for Candidate<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .score
            .total_cmp(&self.score)
            .then_with(|| self.docno.cmp(other.docno))
    }
}

impl PartialOrd for Candidate<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Candidate<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate<'_> {}

/// Top-`k` BM25 over every document containing a query term. Repeated
/// query terms weight their contribution by query term frequency.
pub fn bm25_search(index: &InvertedIndex, qid: &str, query: &str, k: usize, params: Bm25Params) -> RankedList {
    let mut qtf: BTreeMap<String, u32> = BTreeMap::new();
    for t in tokenize(query) {
        *qtf.entry(t).or_insert(0) += 1;
    }
    let n = index.num_docs();
    // (postings, cursor, weight)
    let mut cursors: Vec<(&[Posting], usize, f64)> = qtf
        .iter()
        .filter_map(|(t, &count)| {
            let postings = index.postings(t);
            (!postings.is_empty()).then(|| (postings, 0, count as f64 * idf(n, postings.len())))
        })
        .collect();

    let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
    if k > 0 {
        let norm_base = 1.0 - params.b;
        let norm_slope = params.b / index.avgdl;
        while let Some(doc) = cursors.iter().filter_map(|(p, c, _)| p.get(*c).map(|x| x.doc)).min() {
            let dl = index.doc_lengths[doc as usize] as f64;
            let norm = params.k1 * (norm_base + norm_slope * dl);
            let mut score = 0.0;
            for (postings, cursor, weight) in cursors.iter_mut() {
                if let Some(p) = postings.get(*cursor) {
                    if p.doc == doc {
                        let tf = p.tf as f64;
                        score += *weight * tf * (params.k1 + 1.0) / (tf + norm);
                        *cursor += 1;
                    }
                }
            }
            let cand = Candidate {
                score,
                docno: &index.docnos[doc as usize],
                doc,
            };
            if heap.len() < k {
                heap.push(cand);
            } else if let Some(worst) = heap.peek() {
                if cand < *worst {
                    heap.pop();
                    heap.push(cand);
                }
            }
        }
    }
    let results = heap
        .into_sorted_vec()
        .into_iter()
        .map(|c| ScoredDoc {
            docno: index.docnos[c.doc as usize].clone(),
            score: c.score,
        })
        .collect();
    RankedList {
        qid: qid.to_owned(),
        results,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexStats {
    pub num_docs: u64,
    pub num_postings: u64,
    pub num_terms: u64,
    pub total_terms: u64,
    pub estimated_bytes: u64,
}

pub fn index_stats(index: &InvertedIndex) -> IndexStats {
    let num_postings: u64 = index.lexicon.values().map(|p| p.len() as u64).sum();
    let num_terms = index.lexicon.len() as u64;
    let num_docs = index.num_docs() as u64;
    IndexStats {
        num_docs,
        num_postings,
        num_terms,
        total_terms: index.total_terms,
        estimated_bytes: BYTES_PER_POSTING * num_postings
            + BYTES_PER_LEXICON_ENTRY * num_terms
            + BYTES_PER_DOC_LENGTH * num_docs,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub qid: String,
    pub text: String,
}

impl Query {
    pub fn new(qid: impl Into<String>, text: impl Into<String>) -> Self {
        Query {
            qid: qid.into(),
            text: text.into(),
        }
    }
}

/// Read `qid<TAB>query_text` lines.
pub fn load_queries(path: impl AsRef<Path>) -> Result<Vec<Query>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut queries = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let (qid, text) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(i + 1, "expected qid<TAB>query"))?;
        queries.push(Query::new(qid, text));
    }
    Ok(queries)
}

pub fn write_queries(path: impl AsRef<Path>, queries: &[Query]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for q in queries {
        writeln!(out, "{}\t{}", q.qid, q.text).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn search_all(index: &InvertedIndex, queries: &[Query], k: usize, params: Bm25Params) -> Vec<RankedList> {
    queries
        .iter()
        .map(|q| bm25_search(index, &q.qid, &q.text, k, params))
        .collect()
}

/// Write `qid Q0 docno rank score tag` lines, ranks starting at 1.
pub fn write_run(path: impl AsRef<Path>, runs: &[RankedList], tag: &str) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for list in runs {
        for (rank, r) in list.results.iter().enumerate() {
            writeln!(out, "{} Q0 {} {} {} {}", list.qid, r.docno, rank + 1, r.score, tag)
                .map_err(|e| Error::io(path, e))?;
        }
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Read a six-column run file. Lists are re-sorted by `(score desc, docno
/// asc)`; queries are returned in first-appearance order.
pub fn load_run(path: impl AsRef<Path>) -> Result<Vec<RankedList>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut order: Vec<String> = Vec::new();
    let mut lists: HashMap<String, Vec<ScoredDoc>> = HashMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 6 {
            return Err(Error::parse(i + 1, "expected `qid Q0 docno rank score tag`"));
        }
        let score: f64 = fields[4]
            .parse()
            .map_err(|_| Error::parse(i + 1, format!("invalid score `{}`", fields[4])))?;
        let qid = fields[0].to_owned();
        if !lists.contains_key(&qid) {
            order.push(qid.clone());
        }
        lists.entry(qid).or_default().push(ScoredDoc {
            docno: fields[2].to_owned(),
            score,
        });
    }
    Ok(order
        .into_iter()
        .map(|qid| {
            let mut results = lists.remove(&qid).unwrap_or_default();
            results.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.docno.cmp(&b.docno)));
            RankedList { qid, results }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    pub repetitions: usize,
    pub num_queries: usize,
    pub mean_ms: f64,
    pub median_ms: f64,
}

#[derive(Debug, Clone)]
pub struct TimedSearch {
    pub latency: LatencySummary,
    pub runs: Vec<RankedList>,
}

/// Run every query once to warm up, then `repetitions` measured passes.
/// Latency statistics are over all (query, pass) samples.
pub fn timed_search(
    index: &InvertedIndex,
    queries: &[Query],
    k: usize,
    params: Bm25Params,
    repetitions: usize,
) -> Result<TimedSearch> {
    if repetitions == 0 {
        return Err(Error::InvalidConfig("repetitions must be >= 1".into()));
    }
    let runs = search_all(index, queries, k, params);
    let mut samples = Vec::with_capacity(repetitions * queries.len());
    for _ in 0..repetitions {
        for q in queries {
            let start = Instant::now();
            let list = bm25_search(index, &q.qid, &q.text, k, params);
            samples.push(start.elapsed().as_secs_f64() * 1e3);
            std::hint::black_box(list);
        }
    }
    let mean_ms = if samples.is_empty() {
        0.0
    } else {
        samples.iter().sum::<f64>() / samples.len() as f64
    };
    samples.sort_by(f64::total_cmp);
    let median_ms = match samples.len() {
        0 => 0.0,
        n if n % 2 == 1 => samples[n / 2],
        n => 0.5 * (samples[n / 2 - 1] + samples[n / 2]),
    };
    Ok(TimedSearch {
        latency: LatencySummary {
            repetitions,
            num_queries: queries.len(),
            mean_ms,
            median_ms,
        },
        runs,
    })
}
