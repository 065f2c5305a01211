//! Passage ingestion, tokenization and collection statistics.
//!
//! Tokenization lowercases, splits on every run of characters that are not
//! Unicode alphanumeric (`char::is_alphanumeric`, i.e. the `Alphabetic` and
//! `Numeric` properties), and Porter-stems each token. No stopwords are
//! removed.

pub mod porter;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Lines, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    pub docno: String,
    pub text: String,
}

impl Passage {
    pub fn new(docno: impl Into<String>, text: impl Into<String>) -> Self {
        Passage {
            docno: docno.into(),
            text: text.into(),
        }
    }

    pub fn tokenize(&self) -> TokenizedPassage {
        TokenizedPassage {
            docno: self.docno.clone(),
            terms: tokenize(&self.text),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedPassage {
    pub docno: String,
    pub terms: Vec<String>,
}

impl TokenizedPassage {
    pub fn new(docno: impl Into<String>, terms: Vec<String>) -> Self {
        TokenizedPassage {
            docno: docno.into(),
            terms,
        }
    }

    /// Build from already-normalized terms, e.g. in tests and fixtures.
    pub fn from_terms<S: AsRef<str>>(docno: impl Into<String>, terms: &[S]) -> Self {
        Self::new(docno, terms.iter().map(|t| t.as_ref().to_owned()).collect())
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }
}

/// Lowercase, split on non-alphanumeric runs, Porter-stem.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|tok| !tok.is_empty())
        .map(porter::stem)
        .filter(|term| !term.is_empty())
        .collect()
}

/// Tokenize every passage in parallel, preserving order.
pub fn tokenize_all(passages: &[Passage]) -> Vec<TokenizedPassage> {
    passages.par_iter().map(Passage::tokenize).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Jsonl,
    Tsv,
}

impl CorpusFormat {
    /// Guess from the file extension; anything but `.tsv` is treated as jsonl.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("tsv") => CorpusFormat::Tsv,
            _ => CorpusFormat::Jsonl,
        }
    }
}

impl FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jsonl" => Ok(CorpusFormat::Jsonl),
            "tsv" => Ok(CorpusFormat::Tsv),
            other => Err(Error::InvalidConfig(format!("unknown corpus format `{other}`"))),
        }
    }
}

impl fmt::Display for CorpusFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CorpusFormat::Jsonl => "jsonl",
            CorpusFormat::Tsv => "tsv",
        })
    }
}

/// Streaming corpus reader. Yields passages in file order and rejects
/// malformed lines and repeated docnos.
pub struct PassageReader<R> {
    lines: Lines<R>,
    format: CorpusFormat,
    line_no: usize,
    seen: HashSet<String>,
}

impl<R: BufRead> PassageReader<R> {
    pub fn new(reader: R, format: CorpusFormat) -> Self {
        PassageReader {
            lines: reader.lines(),
            format,
            line_no: 0,
            seen: HashSet::new(),
        }
    }

    fn parse_line(&self, line: &str) -> Result<Passage> {
        let passage = match self.format {
            CorpusFormat::Jsonl => {
                serde_json::from_str::<Passage>(line).map_err(|e| Error::parse(self.line_no, e.to_string()))?
            }
            CorpusFormat::Tsv => {
                let (docno, text) = line
                    .split_once('\t')
                    .ok_or_else(|| Error::parse(self.line_no, "expected docno<TAB>text"))?;
                Passage::new(docno, text)
            }
        };
        if passage.docno.is_empty() {
            return Err(Error::parse(self.line_no, "empty docno"));
        }
        Ok(passage)
    }
}

impl<R: BufRead> Iterator for PassageReader<R> {
    type Item = Result<Passage>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(line) => line,
                Err(e) => return Some(Err(Error::parse(self.line_no + 1, e.to_string()))),
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            let passage = match self.parse_line(&line) {
                Ok(p) => p,
                Err(e) => return Some(Err(e)),
            };
            if !self.seen.insert(passage.docno.clone()) {
                return Some(Err(Error::DuplicateDocno(passage.docno)));
            }
            return Some(Ok(passage));
        }
    }
}

pub fn load_corpus(path: impl AsRef<Path>, format: CorpusFormat) -> Result<PassageReader<BufReader<File>>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(PassageReader::new(BufReader::new(file), format))
}

/// Load the whole corpus, picking the format from the file extension.
pub fn read_corpus(path: impl AsRef<Path>) -> Result<Vec<Passage>> {
    let path = path.as_ref();
    load_corpus(path, CorpusFormat::from_path(path))?.collect()
}

pub fn write_corpus(path: impl AsRef<Path>, passages: &[Passage], format: CorpusFormat) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for p in passages {
        match format {
            CorpusFormat::Jsonl => {
                serde_json::to_writer(&mut out, p)?;
                writeln!(out).map_err(|e| Error::io(path, e))?;
            }
            CorpusFormat::Tsv => writeln!(out, "{}\t{}", p.docno, p.text).map_err(|e| Error::io(path, e))?,
        }
    }
    out.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CollectionStats {
    pub num_passages: u64,
    pub total_terms: u64,
    pub term_freq: HashMap<String, u64>,
    pub doc_freq: HashMap<String, u64>,
    pub doc_len: HashMap<String, u64>,
}

impl CollectionStats {
    pub fn vocabulary_size(&self) -> usize {
        self.term_freq.len()
    }
}

/// Partial accumulator for [`CollectionStats`]; shards can be merged.
#[derive(Debug, Clone, Default)]
pub struct StatsAccumulator {
    stats: CollectionStats,
}

impl StatsAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, passage: &TokenizedPassage) {
        let stats = &mut self.stats;
        stats.num_passages += 1;
        stats.total_terms += passage.terms.len() as u64;
        stats.doc_len.insert(passage.docno.clone(), passage.terms.len() as u64);
        let mut distinct: HashSet<&str> = HashSet::new();
        for term in &passage.terms {
            *stats.term_freq.entry(term.clone()).or_default() += 1;
            if distinct.insert(term) {
                *stats.doc_freq.entry(term.clone()).or_default() += 1;
            }
        }
    }

    pub fn merge(mut self, other: StatsAccumulator) -> Self {
        let (a, b) = (&mut self.stats, other.stats);
        a.num_passages += b.num_passages;
        a.total_terms += b.total_terms;
        for (t, n) in b.term_freq {
            *a.term_freq.entry(t).or_default() += n;
        }
        for (t, n) in b.doc_freq {
            *a.doc_freq.entry(t).or_default() += n;
        }
        a.doc_len.extend(b.doc_len);
        self
    }

    pub fn finish(self) -> Result<CollectionStats> {
        if self.stats.num_passages == 0 {
            return Err(Error::EmptyCorpus);
        }
        Ok(self.stats)
    }
}

pub fn collect_stats<'a, I>(corpus: I) -> Result<CollectionStats>
where
    I: IntoIterator<Item = &'a TokenizedPassage>,
{
    let mut acc = StatsAccumulator::new();
    for p in corpus {
        acc.add(p);
    }
    acc.finish()
}
