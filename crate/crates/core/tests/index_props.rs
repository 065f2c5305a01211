use std::collections::HashSet;

use proptest::prelude::*;
use qprune::corpus::TokenizedPassage;
use qprune::index::*;
use qprune::pruning::{plan, PruneSpec};
use qprune::quality::{random_quality, QualityScoreSet};
use qprune::synth::{generate, SynthConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

mod common;

fn tp(docno: &str, terms: &[&str]) -> TokenizedPassage {
    TokenizedPassage::from_terms(docno, terms)
}

fn score_of(list: &RankedList, docno: &str) -> f64 {
    list.results.iter().find(|r| r.docno == docno).map(|r| r.score).unwrap()
}

#[test]
fn bm25_three_document_fixture() {
    let docs = [
        tp("d0", &["x", "a"]),
        tp("d1", &["x", "x", "b", "c"]),
        tp("d2", &["x", "d", "e", "f", "g", "h"]),
    ];
    let index = build_index(&docs).unwrap();
    assert_eq!(index.avgdl(), 4.0);
    let list = bm25_search(&index, "q", "x", 10, Bm25Params::default());
    // N = 3, df = 3, avgdl = 4, k1 = 1.2, b = 0.75.
    let idf = (1.0f64 + 0.5 / 3.5).ln();
    let expected = [
        ("d1", idf * 4.4 / 3.2),
        ("d0", idf * 2.2 / 1.75),
        ("d2", idf * 2.2 / 2.65),
    ];
    assert_eq!(list.docnos().collect::<Vec<_>>(), ["d1", "d0", "d2"]);
    for (d, want) in expected {
        assert!((score_of(&list, d) - want).abs() < 1e-9, "{d}");
    }
}

fn fixture_strategy() -> impl Strategy<Value = Vec<Vec<u8>>> {
    prop::collection::vec(prop::collection::vec(0u8..6, 2..12), 2..15)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    /// Turning one other token of a document into the query term raises its
    /// score: tf grows while dl, N, df and avgdl stay fixed.
    #[test]
    fn score_increases_with_tf(docs in fixture_strategy(), pick in any::<prop::sample::Index>()) {
        let docs: Vec<Vec<String>> = docs
            .iter()
            .map(|d| d.iter().map(|t| format!("w{t}")).collect())
            .collect();
        let candidates: Vec<usize> = (0..docs.len())
            .filter(|&i| docs[i].iter().any(|t| t == "w0") && docs[i].iter().any(|t| t != "w0"))
            .collect();
        prop_assume!(!candidates.is_empty());
        let target = candidates[pick.index(candidates.len())];
        let build = |docs: &[Vec<String>]| {
            let passages: Vec<TokenizedPassage> = docs
                .iter()
                .enumerate()
                .map(|(i, d)| TokenizedPassage::new(format!("d{i:02}"), d.clone()))
                .collect();
            build_index(&passages).unwrap()
        };
        let before = bm25_search(&build(&docs), "q", "w0", docs.len(), Bm25Params::default());
        let mut bumped = docs.clone();
        let slot = bumped[target].iter().position(|t| t != "w0").unwrap();
        bumped[target][slot] = "w0".into();
        let after = bm25_search(&build(&bumped), "q", "w0", docs.len(), Bm25Params::default());
        let name = format!("d{target:02}");
        prop_assert!(score_of(&after, &name) > score_of(&before, &name));
    }

    #[test]
    fn results_sorted_and_bounded(docs in fixture_strategy(), k in 1usize..8) {
        let passages: Vec<TokenizedPassage> = docs
            .iter()
            .enumerate()
            .map(|(i, d)| TokenizedPassage::new(format!("d{i:02}"), d.iter().map(|t| format!("w{t}")).collect()))
            .collect();
        let index = build_index(&passages).unwrap();
        let list = bm25_search(&index, "q", "w1 w2 w2", k, Bm25Params::default());
        prop_assert!(list.results.len() <= k);
        for w in list.results.windows(2) {
            prop_assert!(w[0].score > w[1].score || (w[0].score == w[1].score && w[0].docno < w[1].docno));
        }
    }
}

#[test]
fn postings_equal_distinct_terms_per_document() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let passages: Vec<TokenizedPassage> = (0..1000)
        .map(|i| TokenizedPassage::new(format!("d{i}"), common::random_terms(&mut rng, 300, 25)))
        .collect();
    let index = build_index(&passages).unwrap();
    let distinct: u64 = passages
        .iter()
        .map(|p| p.terms.iter().collect::<HashSet<_>>().len() as u64)
        .sum();
    let stats = index_stats(&index);
    assert_eq!(stats.num_postings, distinct);
    assert_eq!(stats.num_docs, 1000);
    assert_eq!(stats.total_terms, 25_000);
    let by_df: u64 = index.terms().map(|t| index.doc_freq(t) as u64).sum();
    assert_eq!(by_df, distinct);
    for t in index.terms() {
        assert!(index.postings(t).windows(2).all(|w| w[0].doc < w[1].doc));
    }
}

fn uniform_corpus() -> Vec<TokenizedPassage> {
    let c = generate(&SynthConfig {
        num_passages: 4_000,
        num_queries: 200,
        passage_len_range: (40, 40),
        ..Default::default()
    })
    .unwrap();
    c.passages.iter().map(|p| p.tokenize()).collect()
}

fn random_scores(passages: &[TokenizedPassage]) -> QualityScoreSet {
    QualityScoreSet::from_pairs(
        "random",
        passages.iter().map(|p| (p.docno.clone(), random_quality(&p.docno, 3))),
    )
    .unwrap()
}

#[test]
fn half_pruned_index_has_about_half_the_postings() {
    let passages = uniform_corpus();
    let full = index_stats(&build_index(&passages).unwrap()).num_postings as f64;
    let m = plan(&random_scores(&passages), PruneSpec::Fraction(0.5)).unwrap();
    let pruned = m.pruned_set();
    let half = build_index(passages.iter().filter(|p| !pruned.contains(p.docno.as_str()))).unwrap();
    let got = index_stats(&half).num_postings as f64;
    assert!((got - full / 2.0).abs() / (full / 2.0) < 0.05, "{got} vs {full}");
}

#[test]
fn pruned_index_is_not_slower() {
    let c = generate(&SynthConfig {
        num_passages: 8_000,
        num_queries: 300,
        ..Default::default()
    })
    .unwrap();
    let passages: Vec<TokenizedPassage> = c.passages.iter().map(|p| p.tokenize()).collect();
    // Longer queries make each search long enough to time reliably.
    let queries: Vec<Query> = c
        .queries
        .iter()
        .map(|q| Query::new(q.qid.clone(), format!("{} t0000 t0001 t0002 t0003 t0005", q.text)))
        .collect();
    let full = build_index(&passages).unwrap();
    let m = plan(&random_scores(&passages), PruneSpec::Fraction(0.75)).unwrap();
    let pruned = m.pruned_set();
    let small = build_index(passages.iter().filter(|p| !pruned.contains(p.docno.as_str()))).unwrap();
    let params = Bm25Params::default();
    let t_full = timed_search(&full, &queries, 10, params, 3).unwrap();
    let t_small = timed_search(&small, &queries, 10, params, 3).unwrap();
    assert!(
        t_small.latency.median_ms <= t_full.latency.median_ms * 1.25 + 0.01,
        "pruned {} ms vs full {} ms",
        t_small.latency.median_ms,
        t_full.latency.median_ms
    );
    assert_eq!(t_full.runs, search_all(&full, &queries, 10, params));
}

#[test]
fn timed_search_single_repetition() {
    let docs = [qprune::Passage::new("d0", "apple").tokenize()];
    let index = build_index(&docs).unwrap();
    let q = [Query::new("q1", "apple")];
    let t = timed_search(&index, &q, 5, Bm25Params::default(), 1).unwrap();
    assert_eq!(t.latency.repetitions, 1);
    assert_eq!(t.runs[0].docnos().collect::<Vec<_>>(), ["d0"]);
    assert!(timed_search(&index, &q, 5, Bm25Params::default(), 0).is_err());
}

#[test]
fn index_and_run_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let docs = [tp("d0", &["a", "b"]), tp("d1", &["a", "a", "c"])];
    let index = build_index(&docs).unwrap();
    let path = dir.path().join("index.json");
    index.save(&path).unwrap();
    assert_eq!(InvertedIndex::load(&path).unwrap(), index);

    let runs = search_all(
        &index,
        &[Query::new("q1", "a"), Query::new("q2", "c b")],
        10,
        Bm25Params::default(),
    );
    let run_path = dir.path().join("run.txt");
    write_run(&run_path, &runs, "bm25").unwrap();
    let back = load_run(&run_path).unwrap();
    assert_eq!(back.len(), 2);
    for (a, b) in runs.iter().zip(&back) {
        assert_eq!(a.qid, b.qid);
        assert_eq!(a.docnos().collect::<Vec<_>>(), b.docnos().collect::<Vec<_>>());
    }
}
