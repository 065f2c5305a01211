//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails or overruns its time budget.

use std::collections::{BTreeMap, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use qprune::corpus::{collect_stats, TokenizedPassage};
use qprune::eval::*;
use qprune::index::{bm25_search, build_index, index_stats, Bm25Params, RankedList, ScoredDoc};
use qprune::pruning::{plan, prune_count, PruneSpec};
use qprune::quality::*;
use qprune::sweep::{default_fractions, run_sweep, SweepConfig};
use qprune::synth::{generate, SynthConfig, SynthCorpus};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

mod common;

type Check = fn() -> Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn break_even_table() -> Result<String, String> {
    let encoding = 0.94;
    let rows = [
        (1.46, ">100%"),
        (0.45, "48%"),
        (0.13, "14%"),
        (0.04, "4%"),
        (0.12, "13%"),
        (1.46, ">100%"),
        (1.72, ">100%"),
        (0.94, "100%"),
        (1.14, ">100%"),
    ];
    for (latency, want) in rows {
        let be = break_even(latency, encoding).map_err(|e| e.to_string())?;
        let label = be.label();
        if let Some(pct) = want.strip_suffix('%').and_then(|p| p.parse::<f64>().ok()) {
            ensure((be.fraction * 100.0 - pct).abs() <= 1.0, || {
                format!("{latency}/{encoding} = {:.4}, table says {want}", be.fraction)
            })?;
        }
        ensure(label == want, || {
            format!("{latency}/{encoding} labelled {label}, want {want}")
        })?;
    }
    Ok(format!("{} cells reproduced", rows.len()))
}

fn auc_oracle() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let pairs = common::random_labelled(&mut rng, 200);
        let a = auc(&pairs).map_err(|e| e.to_string())?;
        let roc = roc_curve(&pairs).map_err(|e| e.to_string())?;
        worst = worst
            .max((a - common::auc_pairs(&pairs)).abs())
            .max((common::trapezoid(&roc) - a).abs());
    }
    ensure(worst <= 1e-12, || format!("max error {worst:e}"))?;
    Ok(format!("100 instances, max error {worst:.1e}"))
}

fn cdd_oracle() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let vocab = rng.gen_range(2..=50);
        let docs: Vec<Vec<String>> = (0..rng.gen_range(2..15))
            .map(|_| {
                let len = rng.gen_range(1..30);
                common::random_terms(&mut rng, vocab, len)
            })
            .collect();
        let passages: Vec<TokenizedPassage> = docs
            .iter()
            .enumerate()
            .map(|(i, d)| TokenizedPassage::new(format!("d{i}"), d.clone()))
            .collect();
        let lm =
            UnigramLM::from_stats(&collect_stats(&passages).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let lambda = if rng.gen_bool(0.5) {
            DEFAULT_LAMBDA
        } else {
            rng.gen_range(0.0..0.999)
        };
        let cfg = CddConfig::new(lambda).map_err(|e| e.to_string())?;
        for p in &passages {
            let fast = cdd(p, &lm, cfg).map_err(|e| e.to_string())?;
            worst = worst.max((fast - common::cdd_naive(&p.terms, &docs, lambda)).abs());
        }
    }
    ensure(worst <= 1e-9, || format!("max error {worst:e}"))?;

    let a = TokenizedPassage::from_terms("a", &["a", "a"]);
    let b = TokenizedPassage::from_terms("b", &["b", "b"]);
    let lm = UnigramLM::from_stats(&collect_stats([&a, &b]).unwrap()).unwrap();
    let hand = cdd(&a, &lm, CddConfig::new(0.5).unwrap()).unwrap();
    let want = 0.5 * (4.0f64 / 3.0).ln();
    ensure((hand - want).abs() < 1e-12, || format!("fixture {hand} vs {want}"))?;
    Ok(format!("100 corpora, max error {worst:.1e}; fixture ok"))
}

fn pruning_invariants() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let cases = 1200;
    let mut tied = 0;
    for case in 0..cases {
        let n = rng.gen_range(0..150);
        let scores: Vec<f64> = match case % 3 {
            0 => {
                tied += 1;
                vec![rng.gen_range(-1.0..1.0); n]
            }
            1 => (0..n).map(|_| rng.gen_range(0..5) as f64).collect(),
            _ => (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect(),
        };
        let set = QualityScoreSet::from_pairs("p", scores.iter().enumerate().map(|(i, &s)| (format!("d{i:03}"), s)))
            .map_err(|e| e.to_string())?;
        let mut pairs: Vec<(String, f64)> = set.iter().map(|(d, s)| (d.to_owned(), s)).collect();
        pairs.shuffle(&mut rng);
        let shuffled = QualityScoreSet::from_pairs("p", pairs).unwrap();

        let mut previous: Option<HashSet<String>> = None;
        for twentieths in 0..=20usize {
            let f = twentieths as f64 / 20.0;
            let m = plan(&set, PruneSpec::fraction(f).unwrap()).map_err(|e| e.to_string())?;
            let want = twentieths * n / 20;
            ensure(m.pruned.len() == want && prune_count(f, n) == want, || {
                format!("n={n} f={f}: pruned {} want {want}", m.pruned.len())
            })?;
            let kept: HashSet<String> = m.kept.iter().cloned().collect();
            if let Some(prev) = &previous {
                ensure(kept.is_subset(prev), || format!("n={n} f={f}: not nested"))?;
            }
            if twentieths % 5 == 0 {
                let again = plan(&shuffled, PruneSpec::fraction(f).unwrap()).unwrap();
                ensure(again == m, || format!("n={n} f={f}: depends on input order"))?;
            }
            previous = Some(kept);
        }
    }
    Ok(format!("{cases} multisets ({tied} all-tied) x 21 fractions"))
}

fn bm25_fixture() -> Result<String, String> {
    let docs = [
        TokenizedPassage::from_terms("d0", &["x", "a"]),
        TokenizedPassage::from_terms("d1", &["x", "x", "b", "c"]),
        TokenizedPassage::from_terms("d2", &["x", "d", "e", "f", "g", "h"]),
    ];
    let index = build_index(&docs).map_err(|e| e.to_string())?;
    let list = bm25_search(&index, "q", "x", 10, Bm25Params::default());
    let idf = (1.0f64 + 0.5 / 3.5).ln();
    let want = [
        ("d1", idf * 4.4 / 3.2),
        ("d0", idf * 2.2 / 1.75),
        ("d2", idf * 2.2 / 2.65),
    ];
    ensure(list.results.len() == 3, || "expected 3 results".into())?;
    for (got, (d, s)) in list.results.iter().zip(want) {
        ensure(got.docno == d && (got.score - s).abs() < 1e-9, || {
            format!("{} {} vs {d} {s}", got.docno, got.score)
        })?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let mut checked = 0;
    while checked < 300 {
        let mut docs: Vec<Vec<String>> = (0..rng.gen_range(2..12))
            .map(|_| {
                let len = rng.gen_range(2..10);
                common::random_terms(&mut rng, 5, len)
            })
            .collect();
        let Some(target) =
            (0..docs.len()).find(|&i| docs[i].iter().any(|t| t == "w0") && docs[i].iter().any(|t| t != "w0"))
        else {
            continue;
        };
        let score = |docs: &[Vec<String>]| {
            let ps: Vec<TokenizedPassage> = docs
                .iter()
                .enumerate()
                .map(|(i, d)| TokenizedPassage::new(format!("d{i:02}"), d.clone()))
                .collect();
            let list = bm25_search(&build_index(&ps).unwrap(), "q", "w0", docs.len(), Bm25Params::default());
            list.results
                .iter()
                .find(|r| r.docno == format!("d{target:02}"))
                .map(|r| r.score)
                .unwrap()
        };
        let before = score(&docs);
        let slot = docs[target].iter().position(|t| t != "w0").unwrap();
        docs[target][slot] = "w0".into();
        let after = score(&docs);
        ensure(after > before, || format!("tf+1 lowered score {before} -> {after}"))?;
        checked += 1;
    }
    Ok(format!("fixture to 1e-9; tf-monotone on {checked} random fixtures"))
}

fn tost_checks() -> Result<String, String> {
    let u: Vec<f64> = (0..20).map(|i| 0.3 + 0.03 * i as f64).collect();
    let same = tost_paired(&u, &u, 0.05, 0.05).map_err(|e| e.to_string())?;
    ensure(same.equivalent && same.p_value == 0.0, || {
        format!("identical: {same:?}")
    })?;
    let delta = 0.05 * u.iter().sum::<f64>() / u.len() as f64;
    let worse: Vec<f64> = u.iter().map(|x| x - 2.0 * delta).collect();
    let r = tost_paired(&u, &worse, 0.05, 0.05).map_err(|e| e.to_string())?;
    ensure(!r.equivalent && r.p_value == 1.0, || format!("worse by 2 delta: {r:?}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(106);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let base: Vec<f64> = (0..30).map(|_| rng.gen_range(0.2..1.0)).collect();
        let delta = 0.05 * base.iter().sum::<f64>() / 30.0;
        let pruned: Vec<f64> = base
            .iter()
            .map(|x| x - delta + delta * rng.gen_range(-1.5..2.5))
            .collect();
        let r = tost_paired(&base, &pruned, 0.05, 0.05).map_err(|e| e.to_string())?;
        let d: Vec<f64> = pruned.iter().zip(&base).map(|(p, b)| p - b + delta).collect();
        let mean = d.iter().sum::<f64>() / 30.0;
        let sd = (d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 29.0).sqrt();
        let t = mean / (sd / 30f64.sqrt());
        let oracle = 1.0 - StudentsT::new(0.0, 1.0, 29.0).unwrap().cdf(t);
        worst = worst.max((r.p_value - oracle).abs());
    }
    ensure(worst <= 1e-6, || format!("max p-value error {worst:e}"))?;
    Ok(format!("degenerate conventions hold; n=30 max p error {worst:.1e}"))
}

struct Scored {
    corpus: SynthCorpus,
    passages: Vec<TokenizedPassage>,
    sets: Vec<QualityScoreSet>,
}

fn score_default(names: &[&str]) -> Result<Scored, String> {
    let corpus = generate(&SynthConfig::default()).map_err(|e| e.to_string())?;
    let passages: Vec<TokenizedPassage> = corpus.passages.iter().map(|p| p.tokenize()).collect();
    let stats = collect_stats(&passages).map_err(|e| e.to_string())?;
    let lm = UnigramLM::from_stats(&stats).map_err(|e| e.to_string())?;
    let mut sets = Vec::new();
    for &name in names {
        let est = match name {
            "itn" => Estimator::Itn,
            "cdd" => Estimator::Cdd {
                lm: lm.clone(),
                cfg: CddConfig::default(),
            },
            "unigram-ppl" => Estimator::UnigramPpl { lm: lm.clone() },
            "random" => Estimator::Random { seed: 0 },
            "linear" => Estimator::Linear {
                model: train_linear(corpus.triples.clone(), &LinearConfig::default()).map_err(|e| e.to_string())?,
            },
            other => return Err(format!("unknown estimator {other}")),
        };
        sets.push(score_corpus(&passages, &est).map_err(|e| e.to_string())?);
    }
    Ok(Scored { corpus, passages, sets })
}

fn intrinsic_ordering() -> Result<String, String> {
    let s = score_default(&["itn", "cdd", "unigram-ppl", "random", "linear"])?;
    let exclude: HashSet<String> = s.corpus.train_docnos.iter().cloned().collect();
    let labels = intrinsic_labels(
        &s.corpus.qrels,
        s.passages.iter().map(|p| p.docno.as_str()),
        &exclude,
        1,
    );
    let mut a = BTreeMap::new();
    for set in &s.sets {
        let pairs = labelled_scores(set, &labels).map_err(|e| e.to_string())?;
        a.insert(set.estimator.as_str(), auc(&pairs).map_err(|e| e.to_string())?);
    }
    let lexical = ["itn", "cdd", "unigram-ppl"].map(|n| a[n]);
    let summary = a
        .iter()
        .map(|(k, v)| format!("{k}={v:.3}"))
        .collect::<Vec<_>>()
        .join(" ");
    ensure((0.45..=0.55).contains(&a["random"]), || {
        format!("random outside [0.45, 0.55]: {summary}")
    })?;
    ensure(a["linear"] >= 0.9, || format!("linear < 0.9: {summary}"))?;
    ensure(lexical.iter().all(|&x| x < a["linear"] && x > a["random"]), || {
        format!("ordering violated: {summary}")
    })?;
    Ok(summary)
}

fn sweep_linear_vs_random() -> Result<String, String> {
    let s = score_default(&["linear", "random"])?;
    let cfg = SweepConfig::default();
    let out = run_sweep(&s.passages, &s.corpus.queries, &s.corpus.qrels, &s.sets, &cfg).map_err(|e| e.to_string())?;
    if let Some((est, f, e)) = out.errors().next() {
        return Err(format!("cell {est}@{f} failed: {e}"));
    }
    let linear = out.max_equivalent_fraction("linear");
    let random = out.max_equivalent_fraction("random");
    let show = |f: Option<f64>| f.map_or("none".to_owned(), |f| format!("{:.0}%", f * 100.0));
    let detail = format!(
        "max equivalent fraction: linear {} vs random {} (baseline RR@10 {:.3})",
        show(linear),
        show(random),
        out.baseline.mean
    );
    ensure(linear.unwrap_or(-1.0) > random.unwrap_or(-1.0), || detail.clone())?;
    Ok(detail)
}

fn size_linearity_uniform() -> Result<String, String> {
    let corpus = generate(&SynthConfig {
        passage_len_range: (50, 50),
        ..Default::default()
    })
    .map_err(|e| e.to_string())?;
    let passages: Vec<TokenizedPassage> = corpus.passages.iter().map(|p| p.tokenize()).collect();
    let scores = score_corpus(&passages, &Estimator::Random { seed: 9 }).map_err(|e| e.to_string())?;
    let mut points = Vec::new();
    for f in default_fractions() {
        let m = plan(&scores, PruneSpec::fraction(f).unwrap()).map_err(|e| e.to_string())?;
        let pruned = m.pruned_set();
        let index =
            build_index(passages.iter().filter(|p| !pruned.contains(p.docno.as_str()))).map_err(|e| e.to_string())?;
        points.push((f, index_stats(&index).num_postings));
    }
    let dev = size_linearity(&points).map_err(|e| e.to_string())?;
    ensure(dev <= 0.05, || format!("max deviation {:.2}%", dev * 100.0))?;
    Ok(format!(
        "max deviation {:.2}% over {} fractions",
        dev * 100.0,
        points.len()
    ))
}

fn metric_fixtures() -> Result<String, String> {
    let mut qrels = Qrels::new();
    qrels.insert("q", "rel", 1);
    let run = |docs: &[&str]| {
        vec![RankedList {
            qid: "q".into(),
            results: docs
                .iter()
                .enumerate()
                .map(|(i, d)| ScoredDoc {
                    docno: d.to_string(),
                    score: -(i as f64),
                })
                .collect(),
        }]
    };
    let mut past_ten: Vec<String> = (0..10).map(|i| format!("n{i}")).collect();
    past_ten.push("rel".into());
    let past_ten: Vec<&str> = past_ten.iter().map(String::as_str).collect();
    let cases: [(&[&str], f64, f64); 5] = [
        (&["rel"], 1.0, 1.0),
        (&["x", "rel"], 0.5, 1.0 / 3f64.log2()),
        (&["x", "y", "rel"], 1.0 / 3.0, 0.5),
        (&past_ten, 0.0, 0.0),
        (&[], 0.0, 0.0),
    ];
    for (docs, rr, ndcg) in cases {
        let runs = run(docs);
        let got_rr = Metric::RrAt10.evaluate(&runs, &qrels).mean;
        let got_ndcg = Metric::NdcgAt10.evaluate(&runs, &qrels).mean;
        ensure((got_rr - rr).abs() < 1e-9 && (got_ndcg - ndcg).abs() < 1e-9, || {
            format!("{docs:?}: RR {got_rr} (want {rr}), nDCG {got_ndcg} (want {ndcg})")
        })?;
    }
    Ok(format!("{} golden cases incl. 1/log2(3)", cases.len()))
}

fn main() -> ExitCode {
    let criteria: [(u8, &str, Duration, Check); 10] = [
        (1, "break-even arithmetic", Duration::from_secs(1), break_even_table),
        (2, "AUC oracle equivalence", Duration::from_secs(5), auc_oracle),
        (3, "CDD oracle equivalence", Duration::from_secs(5), cdd_oracle),
        (4, "pruning invariants", Duration::from_secs(10), pruning_invariants),
        (5, "BM25 fixture", Duration::from_secs(5), bm25_fixture),
        (6, "TOST", Duration::from_secs(5), tost_checks),
        (
            7,
            "intrinsic AUC ordering",
            Duration::from_secs(120),
            intrinsic_ordering,
        ),
        (
            8,
            "equivalence-preserving sweep",
            Duration::from_secs(300),
            sweep_linear_vs_random,
        ),
        (9, "size linearity", Duration::from_secs(60), size_linearity_uniform),
        (10, "metric fixtures", Duration::from_secs(1), metric_fixtures),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (id, name, budget, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str()) || *f == id.to_string()) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let (ok, detail) = match result {
            Ok(d) if elapsed <= budget => (true, d),
            Ok(d) => (false, format!("{d}; over budget")),
            Err(e) => (false, e),
        };
        failed += usize::from(!ok);
        println!(
            "criterion {id:>2} {} {name}: {detail} [{:.2}s / {}s]",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
