use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use qprune::corpus::{load_corpus, read_corpus, tokenize_all, write_corpus, CorpusFormat};
use qprune::eval::{
    auc, break_even, intrinsic_labels, labelled_scores, load_qrels, roc_curve, tost_equivalence, write_report,
    MetricReport, Qrels, ReportRow, RocPoint, DEFAULT_RELEVANCE_THRESHOLD,
};
use qprune::index::{build_index, index_stats, load_queries, load_run, timed_search, write_run, Bm25Params};
use qprune::index::{InvertedIndex, RankedList};
use qprune::pruning::{prune, PruneSpec};
use qprune::quality::{
    load_triples, mean_training_loss, train_linear, write_scores, LinearConfig, LinearQualityModel, QualityScoreSet,
};
use qprune::sweep::{default_fractions, run_sweep, SweepConfig};
use qprune::synth::{generate, SynthConfig};
use serde::Serialize;
use serde_json::json;

use crate::cli::*;
use crate::estimator::Scorer;
use crate::plot;
use crate::provenance::{require_inputs, Provenance};

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Synth(a) => synth(&a),
        Command::Score(a) => score(&a),
        Command::TrainQuality(a) => train_quality(&a),
        Command::Prune(a) => prune_cmd(&a),
        Command::Index(a) => index(&a),
        Command::Search(a) => search(&a),
        Command::Eval(a) => eval(&a),
        Command::Tost(a) => tost(&a),
        Command::Roc(a) => roc(&a),
        Command::Breakeven(a) => breakeven(&a),
        Command::Sweep(a) => sweep(&a),
        Command::Report(a) => report(&a),
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let json = serde_json::to_string_pretty(value)?;
    fs::write(path, json + "\n").with_context(|| format!("writing {}", path.display()))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

fn synth(a: &SynthArgs) -> Result<()> {
    let cfg = SynthConfig {
        num_passages: a.num_passages,
        vocab_size: a.vocab_size,
        low_quality_fraction: a.low_quality_fraction,
        num_queries: a.num_queries,
        passage_len_range: (a.min_len, a.max_len),
        seed: a.seed,
    };
    let corpus = generate(&cfg)?;
    corpus.write_to_dir(&a.out)?;
    let mut prov = Provenance::new("synth", a)?;
    for name in [
        "corpus.jsonl",
        "queries.tsv",
        "qrels.txt",
        "triples.tsv",
        "labels.tsv",
        "train_docnos.txt",
    ] {
        prov.output(&a.out.join(name));
    }
    prov.write_beside(&a.out)?;
    println!(
        "wrote {} passages, {} queries, {} triples to {}",
        corpus.passages.len(),
        corpus.queries.len(),
        corpus.triples.len(),
        a.out.display()
    );
    Ok(())
}

fn score(a: &ScoreArgs) -> Result<()> {
    require_inputs(std::iter::once(a.corpus.as_path()).chain(a.estimator.input()))?;
    let passages = read_corpus(&a.corpus)?;
    ensure!(!passages.is_empty(), "corpus {} is empty", a.corpus.display());
    let tokenized = tokenize_all(&passages);
    let start = Instant::now();
    let set = Scorer::new(&tokenized, &a.options).score(&a.estimator)?;
    let secs = start.elapsed().as_secs_f64();
    ensure_parent(&a.out)?;
    write_scores(&a.out, &set)?;

    let n = set.len() as f64;
    let per_second = n / secs.max(1e-12);
    let ms_per_passage = secs * 1e3 / n;
    println!(
        "scored {} passages with {} in {secs:.3}s: {per_second:.0} passages/s ({ms_per_passage:.5} ms/passage)",
        set.len(),
        set.estimator
    );
    let mut prov = Provenance::new("score", a)?;
    prov.input(&a.corpus)?;
    if let Some(p) = a.estimator.input() {
        prov.input(p)?;
    }
    prov.output(&a.out).timing(json!({
        "scorer": set.estimator,
        "seconds": secs,
        "passages_per_second": per_second,
        "ms_per_passage": ms_per_passage,
    }));
    prov.write_beside(&a.out)?;
    Ok(())
}

fn train_quality(a: &TrainArgs) -> Result<()> {
    require_inputs([a.triples.as_path()])?;
    let triples = load_triples(&a.triples)?;
    let cfg = LinearConfig {
        feature_dim: a.feature_dim,
        learning_rate: a.learning_rate,
        epochs: a.epochs,
        l2: a.l2,
        rng_seed: a.seed,
        ..LinearConfig::default()
    };
    let model = train_linear(triples.iter().cloned(), &cfg)?;
    ensure_parent(&a.out)?;
    model.save(&a.out)?;
    let loss = mean_training_loss(&model, &triples);
    let zero = mean_training_loss(&LinearQualityModel::zeros(cfg.feature_dim, cfg.digest_seed), &triples);
    println!(
        "trained on {} triples: mean loss {loss:.4} (untrained {zero:.4})",
        triples.len()
    );
    let mut prov = Provenance::new("train-quality", a)?;
    prov.input(&a.triples)?.output(&a.out);
    prov.write_beside(&a.out)?;
    Ok(())
}

fn prune_cmd(a: &PruneArgs) -> Result<()> {
    require_inputs([a.corpus.as_path(), a.scores.as_path()])?;
    let spec = match (a.mode.fraction, a.mode.threshold) {
        (Some(f), None) => PruneSpec::fraction(f)?,
        (None, Some(t)) => PruneSpec::threshold(t)?,
        _ => bail!("exactly one of --fraction and --threshold is required"),
    };
    let all = qprune::quality::load_external_scores(&a.scores)?;
    let passages: Vec<_> = load_corpus(&a.corpus, CorpusFormat::from_path(&a.corpus))?.collect::<Result<_, _>>()?;
    // Fractions refer to the corpus, so restrict the scores to it.
    let mut scores = QualityScoreSet::new(all.estimator.clone());
    for p in &passages {
        let s = all
            .get(&p.docno)
            .with_context(|| format!("{}: no score for passage `{}`", a.scores.display(), p.docno))?;
        scores.insert(p.docno.clone(), s)?;
    }
    let total = passages.len();
    let (kept, manifest) = prune(passages.into_iter().map(Ok), &scores, spec)?;
    ensure_parent(&a.out)?;
    write_corpus(&a.out, &kept, CorpusFormat::from_path(&a.out))?;
    let manifest_path = a
        .manifest
        .clone()
        .unwrap_or_else(|| with_suffix(&a.out, ".manifest.json"));
    manifest.save(&manifest_path)?;
    println!(
        "pruned {} of {total} passages ({:.2}%), kept {}",
        manifest.pruned.len(),
        manifest.fraction_achieved * 100.0,
        kept.len()
    );
    let mut prov = Provenance::new("prune", a)?;
    prov.input(&a.corpus)?.input(&a.scores)?;
    prov.output(&a.out).output(&manifest_path);
    prov.write_beside(&a.out)?;
    Ok(())
}

fn index(a: &IndexArgs) -> Result<()> {
    require_inputs([a.corpus.as_path()])?;
    let passages = tokenize_all(&read_corpus(&a.corpus)?);
    let index = build_index(&passages)?;
    ensure_parent(&a.out)?;
    index.save(&a.out)?;
    let stats = index_stats(&index);
    println!("{}", serde_json::to_string(&stats)?);
    let mut prov = Provenance::new("index", a)?;
    prov.input(&a.corpus)?.output(&a.out);
    prov.config["stats"] = serde_json::to_value(stats)?;
    prov.write_beside(&a.out)?;
    Ok(())
}

fn bm25(o: &Bm25Options) -> Result<Bm25Params> {
    ensure!(o.topk > 0, "--topk must be at least 1");
    Ok(Bm25Params::new(o.k1, o.b)?)
}

fn search(a: &SearchArgs) -> Result<()> {
    require_inputs([a.index.as_path(), a.queries.as_path()])?;
    let params = bm25(&a.bm25)?;
    let index = InvertedIndex::load(&a.index)?;
    let queries = load_queries(&a.queries)?;
    let timed = timed_search(&index, &queries, a.bm25.topk, params, a.repetitions)?;
    ensure_parent(&a.out)?;
    write_run(&a.out, &timed.runs, "qprune-bm25")?;
    let lat = &timed.latency;
    println!(
        "{} queries over {} docs: mean {:.4} ms, median {:.4} ms per query",
        lat.num_queries,
        index.num_docs(),
        lat.mean_ms,
        lat.median_ms
    );
    let mut prov = Provenance::new("search", a)?;
    prov.input(&a.index)?.input(&a.queries)?.output(&a.out);
    prov.timing(serde_json::to_value(lat)?);
    prov.write_beside(&a.out)?;
    Ok(())
}

/// Give both runs the same qids so per-query values pair up; a query
/// missing from one run has an empty result list there.
fn align(a: &mut Vec<RankedList>, b: &mut Vec<RankedList>) {
    let qids: BTreeSet<String> = a.iter().chain(b.iter()).map(|r| r.qid.clone()).collect();
    for runs in [a, b] {
        let present: HashSet<String> = runs.iter().map(|r| r.qid.clone()).collect();
        runs.extend(qids.iter().filter(|q| !present.contains(*q)).map(RankedList::empty));
    }
}

fn warn_flagged(report: &MetricReport) {
    if !report.flagged.is_empty() {
        eprintln!(
            "warning: {} queries without relevant judgments scored 0 ({})",
            report.flagged.len(),
            report.flagged.iter().take(5).cloned().collect::<Vec<_>>().join(", ")
        );
    }
}

fn eval(a: &EvalArgs) -> Result<()> {
    require_inputs(
        [a.run.as_path(), a.qrels.as_path()]
            .into_iter()
            .chain(a.baseline.as_deref()),
    )?;
    let qrels = load_qrels(&a.qrels)?;
    let mut runs = load_run(&a.run)?;
    let mut baseline = a.baseline.as_ref().map(load_run).transpose()?;
    if let Some(b) = baseline.as_mut() {
        align(&mut runs, b);
    }
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for &metric in &a.metrics {
        let report = metric.evaluate(&runs, &qrels);
        warn_flagged(&report);
        let test = match &baseline {
            Some(b) => {
                let base = metric.evaluate(b, &qrels);
                Some(tost_equivalence(
                    &base.per_query,
                    &report.per_query,
                    a.test.margin,
                    a.test.alpha,
                )?)
            }
            None => None,
        };
        rows.push(ReportRow {
            estimator: a.label.clone(),
            fraction: a.fraction,
            metric: metric.name().to_owned(),
            mean: report.mean,
            p_value: test.as_ref().map(|t| t.p_value),
            equivalent: test.as_ref().map(|t| t.equivalent),
        });
        reports.push(report);
    }
    ensure_parent(&a.out)?;
    let json_path = a.out.with_extension("json");
    write_report(&a.out, &json_path, &rows)?;
    let per_query = with_suffix(&a.out.with_extension(""), ".per_query.json");
    write_json(&per_query, &reports)?;
    for r in &rows {
        println!("{}", r.to_csv());
    }
    let mut prov = Provenance::new("eval", a)?;
    prov.input(&a.run)?.input(&a.qrels)?;
    if let Some(b) = &a.baseline {
        prov.input(b)?;
    }
    prov.output(&a.out).output(&json_path).output(&per_query);
    prov.write_beside(&a.out)?;
    Ok(())
}

fn tost(a: &TostArgs) -> Result<()> {
    require_inputs([a.unpruned.as_path(), a.pruned.as_path(), a.qrels.as_path()])?;
    let qrels = load_qrels(&a.qrels)?;
    let mut unpruned = load_run(&a.unpruned)?;
    let mut pruned = load_run(&a.pruned)?;
    align(&mut unpruned, &mut pruned);
    let base = a.metric.evaluate(&unpruned, &qrels);
    let test = a.metric.evaluate(&pruned, &qrels);
    let result = tost_equivalence(&base.per_query, &test.per_query, a.test.margin, a.test.alpha)?;
    ensure_parent(&a.out)?;
    write_json(&a.out, &result)?;
    println!(
        "{}: unpruned {:.4}, pruned {:.4}, delta {:.4}, p = {:.3e}, equivalent = {}",
        a.metric, result.mean_unpruned, result.mean_pruned, result.margin_delta, result.p_value, result.equivalent
    );
    let mut prov = Provenance::new("tost", a)?;
    prov.input(&a.unpruned)?
        .input(&a.pruned)?
        .input(&a.qrels)?
        .output(&a.out);
    prov.write_beside(&a.out)?;
    Ok(())
}

fn read_docno_list(path: &Path) -> Result<HashSet<String>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_owned)
        .collect())
}

fn read_labels(path: &Path) -> Result<BTreeMap<String, bool>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut labels = BTreeMap::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let (docno, label) = line
            .split_once('\t')
            .with_context(|| format!("{}:{}: expected docno<TAB>label", path.display(), i + 1))?;
        let label = match label.trim() {
            "1" => true,
            "0" => false,
            other => bail!("{}:{}: label must be 0 or 1, got `{other}`", path.display(), i + 1),
        };
        labels.insert(docno.to_owned(), label);
    }
    Ok(labels)
}

fn qrels_labels(qrels: &Qrels, docnos: &[String], exclude: Option<&Path>) -> Result<BTreeMap<String, bool>> {
    let exclude = exclude.map(read_docno_list).transpose()?.unwrap_or_default();
    Ok(intrinsic_labels(
        qrels,
        docnos.iter().map(String::as_str),
        &exclude,
        DEFAULT_RELEVANCE_THRESHOLD,
    ))
}

#[derive(Serialize)]
struct RocEntry {
    estimator: String,
    auc: f64,
    points: Vec<RocPoint>,
}

fn file_safe(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

fn roc_entries(sets: &[QualityScoreSet], labels: &BTreeMap<String, bool>) -> Result<Vec<RocEntry>> {
    sets.iter()
        .map(|set| {
            let pairs = labelled_scores(set, labels).with_context(|| format!("labelling {}", set.estimator))?;
            Ok(RocEntry {
                estimator: set.estimator.clone(),
                auc: auc(&pairs)?,
                points: roc_curve(&pairs)?,
            })
        })
        .collect()
}

fn plot_rocs(dir: &Path, entries: &[RocEntry]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    entries
        .iter()
        .map(|e| {
            let path = dir.join(format!("roc_{}.svg", file_safe(&e.estimator)));
            plot::roc_chart(&path, &e.estimator, &e.points, e.auc)?;
            Ok(path)
        })
        .collect()
}

fn roc(a: &RocArgs) -> Result<()> {
    let inputs: Vec<&Path> = a
        .scores
        .iter()
        .map(PathBuf::as_path)
        .chain(a.qrels.as_deref())
        .chain(a.corpus.as_deref())
        .chain(a.exclude.as_deref())
        .chain(a.labels.as_deref())
        .collect();
    require_inputs(inputs.iter().copied())?;
    let labels = match (&a.labels, &a.qrels, &a.corpus) {
        (Some(path), _, _) => read_labels(path)?,
        (None, Some(qrels), Some(corpus)) => {
            let docnos: Vec<String> = read_corpus(corpus)?.into_iter().map(|p| p.docno).collect();
            qrels_labels(&load_qrels(qrels)?, &docnos, a.exclude.as_deref())?
        }
        _ => bail!("--qrels needs --corpus to define the negatives"),
    };
    let sets = a
        .scores
        .iter()
        .map(|p| qprune::quality::load_external_scores(p).map_err(anyhow::Error::from))
        .collect::<Result<Vec<_>>>()?;
    let entries = roc_entries(&sets, &labels)?;
    ensure_parent(&a.out)?;
    write_json(&a.out, &entries)?;
    let mut prov = Provenance::new("roc", a)?;
    for p in &inputs {
        prov.input(p)?;
    }
    prov.output(&a.out);
    if let Some(dir) = &a.plot_dir {
        for p in plot_rocs(dir, &entries)? {
            prov.output(&p);
        }
    }
    for e in &entries {
        println!("{}\tAUC {:.4}", e.estimator, e.auc);
    }
    prov.write_beside(&a.out)?;
    Ok(())
}

fn breakeven(a: &BreakevenArgs) -> Result<()> {
    let quality_ms = match (a.quality_ms, &a.quality_record) {
        (Some(ms), _) => ms,
        (None, Some(path)) => {
            require_inputs([path.as_path()])?;
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let record: serde_json::Value = serde_json::from_str(&text)?;
            // Accepts a bare record or the provenance written by `score`.
            record["ms_per_passage"]
                .as_f64()
                .or_else(|| record["timing"]["ms_per_passage"].as_f64())
                .with_context(|| format!("{}: missing numeric ms_per_passage", path.display()))?
        }
        (None, None) => bail!("one of --quality-ms and --quality-record is required"),
    };
    let be = break_even(quality_ms, a.encoding_ms)?;
    println!("break-even fraction {:.4} ({})", be.fraction, be.label());
    if let Some(out) = &a.out {
        ensure_parent(out)?;
        write_json(out, &json!({ "break_even": be, "label": be.label() }))?;
        let mut prov = Provenance::new("breakeven", a)?;
        if let Some(p) = &a.quality_record {
            prov.input(p)?;
        }
        prov.output(out);
        prov.write_beside(out)?;
    }
    Ok(())
}

fn sweep(a: &SweepArgs) -> Result<()> {
    let estimator_inputs = a.estimators.iter().filter_map(|e| e.input());
    require_inputs(
        [a.corpus.as_path(), a.queries.as_path(), a.qrels.as_path()]
            .into_iter()
            .chain(estimator_inputs)
            .chain(a.exclude.as_deref()),
    )?;
    let fractions = if a.fractions.is_empty() {
        default_fractions()
    } else {
        a.fractions.clone()
    };
    for &f in &fractions {
        PruneSpec::fraction(f)?;
    }
    let cfg = SweepConfig {
        fractions,
        top_k: a.bm25.topk,
        bm25: bm25(&a.bm25)?,
        metric: a.metric,
        margin: a.test.margin,
        alpha: a.test.alpha,
    };

    let passages = read_corpus(&a.corpus)?;
    let tokenized = tokenize_all(&passages);
    let queries = load_queries(&a.queries)?;
    let qrels = load_qrels(&a.qrels)?;
    let scorer = Scorer::new(&tokenized, &a.options);
    let mut sets: Vec<QualityScoreSet> = Vec::new();
    for spec in &a.estimators {
        let set = scorer.score(spec)?;
        ensure!(
            sets.iter().all(|s| s.estimator != set.estimator),
            "two estimators are both named `{}`",
            set.estimator
        );
        sets.push(set);
    }

    let start = Instant::now();
    let outcome = run_sweep(&tokenized, &queries, &qrels, &sets, &cfg)?;
    let secs = start.elapsed().as_secs_f64();
    warn_flagged(&outcome.baseline);
    for (est, f, err) in outcome.errors() {
        eprintln!("warning: cell {est} @ {f}: {err}");
    }

    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let rows = outcome.rows();
    let csv = a.out.join("report.csv");
    let json_path = a.out.join("report.json");
    write_report(&csv, &json_path, &rows)?;
    let detail = a.out.join("sweep.json");
    write_json(&detail, &outcome)?;
    let chart = a.out.join("tradeoff.svg");
    plot::tradeoff_chart(&chart, &rows, Some(outcome.baseline.mean))?;

    let docnos: Vec<String> = passages.into_iter().map(|p| p.docno).collect();
    let labels = qrels_labels(&qrels, &docnos, a.exclude.as_deref())?;
    let entries = roc_entries(&sets, &labels)?;
    let roc_json = a.out.join("roc.json");
    write_json(&roc_json, &entries)?;

    let mut prov = Provenance::new("sweep", a)?;
    prov.input(&a.corpus)?.input(&a.queries)?.input(&a.qrels)?;
    for p in a
        .estimators
        .iter()
        .filter_map(|e| e.input())
        .chain(a.exclude.as_deref())
    {
        prov.input(p)?;
    }
    prov.output(&csv)
        .output(&json_path)
        .output(&detail)
        .output(&chart)
        .output(&roc_json);
    for p in plot_rocs(&a.out, &entries)? {
        prov.output(&p);
    }
    prov.timing(json!({ "sweep_seconds": secs }));
    prov.write_beside(&a.out)?;

    println!("baseline {} {:.4}", outcome.metric, outcome.baseline.mean);
    for e in &entries {
        let max = outcome
            .max_equivalent_fraction(&e.estimator)
            .map_or("none".to_owned(), |f| format!("{:.0}%", f * 100.0));
        println!("{}\tAUC {:.4}\tmax equivalent fraction {max}", e.estimator, e.auc);
    }
    Ok(())
}

fn report(a: &ReportArgs) -> Result<()> {
    require_inputs(a.inputs.iter().map(PathBuf::as_path))?;
    let mut rows: Vec<ReportRow> = Vec::new();
    for path in &a.inputs {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let part: Vec<ReportRow> =
            serde_json::from_str(&text).with_context(|| format!("{}: not a report JSON", path.display()))?;
        rows.extend(part);
    }
    ensure_parent(&a.out)?;
    let json_path = a.out.with_extension("json");
    write_report(&a.out, &json_path, &rows)?;
    let mut prov = Provenance::new("report", a)?;
    for p in &a.inputs {
        prov.input(p)?;
    }
    prov.output(&a.out).output(&json_path);
    if let Some(plot_path) = &a.plot {
        ensure_parent(plot_path)?;
        plot::tradeoff_chart(plot_path, &rows, None)?;
        prov.output(plot_path);
    }
    prov.write_beside(&a.out)?;
    println!("{}", qprune::eval::REPORT_HEADER);
    for r in &rows {
        println!("{}", r.to_csv());
    }
    Ok(())
}
