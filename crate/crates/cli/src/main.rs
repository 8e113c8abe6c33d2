mod experiment;
mod output;

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use nprf::config::ExperimentConfig;
use nprf::corpus::CorpusIndex;
use nprf::evaluation::{aligned_map, evaluate, paired_t_test, MetricReport, Qrels};
use nprf::feedback::{build_feedback_set, NprfParams, PreparedQuery};
use nprf::first_stage::{read_runs, rocchio_expand, Bm25Params, Query, RunList, FB_DOCS_GRID, FB_TERMS_GRID};
use nprf::nirm::Checkpoint;
use nprf::synthetic::SyntheticConfig;
use nprf::training::{cross_validate, make_folds, rerank_all, train, CvOutcome, TrainConfig};

use experiment::{index_from_corpus, load_queries, load_stopwords, search_all, Experiment};
use output::OutputSet;

/// Neural pseudo relevance feedback: index, search, train, re-rank and
/// evaluate.
#[derive(Debug, Parser)]
#[command(name = "nprf", version)]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Parse and validate the command line, print it, and exit.
    #[arg(long, global = true)]
    dry_run: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct ConfigArgs {
    /// Experiment config (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key, e.g. `--set m=5`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        for o in &self.overrides {
            let (k, v) = o
                .split_once('=')
                .with_context(|| format!("--set expects KEY=VALUE, got {o}"))?;
            config.set(k.trim(), v.trim())?;
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SweepParam {
    M,
    K,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build and save an index from a JSON-lines corpus of {"id", "text"}.
    Index {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Stopword list, one word per line (default: built-in English list).
        #[arg(long)]
        stopwords: Option<PathBuf>,
    },
    /// BM25 retrieval, optionally with Rocchio query expansion (BM25+QE).
    Search {
        #[arg(long)]
        index: PathBuf,
        /// JSON-lines queries of {"id", "text"}.
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 1.2)]
        k1: f64,
        #[arg(long, default_value_t = 0.75)]
        b: f64,
        #[arg(long, default_value_t = 1000)]
        depth: usize,
        #[arg(long)]
        stopwords: Option<PathBuf>,
        /// Expand queries with Rocchio feedback and search again.
        #[arg(long)]
        expand: bool,
        #[arg(long, default_value_t = 10)]
        fb_docs: usize,
        #[arg(long, default_value_t = 20)]
        fb_terms: usize,
        #[arg(long, default_value_t = 0.4)]
        beta: f64,
    },
    /// Evaluate BM25 over the k1/b grid and report the best setting by MAP.
    Bm25Grid {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        qrels: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 1000)]
        depth: usize,
        #[arg(long)]
        stopwords: Option<PathBuf>,
    },
    /// Evaluate BM25+QE over the feedback-document and expansion-term grid
    /// at fixed k1/b and report the best setting by MAP.
    QeGrid {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        qrels: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 1.2)]
        k1: f64,
        #[arg(long, default_value_t = 0.75)]
        b: f64,
        #[arg(long, default_value_t = 0.4)]
        beta: f64,
        #[arg(long, default_value_t = 1000)]
        depth: usize,
        #[arg(long)]
        stopwords: Option<PathBuf>,
    },
    /// Write the feedback set (top-m documents, top-k terms) of every query.
    Feedback {
        #[arg(long)]
        index: PathBuf,
        /// Initial TREC run.
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 10)]
        m: usize,
        #[arg(long, default_value_t = 20)]
        k: usize,
    },
    /// Dump the tokens of each query's top-ranked documents, one document
    /// per line, as input for training word embeddings.
    Pool {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        run: PathBuf,
        #[arg(long, default_value_t = 2000)]
        depth: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train on one cross-validation fold and save the selected checkpoint.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out_dir: PathBuf,
        /// Fold (1-5) whose train/validation partitions are used.
        #[arg(long, default_value_t = 1)]
        fold: usize,
    },
    /// Re-rank initial runs with a trained checkpoint.
    Rerank {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Evaluate a run (MAP@1000, P@20, NDCG@20), optionally against a
    /// baseline with a paired t-test on MAP.
    Eval {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        qrels: PathBuf,
        #[arg(long)]
        baseline: Option<PathBuf>,
        /// Also write metrics.txt / metrics.jsonl here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Five-fold cross-validation of NPRF against the first-stage ranking.
    Cv {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Cross-validate once per value of m or k.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, value_enum)]
        param: SweepParam,
        /// Comma-separated values, e.g. 3,5,10.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<usize>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Generate the synthetic topic collection and a matching config.
    Synth {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = SyntheticConfig::default().seed)]
        seed: u64,
        #[arg(long, default_value_t = SyntheticConfig::default().docs)]
        docs: usize,
        #[arg(long, default_value_t = SyntheticConfig::default().queries)]
        queries: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(match cli.verbose {
            0 => log::LevelFilter::Warn,
            1 => log::LevelFilter::Info,
            _ => log::LevelFilter::Debug,
        })
        .init();
    if cli.dry_run {
        println!("{:#?}", cli.command);
        return ExitCode::SUCCESS;
    }
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Index { corpus, out, stopwords } => cmd_index(&corpus, &out, stopwords.as_deref()),
        Command::Search {
            index,
            queries,
            out_dir,
            k1,
            b,
            depth,
            stopwords,
            expand,
            fb_docs,
            fb_terms,
            beta,
        } => {
            let params = Bm25Params::new(k1, b)?;
            let expansion = expand.then_some((fb_docs, fb_terms, beta));
            cmd_search(&index, &queries, &out_dir, params, depth, stopwords.as_deref(), expansion)
        }
        Command::Bm25Grid {
            index,
            queries,
            qrels,
            out_dir,
            depth,
            stopwords,
        } => cmd_bm25_grid(&index, &queries, &qrels, &out_dir, depth, stopwords.as_deref()),
        Command::QeGrid {
            index,
            queries,
            qrels,
            out_dir,
            k1,
            b,
            beta,
            depth,
            stopwords,
        } => cmd_qe_grid(&index, &queries, &qrels, &out_dir, Bm25Params::new(k1, b)?, beta, depth, stopwords.as_deref()),
        Command::Feedback { index, run, out_dir, m, k } => cmd_feedback(&index, &run, &out_dir, m, k),
        Command::Pool { index, run, depth, out } => cmd_pool(&index, &run, depth, &out),
        Command::Train { config, out_dir, fold } => cmd_train(config.load()?, &out_dir, fold),
        Command::Rerank {
            config,
            checkpoint,
            out_dir,
        } => cmd_rerank(config.load()?, &checkpoint, &out_dir),
        Command::Eval {
            run,
            qrels,
            baseline,
            out_dir,
        } => cmd_eval(&run, &qrels, baseline.as_deref(), out_dir.as_deref()),
        Command::Cv { config, out_dir } => cmd_cv(config.load()?, &out_dir),
        Command::Sweep {
            config,
            param,
            values,
            out_dir,
        } => cmd_sweep(config.load()?, param, &values, &out_dir),
        Command::Synth {
            out_dir,
            seed,
            docs,
            queries,
        } => cmd_synth(&out_dir, seed, docs, queries),
    }
}

fn runs_text(runs: &[RunList], tag: &str) -> Vec<u8> {
    let mut buf = Vec::new();
    for r in runs {
        r.write_trec(&mut buf, tag).expect("writing to memory");
    }
    buf
}

fn cmd_index(corpus: &Path, out: &Path, stopwords: Option<&Path>) -> Result<()> {
    let stop = load_stopwords(stopwords)?;
    let index = index_from_corpus(corpus, &stop)?;
    let result = index.save(out);
    if result.is_err() {
        let _ = std::fs::remove_file(out);
    }
    result?;
    println!(
        "N={} vocabulary={} avg_doc_len={:.4}",
        index.doc_count(),
        index.vocabulary_size(),
        index.avg_doc_len()
    );
    Ok(())
}

fn cmd_search(
    index: &Path,
    queries: &Path,
    out_dir: &Path,
    params: Bm25Params,
    depth: usize,
    stopwords: Option<&Path>,
    expansion: Option<(usize, usize, f64)>,
) -> Result<()> {
    if depth < 1 {
        bail!("depth must be at least 1");
    }
    let mut out = OutputSet::create(out_dir)?;
    let stop = load_stopwords(stopwords)?;
    let index = CorpusIndex::load(index)?;
    let queries = load_queries(queries, &stop)?;
    let mut runs = search_all(&queries, &index, params, depth);
    let tag = match expansion {
        None => "bm25",
        Some((fb_docs, fb_terms, beta)) => {
            let expanded = expand_all(&queries, &runs, &index, fb_docs, fb_terms, beta)?;
            runs = search_all(&expanded, &index, params, depth);
            "bm25_qe"
        }
    };
    out.write(&format!("{tag}.run"), runs_text(&runs, tag))?;
    let config = format!("k1 = {}\nb = {}\ndepth = {depth}\nexpansion = {expansion:?}\n", params.k1, params.b);
    out.finish("search", Some(&config), None)?;
    println!("{} queries searched; run written to {}", runs.len(), out_dir.join(format!("{tag}.run")).display());
    Ok(())
}

/// Rocchio-expands every query from its own first-stage run; queries with
/// an empty run are kept as they are.
fn expand_all(
    queries: &[Query],
    runs: &[RunList],
    index: &CorpusIndex,
    fb_docs: usize,
    fb_terms: usize,
    beta: f64,
) -> Result<Vec<Query>> {
    let expanded = queries
        .iter()
        .zip(runs)
        .map(|(q, r)| {
            if r.is_empty() {
                Ok(q.clone())
            } else {
                rocchio_expand(q, r, index, fb_docs, fb_terms, beta)
            }
        })
        .collect::<nprf::Result<Vec<_>>>()?;
    Ok(expanded)
}

fn cmd_bm25_grid(
    index: &Path,
    queries: &Path,
    qrels: &Path,
    out_dir: &Path,
    depth: usize,
    stopwords: Option<&Path>,
) -> Result<()> {
    let mut out = OutputSet::create(out_dir)?;
    let stop = load_stopwords(stopwords)?;
    let index = CorpusIndex::load(index)?;
    let queries = load_queries(queries, &stop)?;
    let qrels = Qrels::load(qrels)?;
    let mut table = format!("{:>5}  {:>5}  {:>8}  {:>8}  {:>8}\n", "k1", "b", "MAP", "P@20", "NDCG@20");
    let mut jsonl = String::new();
    let mut best: Option<(f64, Bm25Params)> = None;
    for params in Bm25Params::grid() {
        let report = evaluate(&search_all(&queries, &index, params, depth), &qrels);
        table += &format!(
            "{:>5.1}  {:>5.1}  {:>8.4}  {:>8.4}  {:>8.4}\n",
            params.k1, params.b, report.map, report.p20, report.ndcg20
        );
        jsonl += &format!(
            "{}\n",
            json!({"k1": params.k1, "b": params.b, "map": report.map, "p20": report.p20, "ndcg20": report.ndcg20})
        );
        if best.is_none_or(|(m, _)| report.map > m) {
            best = Some((report.map, params));
        }
    }
    let (map, params) = best.expect("non-empty grid");
    table += &format!("best: k1 = {:.1}, b = {:.1}, MAP = {map:.4}\n", params.k1, params.b);
    out.write("grid.txt", &table)?;
    out.write("grid.jsonl", &jsonl)?;
    out.finish("bm25-grid", Some(&format!("depth = {depth}\n")), None)?;
    print!("{table}");
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_qe_grid(
    index: &Path,
    queries: &Path,
    qrels: &Path,
    out_dir: &Path,
    params: Bm25Params,
    beta: f64,
    depth: usize,
    stopwords: Option<&Path>,
) -> Result<()> {
    let mut out = OutputSet::create(out_dir)?;
    let stop = load_stopwords(stopwords)?;
    let index = CorpusIndex::load(index)?;
    let queries = load_queries(queries, &stop)?;
    let qrels = Qrels::load(qrels)?;
    let initial = search_all(&queries, &index, params, depth);
    let mut table = format!("{:>7}  {:>8}  {:>8}  {:>8}  {:>8}\n", "fb_docs", "fb_terms", "MAP", "P@20", "NDCG@20");
    let mut jsonl = String::new();
    let mut best: Option<(f64, usize, usize)> = None;
    for fb_docs in FB_DOCS_GRID {
        for fb_terms in FB_TERMS_GRID {
            let expanded = expand_all(&queries, &initial, &index, fb_docs, fb_terms, beta)?;
            let report = evaluate(&search_all(&expanded, &index, params, depth), &qrels);
            table += &format!(
                "{:>7}  {:>8}  {:>8.4}  {:>8.4}  {:>8.4}\n",
                fb_docs, fb_terms, report.map, report.p20, report.ndcg20
            );
            jsonl += &format!(
                "{}\n",
                json!({"fb_docs": fb_docs, "fb_terms": fb_terms, "map": report.map, "p20": report.p20, "ndcg20": report.ndcg20})
            );
            if best.is_none_or(|(m, _, _)| report.map > m) {
                best = Some((report.map, fb_docs, fb_terms));
            }
        }
    }
    let (map, fb_docs, fb_terms) = best.expect("non-empty grid");
    table += &format!("best: fb_docs = {fb_docs}, fb_terms = {fb_terms}, MAP = {map:.4}\n");
    out.write("qe_grid.txt", &table)?;
    out.write("qe_grid.jsonl", &jsonl)?;
    let config = format!("k1 = {}\nb = {}\nbeta = {beta}\ndepth = {depth}\n", params.k1, params.b);
    out.finish("qe-grid", Some(&config), None)?;
    print!("{table}");
    Ok(())
}

fn cmd_feedback(index: &Path, run: &Path, out_dir: &Path, m: usize, k: usize) -> Result<()> {
    let mut out = OutputSet::create(out_dir)?;
    let index = CorpusIndex::load(index)?;
    let runs = read_runs(run)?;
    let mut jsonl = String::new();
    for run in runs.values().filter(|r| !r.is_empty()) {
        let fb = build_feedback_set(run, &index, m, k)?;
        for (rank, (member, gate)) in fb.members.iter().zip(fb.gates()).enumerate() {
            let terms: Vec<_> = member.summary.iter().map(|tw| json!([tw.term, tw.weight])).collect();
            jsonl += &format!(
                "{}\n",
                json!({
                    "query_id": fb.query_id,
                    "rank": rank + 1,
                    "doc_id": member.doc_id,
                    "rel_q": member.rel_q_score,
                    "gate": gate,
                    "terms": terms,
                })
            );
        }
    }
    out.write("feedback.jsonl", jsonl)?;
    out.finish("feedback", Some(&format!("m = {m}\nk = {k}\n")), None)?;
    Ok(())
}

fn cmd_pool(index: &Path, run: &Path, depth: usize, out: &Path) -> Result<()> {
    let index = CorpusIndex::load(index)?;
    let runs = read_runs(run)?;
    let mut seen = std::collections::BTreeSet::new();
    for r in runs.values() {
        for doc in r.doc_ids().take(depth) {
            seen.insert(index.require_doc(doc)?);
        }
    }
    let write = || -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(out)?);
        for &doc in &seen {
            writeln!(w, "{}", index.doc_terms(doc).join(" "))?;
        }
        w.flush()?;
        Ok(())
    };
    if let Err(e) = write() {
        let _ = std::fs::remove_file(out);
        return Err(e.context(format!("writing {}", out.display())));
    }
    println!("{} documents written to {}", seen.len(), out.display());
    Ok(())
}

fn select<'a>(queries: &'a [PreparedQuery], ids: &[String]) -> Vec<&'a PreparedQuery> {
    queries.iter().filter(|q| ids.contains(&q.query_id)).collect()
}

fn cmd_train(config: ExperimentConfig, out_dir: &Path, fold: usize) -> Result<()> {
    if !(1..=5).contains(&fold) {
        bail!("fold must be between 1 and 5");
    }
    let mut out = OutputSet::create(out_dir)?;
    let exp = Experiment::load(config, true)?;
    let t = &exp.config.train;
    let queries = exp.prepare(t)?;
    let ids: Vec<String> = queries.iter().map(|q| q.query_id.clone()).collect();
    let plan = make_folds(&ids, t.seed)?;
    let f = &plan.folds[fold - 1];
    let outcome = train(&select(&queries, &f.train), &select(&queries, &f.validation), exp.qrels(), t)?;
    outcome.params.to_checkpoint().save(&out.path("model.ckpt"))?;
    let mut log = String::new();
    for (i, (loss, map)) in outcome.epoch_losses.iter().zip(&outcome.validation_maps).enumerate() {
        log += &format!("{}\n", json!({"epoch": i + 1, "loss": loss, "validation_map": map}));
    }
    log += &format!(
        "{}\n",
        json!({
            "best_epoch": outcome.best_epoch,
            "initial_validation_map": outcome.initial_validation_map,
            "train_queries": f.train,
            "validation_queries": f.validation,
        })
    );
    out.write("training.jsonl", log)?;
    let text = exp.config.to_text();
    out.finish("train", Some(&text), Some(t.seed))?;
    println!(
        "best epoch {} with validation MAP {:.4}",
        outcome.best_epoch,
        outcome.validation_maps[outcome.best_epoch - 1]
    );
    Ok(())
}

fn cmd_rerank(mut config: ExperimentConfig, checkpoint: &Path, out_dir: &Path) -> Result<()> {
    let mut out = OutputSet::create(out_dir)?;
    let params = NprfParams::from_checkpoint(&Checkpoint::load(checkpoint)?)?;
    config.train.scorer = params.scorer.kind();
    config.train.variant = params.variant;
    config.train.m = params.m;
    let exp = Experiment::load(config, false)?;
    let queries = exp.prepare(&exp.config.train)?;
    let refs: Vec<&PreparedQuery> = queries.iter().collect();
    let runs = rerank_all(&refs, &params, exp.config.train.include_query_score)?;
    let tag = params.tag();
    out.write(&format!("{tag}.run"), runs_text(&runs, &tag))?;
    let text = exp.config.to_text();
    out.finish("rerank", Some(&text), Some(exp.config.train.seed))?;
    Ok(())
}

fn ttest_text(label: &str, report: &MetricReport, baseline: &MetricReport) -> Result<String> {
    let (a, b) = aligned_map(report, baseline);
    if a.len() < 2 {
        return Ok(format!("{label} vs baseline: fewer than two shared queries, no t-test\n"));
    }
    let t = paired_t_test(&a, &b)?;
    Ok(format!(
        "{label} vs baseline on MAP over {} queries: t = {:.4}, p = {:.6}, {}\n",
        a.len(),
        t.t,
        t.p,
        if t.significant_at_95 { "significant at 95%" } else { "not significant" }
    ))
}

fn cmd_eval(run: &Path, qrels: &Path, baseline: Option<&Path>, out_dir: Option<&Path>) -> Result<()> {
    let mut out = out_dir.map(OutputSet::create).transpose()?;
    let qrels = Qrels::load(qrels)?;
    let runs: Vec<RunList> = read_runs(run)?.into_values().collect();
    let report = evaluate(&runs, &qrels);
    let mut text = report.to_table("all");
    if let Some(b) = baseline {
        let base_runs: Vec<RunList> = read_runs(b)?.into_values().collect();
        let base = evaluate(&base_runs, &qrels);
        text += &format!("baseline MAP {:.4}  P@20 {:.4}  NDCG@20 {:.4}\n", base.map, base.p20, base.ndcg20);
        text += &ttest_text("run", &report, &base)?;
    }
    print!("{text}");
    if let Some(out) = out.as_mut() {
        out.write("metrics.txt", &text)?;
        out.write("metrics.jsonl", report.to_jsonl("all"))?;
    }
    if let Some(out) = out {
        out.finish("eval", None, None)?;
    }
    Ok(())
}

fn cv_summary(outcome: &CvOutcome) -> String {
    let mut s = String::new();
    for f in &outcome.folds {
        s += &format!(
            "{}\n",
            json!({
                "fold": f.fold,
                "best_epoch": f.training.best_epoch,
                "epoch_losses": f.training.epoch_losses,
                "validation_maps": f.training.validation_maps,
                "test_queries": f.test_queries,
            })
        );
    }
    s
}

fn cmd_cv(config: ExperimentConfig, out_dir: &Path) -> Result<()> {
    let mut out = OutputSet::create(out_dir)?;
    let exp = Experiment::load(config, true)?;
    let t = &exp.config.train;
    let queries = exp.prepare(t)?;
    let outcome = cross_validate(&queries, exp.qrels(), t)?;
    let tag = format!("nprf-{}-{}", t.scorer, t.variant);
    out.write("bm25.run", runs_text(&outcome.baseline_runs, "bm25"))?;
    out.write(&format!("{tag}.run"), runs_text(&outcome.test_runs, &tag))?;
    out.write("metrics.txt", outcome.report.to_table(&tag))?;
    out.write("metrics.jsonl", outcome.report.to_jsonl(&tag))?;
    out.write("bm25_metrics.txt", outcome.baseline_report.to_table("bm25"))?;
    out.write("bm25_metrics.jsonl", outcome.baseline_report.to_jsonl("bm25"))?;
    for f in &outcome.folds {
        f.training.params.to_checkpoint().save(&out.path(&format!("fold{}.ckpt", f.fold)))?;
    }
    out.write("folds.jsonl", cv_summary(&outcome))?;
    let summary = format!(
        "{:<20}  {:>8}  {:>8}  {:>8}\n{:<20}  {:>8.4}  {:>8.4}  {:>8.4}\n{:<20}  {:>8.4}  {:>8.4}  {:>8.4}\n{}",
        "run",
        "MAP",
        "P@20",
        "NDCG@20",
        "bm25",
        outcome.baseline_report.map,
        outcome.baseline_report.p20,
        outcome.baseline_report.ndcg20,
        tag,
        outcome.report.map,
        outcome.report.p20,
        outcome.report.ndcg20,
        ttest_text(&tag, &outcome.report, &outcome.baseline_report)?,
    );
    out.write("summary.txt", &summary)?;
    let text = exp.config.to_text();
    out.finish("cv", Some(&text), Some(t.seed))?;
    print!("{summary}");
    Ok(())
}

fn cmd_sweep(config: ExperimentConfig, param: SweepParam, values: &[usize], out_dir: &Path) -> Result<()> {
    if values.is_empty() {
        bail!("--values must not be empty");
    }
    let mut out = OutputSet::create(out_dir)?;
    let exp = Experiment::load(config, true)?;
    let name = match param {
        SweepParam::M => "m",
        SweepParam::K => "k",
    };
    let mut table = format!(
        "{:>6}  {:>8}  {:>8}  {:>8}  {:>9}  {:>9}  {:>11}\n",
        name, "MAP", "P@20", "NDCG@20", "bm25 MAP", "bm25 P@20", "bm25 NDCG@20"
    );
    let mut jsonl = String::new();
    for &v in values {
        let mut t: TrainConfig = exp.config.train.clone();
        match param {
            SweepParam::M => t.m = v,
            SweepParam::K => t.k = v,
        }
        let queries = exp.prepare(&t)?;
        let o = cross_validate(&queries, exp.qrels(), &t)?;
        let (r, b) = (&o.report, &o.baseline_report);
        table += &format!(
            "{:>6}  {:>8.4}  {:>8.4}  {:>8.4}  {:>9.4}  {:>9.4}  {:>11.4}\n",
            v, r.map, r.p20, r.ndcg20, b.map, b.p20, b.ndcg20
        );
        jsonl += &format!(
            "{}\n",
            json!({
                "param": name, "value": v,
                "map": r.map, "p20": r.p20, "ndcg20": r.ndcg20,
                "bm25_map": b.map, "bm25_p20": b.p20, "bm25_ndcg20": b.ndcg20,
            })
        );
    }
    out.write("sweep.txt", &table)?;
    out.write("sweep.jsonl", &jsonl)?;
    let text = format!("{}sweep = {name}:{values:?}\n", exp.config.to_text());
    out.finish("sweep", Some(&text), Some(exp.config.train.seed))?;
    print!("{table}");
    Ok(())
}

fn cmd_synth(out_dir: &Path, seed: u64, docs: usize, queries: usize) -> Result<()> {
    let mut out = OutputSet::create(out_dir)?;
    let sc = SyntheticConfig {
        seed,
        docs,
        queries,
        ..SyntheticConfig::default()
    };
    let collection = sc.generate()?;
    for name in ["corpus.jsonl", "queries.jsonl", "qrels.txt", "embeddings.txt"] {
        out.path(name);
    }
    collection.write_to(out_dir)?;
    let abs = std::fs::canonicalize(out_dir)?;
    let mut cfg = ExperimentConfig::default();
    cfg.corpus = Some(abs.join("corpus.jsonl"));
    cfg.queries = Some(abs.join("queries.jsonl"));
    cfg.qrels = Some(abs.join("qrels.txt"));
    cfg.embeddings = Some(abs.join("embeddings.txt"));
    cfg.train.depth = 100;
    cfg.train.seed = seed;
    out.write("experiment.cfg", cfg.to_text())?;
    out.finish("synth", Some(&format!("{sc:?}\n")), Some(seed))?;
    println!(
        "{} documents, {} queries written to {}",
        collection.documents.len(),
        collection.queries.len(),
        out_dir.display()
    );
    Ok(())
}
