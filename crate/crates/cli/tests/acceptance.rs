//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line per
//! criterion and exits nonzero if any failed.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::sync::{Mutex, OnceLock};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;

use common::{
    ap_oracle, bm25_oracle, max_gradient_error, ndcg20_oracle, p20_oracle, random_matrix, random_run_and_qrels, rng,
    toy_index,
};
use nprf::corpus::{build_index, CorpusIndex, Document, Stopwords};
use nprf::evaluation::{average_precision, evaluate, evaluate_query, ndcg_at, precision_at, Qrels};
use nprf::feedback::{normalize_gates, CombineVariant, NprfParams, PreparedQuery, ScoringContext};
use nprf::first_stage::{bm25_score, bm25_search, Bm25Params, Query, RunList};
use nprf::nirm::{PreparedInput, ScorerKind, ScorerParams};
use nprf::synthetic::{SyntheticCollection, SyntheticConfig};
use nprf::training::{cross_validate, make_folds, prepare_queries, train, TrainConfig};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_secs: u64) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit_secs as f64, || {
        format!("took {:.1}s, limit {limit_secs}s", elapsed.as_secs_f64())
    })
}

// ------------------------------------------------------------ 1. gradients

const GRAD_TOLERANCE: f64 = 1e-4;

fn small_input<R: Rng>(r: &mut R, scorer: &ScorerParams) -> PreparedInput {
    let rows = r.random_range(1..=10);
    let cols = r.random_range(1..=15);
    let matrix = random_matrix(r, rows, cols);
    let idf: Vec<f64> = (0..rows).map(|_| r.random_range(0.1..6.0)).collect();
    scorer.prepare(&matrix, &idf).unwrap()
}

fn gradients() -> Check {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for (seed, kind) in [(101, ScorerKind::Drmm), (102, ScorerKind::Knrm)] {
        let mut r = rng(seed);
        for case in 0..20 {
            let params = ScorerParams::uniform(kind, &mut r);
            let input = small_input(&mut r, &params);
            let (_, cache) = params.forward(&input).unwrap();
            let analytic = params.backward(&input, &cache, 1.0).unwrap();
            let (err, at) = max_gradient_error(&params, &analytic, |p| p.score(&input).unwrap().score);
            ensure(err <= GRAD_TOLERANCE, || format!("{kind} case {case}: {err:e} at {at}"))?;
            worst = worst.max(err);
        }
    }
    let combos = [
        (103, ScorerKind::Drmm, CombineVariant::Ds),
        (104, ScorerKind::Knrm, CombineVariant::Ds),
        (105, ScorerKind::Drmm, CombineVariant::Ff),
        (106, ScorerKind::Knrm, CombineVariant::Ff),
    ];
    for (seed, kind, variant) in combos {
        let mut r = rng(seed);
        for case in 0..20 {
            let m = r.random_range(1..=5);
            let params = NprfParams::uniform(kind, variant, m, &mut r).unwrap();
            let n = r.random_range(1..=m);
            let inputs: Vec<PreparedInput> = (0..n).map(|_| small_input(&mut r, &params.scorer)).collect();
            let rel_q: Vec<f64> = (0..n).map(|_| r.random_range(0.0..20.0)).collect();
            let gates = normalize_gates(&rel_q);
            let fwd = params.forward(&inputs, &gates).unwrap();
            let analytic = params.backward(&inputs, &fwd, 1.0).unwrap();
            let (err, at) = max_gradient_error(&params, &analytic, |p| p.forward(&inputs, &gates).unwrap().score);
            ensure(err <= GRAD_TOLERANCE, || format!("nprf {kind}/{variant} case {case}: {err:e} at {at}"))?;
            worst = worst.max(err);
        }
    }
    within(start.elapsed(), 30)?;
    Ok(format!("120 instances, worst relative error {worst:.2e}"))
}

// -------------------------------------------------------------- 2. metrics

fn metrics() -> Check {
    let start = Instant::now();
    let mut r = rng(2024);
    let mut compared = 0;
    for i in 0..200 {
        let (ranked, grades) = random_run_and_qrels(&mut r, 40);
        let qid = format!("q{i}");
        let run = RunList::from_ordered(qid.clone(), ranked.iter().map(|d| (d.clone(), 0.0)).collect());
        let mut qrels = Qrels::new();
        for (d, &g) in &grades {
            qrels.insert(&qid, d, g);
        }
        let relevant: HashSet<String> = grades.iter().filter(|(_, &g)| g > 0).map(|(d, _)| d.clone()).collect();
        match (evaluate_query(&run, &qrels), ap_oracle(&ranked, &relevant)) {
            (None, None) => {}
            (Some(m), Some(ap)) => {
                let p20 = p20_oracle(&ranked, &relevant);
                let ndcg = ndcg20_oracle(&ranked, &grades).unwrap();
                ensure((m.map - ap).abs() <= 1e-10, || format!("AP instance {i}: {} vs {ap}", m.map))?;
                ensure((m.p20 - p20).abs() <= 1e-10, || format!("P@20 instance {i}: {} vs {p20}", m.p20))?;
                ensure((m.ndcg20 - ndcg).abs() <= 1e-10, || format!("NDCG@20 instance {i}: {} vs {ndcg}", m.ndcg20))?;
                compared += 1;
            }
            (m, ap) => return Err(format!("instance {i}: exclusion disagrees ({m:?} vs {ap:?})")),
        }
    }

    let rel_b: HashSet<&str> = ["b"].into_iter().collect();
    ensure(average_precision(&["a", "b", "c"], &rel_b) == Some(0.5), || "AP of [a,b,c] with b relevant".into())?;
    let rel_az: HashSet<&str> = ["a", "z"].into_iter().collect();
    ensure(average_precision(&["a", "b"], &rel_az) == Some(0.5), || "AP with an unretrieved relevant".into())?;
    let ranked: Vec<String> = (0..20).map(|i| format!("d{i}")).collect();
    let seven: HashSet<&str> = ["d0", "d3", "d4", "d9", "d12", "d18", "d19", "x"].into_iter().collect();
    ensure(precision_at(&ranked, &seven, 20) == 0.35, || "P@20 of 7 relevant".into())?;
    let rel_a: HashSet<&str> = ["a"].into_iter().collect();
    ensure(precision_at(&["a"], &rel_a, 20) == 0.05, || "P@20 of a one-document run".into())?;
    let graded: HashMap<String, u32> = [("a", 3), ("b", 2), ("c", 0), ("d", 1), ("e", 2)]
        .into_iter()
        .map(|(d, g)| (d.to_string(), g))
        .collect();
    let ndcg = ndcg_at(&["a", "b", "c", "d", "e"], &graded, 20).unwrap();
    ensure((ndcg - 0.9686383655679718).abs() < 1e-12, || format!("graded NDCG@20 {ndcg}"))?;
    ensure(ndcg_at(&["a", "b", "e", "d", "c"], &graded, 20) == Some(1.0), || "ideal NDCG@20".into())?;

    within(start.elapsed(), 10)?;
    Ok(format!("{compared} judged instances agree with the brute-force oracle to 1e-10"))
}

// --------------------------------------------------------------- 3. gating

fn gating() -> Check {
    let start = Instant::now();
    let mut r = rng(303);
    for case in 0..500 {
        let n = r.random_range(1..=12);
        let scores: Vec<f64> = if case % 10 == 0 {
            vec![r.random_range(-20.0..20.0); n]
        } else {
            (0..n).map(|_| r.random_range(-50.0..50.0)).collect()
        };
        let gates = normalize_gates(&scores);
        ensure(gates.len() == n, || format!("case {case}: {} gates for {n} scores", gates.len()))?;
        ensure(gates.iter().all(|g| (0.5..=1.0).contains(g)), || format!("case {case}: gates {gates:?}"))?;
        let top = scores.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        let raw = r.random_range(-5.0..5.0);
        ensure(raw * gates[top] == raw, || format!("case {case}: top member's gated score changed"))?;
        if case % 10 == 0 {
            ensure(gates.iter().all(|&g| g == 1.0), || format!("case {case}: constant scores gave {gates:?}"))?;
        }
    }
    within(start.elapsed(), 5)?;
    Ok("500 score vectors (50 constant)".into())
}

// -------------------------------------------------------------- 4. variants

fn random_case<R: Rng>(r: &mut R, variant: CombineVariant, kind: ScorerKind) -> (NprfParams, Vec<PreparedInput>, Vec<f64>) {
    let m = r.random_range(2..=6);
    let params = NprfParams::uniform(kind, variant, m, r).unwrap();
    let inputs: Vec<PreparedInput> = (0..m)
        .map(|_| {
            let rows = r.random_range(1..=8);
            let cols = r.random_range(1..=12);
            let matrix = random_matrix(r, rows, cols);
            let idf: Vec<f64> = (0..rows).map(|_| r.random_range(0.5..5.0)).collect();
            params.scorer.prepare(&matrix, &idf).unwrap()
        })
        .collect();
    let rel_q: Vec<f64> = (0..m).map(|_| r.random_range(0.0..15.0)).collect();
    (params, inputs, normalize_gates(&rel_q))
}

fn permuted(inputs: &[PreparedInput], gates: &[f64], order: &[usize]) -> (Vec<PreparedInput>, Vec<f64>) {
    (
        order.iter().map(|&i| inputs[i].clone()).collect(),
        order.iter().map(|&i| gates[i]).collect(),
    )
}

fn variants() -> Check {
    let mut r = rng(404);
    let mut drift: f64 = 0.0;
    for case in 0..100 {
        let kind = if case % 2 == 0 { ScorerKind::Drmm } else { ScorerKind::Knrm };
        let (params, inputs, gates) = random_case(&mut r, CombineVariant::Ds, kind);
        let base = params.forward(&inputs, &gates).unwrap().score;
        let mut order: Vec<usize> = (0..inputs.len()).collect();
        order.shuffle(&mut r);
        let (pi, pg) = permuted(&inputs, &gates, &order);
        let other = params.forward(&pi, &pg).unwrap().score;
        drift = drift.max((base - other).abs());
        ensure((base - other).abs() <= 1e-12, || format!("ds case {case}: {base} vs {other}"))?;
    }
    for case in 0..50 {
        let kind = if case % 2 == 0 { ScorerKind::Drmm } else { ScorerKind::Knrm };
        let (params, inputs, gates) = random_case(&mut r, CombineVariant::Ff, kind);
        let base = params.forward(&inputs, &gates).unwrap().score;
        let n = inputs.len();
        let changed = (1..n).any(|shift| {
            let order: Vec<usize> = (0..n).map(|i| (i + shift) % n).collect();
            let (pi, pg) = permuted(&inputs, &gates, &order);
            params.forward(&pi, &pg).unwrap().score != base
        });
        ensure(changed, || format!("ff case {case}: no permutation changed the score"))?;

        let mut prime = params.clone();
        prime.variant = CombineVariant::FfPrime;
        let ones = vec![1.0; n];
        let a = prime.forward(&inputs, &gates).unwrap().score;
        let b = params.forward(&inputs, &ones).unwrap().score;
        ensure(a == b, || format!("ff' case {case}: {a} vs ff with unit gates {b}"))?;
    }
    Ok(format!("ds max permutation drift {drift:.1e}; ff order-sensitive; ff' = ff with unit gates"))
}

// ----------------------------------------------------------------- 5. BM25

fn bm25() -> Check {
    let index = toy_index(100, 7);
    let mut r = rng(8);
    for q in 0..20 {
        let len = r.random_range(1..=4);
        let terms: Vec<String> = (0..len).map(|_| format!("w{}", r.random_range(0..45))).collect();
        let params = Bm25Params::new(r.random_range(0.6..2.0), r.random_range(0.1..1.0)).unwrap();
        let run = bm25_search(&Query::new(format!("q{q}"), terms.clone()), &index, params, 1000);
        let mut expected: Vec<(String, f64)> = (0..index.doc_count())
            .filter(|&d| terms.iter().any(|t| index.doc_terms(d as u32).contains(&t.as_str())))
            .map(|d| (index.doc_id(d as u32).to_string(), bm25_oracle(&index, &terms, d, params.k1, params.b)))
            .collect();
        expected.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let got: Vec<&str> = run.doc_ids().collect();
        let want: Vec<&str> = expected.iter().map(|(d, _)| d.as_str()).collect();
        ensure(got == want, || format!("query {q}: ordering differs from exhaustive scoring"))?;
    }

    let docs = [("d1", "a b c"), ("d2", "a a d"), ("d3", "b e")];
    let toy = build_index(
        docs.iter()
            .map(|(id, t)| Document::new(*id, t.split_whitespace().map(str::to_string).collect())),
    )
    .unwrap();
    let score = bm25_score(&Query::new("q", vec!["a".into()]), "d2", &toy, Bm25Params::default()).unwrap();
    ensure((score - 0.6243067075264112).abs() <= 1e-9, || format!("toy score {score}"))?;
    Ok(format!("20 queries match exhaustive ordering; toy score {score:.12}"))
}

// ------------------------------------------------------ synthetic experiment

const DEPTH: usize = 100;

struct Synthetic {
    collection: SyntheticCollection,
    index: CorpusIndex,
    runs: Vec<RunList>,
    /// MAP of the untruncated BM25 ranking (depth 1000).
    bm25_map: f64,
}

fn synthetic() -> &'static Synthetic {
    static CELL: OnceLock<Synthetic> = OnceLock::new();
    CELL.get_or_init(|| {
        let collection = SyntheticConfig::default().generate().unwrap();
        let index = build_index(collection.parsed_documents()).unwrap();
        let stop = Stopwords::english();
        let full: Vec<RunList> = collection
            .queries
            .iter()
            .map(|q| bm25_search(&Query::from_text(&q.id, &q.text, &stop), &index, Bm25Params::default(), 1000))
            .collect();
        let bm25_map = evaluate(&full, &collection.qrels).map;
        let runs = full
            .into_iter()
            .map(|run| RunList::from_ordered(run.query_id.clone(), run.entries.iter().take(DEPTH).map(|e| (e.doc_id.clone(), e.score)).collect()))
            .collect();
        Synthetic {
            collection,
            index,
            runs,
            bm25_map,
        }
    })
}

fn synthetic_config(kind: ScorerKind, m: usize, k: usize) -> TrainConfig {
    TrainConfig {
        scorer: kind,
        variant: CombineVariant::Ds,
        m,
        k,
        depth: DEPTH,
        seed: SyntheticConfig::default().seed,
        ..TrainConfig::default()
    }
}

fn prepared(config: &TrainConfig) -> Vec<PreparedQuery> {
    let s = synthetic();
    let ctx = ScoringContext::new(&s.index, &s.collection.embeddings);
    prepare_queries(&ctx, &s.runs, config).unwrap()
}

#[derive(Clone, Copy)]
struct CvResult {
    map: f64,
    pool_baseline: f64,
}

/// Cross-validated MAP per (scorer, m, k), shared between criteria 6 and 8.
fn cv_map(kind: ScorerKind, m: usize, k: usize) -> CvResult {
    static CACHE: Mutex<BTreeMap<(String, usize, usize), (f64, f64)>> = Mutex::new(BTreeMap::new());
    let key = (kind.to_string(), m, k);
    if let Some(&(map, pool_baseline)) = CACHE.lock().unwrap().get(&key) {
        return CvResult { map, pool_baseline };
    }
    let config = synthetic_config(kind, m, k);
    let outcome = cross_validate(&prepared(&config), &synthetic().collection.qrels, &config).unwrap();
    let result = (outcome.report.map, outcome.baseline_report.map);
    CACHE.lock().unwrap().insert(key, result);
    CvResult {
        map: result.0,
        pool_baseline: result.1,
    }
}

/// The stronger of the two BM25 references: the full ranking and the
/// depth-truncated pool that NPRF re-ranks.
fn bm25_reference(r: &CvResult) -> f64 {
    synthetic().bm25_map.max(r.pool_baseline)
}

// ---------------------------------------------------------- 6. end-to-end

fn end_to_end() -> Check {
    let start = Instant::now();
    let mut parts = Vec::new();
    let mut failures = Vec::new();
    for kind in [ScorerKind::Drmm, ScorerKind::Knrm] {
        let r = cv_map(kind, 10, 20);
        let reference = bm25_reference(&r);
        let ratio = r.map / reference;
        parts.push(format!("ds-{kind} MAP {:.4} vs BM25 {:.4} (x{ratio:.3})", r.map, reference));
        if ratio < 1.05 {
            failures.push(format!("ds-{kind} ratio {ratio:.3} < 1.05"));
        }
    }
    within(start.elapsed(), 15 * 60)?;
    let detail = parts.join("; ");
    if failures.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{}: {detail}", failures.join(", ")))
    }
}

// ------------------------------------------- 7. determinism and convergence

fn determinism() -> Check {
    let s = synthetic();
    let mut parts = Vec::new();
    for kind in [ScorerKind::Drmm, ScorerKind::Knrm] {
        let config = synthetic_config(kind, 10, 20);
        let queries = prepared(&config);
        let ids: Vec<String> = queries.iter().map(|q| q.query_id.clone()).collect();
        let fold = &make_folds(&ids, config.seed).unwrap().folds[0];
        let pick = |wanted: &[String]| -> Vec<&PreparedQuery> {
            wanted.iter().map(|id| queries.iter().find(|q| &q.query_id == id).unwrap()).collect()
        };
        let run = || train(&pick(&fold.train), &pick(&fold.validation), &s.collection.qrels, &config).unwrap();
        let (a, b) = (run(), run());
        ensure(a.params.to_checkpoint().to_text() == b.params.to_checkpoint().to_text(), || {
            format!("{kind}: checkpoints differ between identical runs")
        })?;
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        ensure(bits(&a.epoch_losses) == bits(&b.epoch_losses), || format!("{kind}: epoch losses differ"))?;
        ensure(bits(&a.validation_maps) == bits(&b.validation_maps), || format!("{kind}: validation MAPs differ"))?;
        let first = a.epoch_losses[0];
        let last = a.epoch_losses[config.epochs - 1];
        ensure(last <= 0.5 * first, || format!("{kind}: epoch-{} loss {last:.4} > half of epoch-1 loss {first:.4}", config.epochs))?;
        parts.push(format!("{kind} loss {first:.3} -> {last:.3}"));
    }
    Ok(format!("bit-identical reruns; {}", parts.join(", ")))
}

// ------------------------------------------------------------- 8. sweeps

fn sweeps() -> Check {
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for kind in [ScorerKind::Drmm, ScorerKind::Knrm] {
        let settings = [3, 5, 10].iter().map(|&m| (m, 20)).chain([10, 40].iter().map(|&k| (10, k)));
        for (m, k) in settings {
            let r = cv_map(kind, m, k);
            let reference = bm25_reference(&r);
            rows.push(format!("{kind} m={m} k={k} {:.4}", r.map));
            if r.map < reference {
                failures.push(format!("{kind} m={m} k={k}: {:.4} < BM25 {reference:.4}", r.map));
            }
        }
    }
    let detail = format!("BM25 {:.4}; {}", synthetic().bm25_map, rows.join(", "));
    if failures.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{}; {detail}", failures.join("; ")))
    }
}

// ------------------------------------------------------------- 9. recipe

/// Commands of the README's Robust04 section, with continuations joined.
fn recipe_commands(readme: &str) -> Option<Vec<String>> {
    let start = readme.find("## Robust04")?;
    let section = &readme[start..];
    let end = section[3..].find("\n## ").map(|i| i + 3).unwrap_or(section.len());
    let mut commands = Vec::new();
    let mut current = String::new();
    for line in section[..end].lines() {
        let line = line.trim();
        if current.is_empty() && !line.starts_with("nprf ") {
            continue;
        }
        match line.strip_suffix('\\') {
            Some(head) => {
                current.push_str(head);
                current.push(' ');
            }
            None => {
                current.push_str(line);
                commands.push(std::mem::take(&mut current));
            }
        }
    }
    Some(commands)
}

fn recipe() -> Check {
    let readme_path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../README.md");
    let readme = std::fs::read_to_string(readme_path).map_err(|e| format!("README.md: {e}"))?;
    let commands = recipe_commands(&readme).ok_or("README.md has no Robust04 section")?;
    let needed = ["index", "bm25-grid", "search", "pool", "cv", "eval"];
    for sub in needed {
        ensure(commands.iter().any(|c| c.split_whitespace().nth(1) == Some(sub)), || {
            format!("recipe never runs `nprf {sub}`")
        })?;
    }
    ensure(readme.contains("0.2533"), || "recipe does not state the BM25 target MAP".into())?;
    for c in &commands {
        let args: Vec<&str> = c.split_whitespace().skip(1).collect();
        let out = Command::new(env!("CARGO_BIN_EXE_nprf"))
            .arg("--dry-run")
            .args(&args)
            .output()
            .map_err(|e| e.to_string())?;
        ensure(out.status.success(), || {
            format!("`{c}` does not parse: {}", String::from_utf8_lossy(&out.stderr).trim())
        })?;
    }
    Ok(format!("{} documented commands parse; review the recipe by hand", commands.len()))
}

// ---------------------------------------------------------------- driver

fn main() -> ExitCode {
    let criteria: [(u32, &str, fn() -> Check); 9] = [
        (1, "gradients", gradients),
        (2, "metric oracles", metrics),
        (3, "gating", gating),
        (4, "combination variants", variants),
        (5, "BM25 oracle", bm25),
        (6, "synthetic end-to-end", end_to_end),
        (7, "determinism and convergence", determinism),
        (8, "sensitivity sweep", sweeps),
        (9, "full-data recipe", recipe),
    ];
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (n, name, check) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&n)) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {n} ({name}): PASS [{secs:.1}s] {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n} ({name}): FAIL [{secs:.1}s] {detail}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
