//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::{HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nprf::corpus::{build_index, CorpusIndex, Document};
use nprf::embeddings::InteractionMatrix;
use nprf::nirm::Parameters;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- metrics

/// Average precision straight from the definition: for every rank i that
/// holds a relevant document, count relevant documents in ranks 1..=i.
pub fn ap_oracle(ranked: &[String], relevant: &HashSet<String>) -> Option<f64> {
    if relevant.is_empty() {
        return None;
    }
    let ranked = &ranked[..ranked.len().min(1000)];
    let mut total = 0.0;
    for i in 0..ranked.len() {
        if relevant.contains(&ranked[i]) {
            let hits = ranked[..=i].iter().filter(|d| relevant.contains(*d)).count();
            total += hits as f64 / (i + 1) as f64;
        }
    }
    Some(total / relevant.len() as f64)
}

pub fn p20_oracle(ranked: &[String], relevant: &HashSet<String>) -> f64 {
    let mut hits = 0;
    for (i, d) in ranked.iter().enumerate() {
        if i < 20 && relevant.contains(d) {
            hits += 1;
        }
    }
    hits as f64 / 20.0
}

pub fn ndcg20_oracle(ranked: &[String], grades: &HashMap<String, u32>) -> Option<f64> {
    let dcg_of = |gs: &[u32]| -> f64 {
        let mut s = 0.0;
        for (i, &g) in gs.iter().enumerate().take(20) {
            s += (2f64.powi(g as i32) - 1.0) / ((i + 2) as f64).log2();
        }
        s
    };
    let mut ideal: Vec<u32> = grades.values().copied().collect();
    ideal.sort_by(|a, b| b.cmp(a));
    let idcg = dcg_of(&ideal);
    if idcg == 0.0 {
        return None;
    }
    let actual: Vec<u32> = ranked.iter().map(|d| *grades.get(d).unwrap_or(&0)).collect();
    Some(dcg_of(&actual) / idcg)
}

/// A random run over a pool of `pool` docs and random graded judgments for
/// a subset of them (some possibly outside the run).
pub fn random_run_and_qrels<R: Rng>(r: &mut R, pool: usize) -> (Vec<String>, HashMap<String, u32>) {
    let mut docs: Vec<String> = (0..pool).map(|i| format!("d{i}")).collect();
    for i in (1..docs.len()).rev() {
        docs.swap(i, r.random_range(0..=i));
    }
    let run_len = r.random_range(0..=pool);
    let ranked = docs[..run_len].to_vec();
    let mut grades = HashMap::new();
    for d in &docs {
        if r.random_bool(0.6) {
            grades.insert(d.clone(), r.random_range(0..=3u32));
        }
    }
    (ranked, grades)
}

// ---------------------------------------------------------------- gradients

pub const FD_STEP: f64 = 1e-5;

/// Largest relative disagreement between `analytic` and the central finite
/// difference of `f`, over every parameter. Gradients smaller than `1e-7` in
/// both forms are compared on an absolute basis.
pub fn max_gradient_error<P, F>(params: &P, analytic: &P, f: F) -> (f64, String)
where
    P: Parameters + Clone,
    F: Fn(&P) -> f64,
{
    let analytic = analytic.flatten();
    let names: Vec<(String, usize)> = params
        .blocks()
        .into_iter()
        .map(|(name, b)| (name, b.len()))
        .collect();
    let mut worst = (0.0, String::new());
    let mut flat_index = 0;
    for (block_no, (name, len)) in names.iter().enumerate() {
        for i in 0..*len {
            let eval = |delta: f64| {
                let mut p = params.clone();
                p.blocks_mut()[block_no].1[i] += delta;
                f(&p)
            };
            let numeric = (eval(FD_STEP) - eval(-FD_STEP)) / (2.0 * FD_STEP);
            let a = analytic[flat_index];
            let scale = a.abs().max(numeric.abs());
            let err = if scale < 1e-7 { (a - numeric).abs() } else { (a - numeric).abs() / scale };
            if err > worst.0 {
                worst = (err, format!("{name}[{i}]: analytic {a:e}, numeric {numeric:e}"));
            }
            flat_index += 1;
        }
    }
    worst
}

/// A matrix of cosine-like values, with a few exact matches.
pub fn random_matrix<R: Rng>(r: &mut R, rows: usize, cols: usize) -> InteractionMatrix {
    let values = (0..rows * cols)
        .map(|_| if r.random_bool(0.1) { 1.0 } else { r.random_range(-1.0..1.0) })
        .collect();
    InteractionMatrix::from_values(rows, cols, values).unwrap()
}

// ---------------------------------------------------------------- BM25

/// Toy corpus of `n` documents over a 40-word vocabulary with skewed
/// frequencies, so document frequencies vary widely.
pub fn toy_index(n: usize, seed: u64) -> CorpusIndex {
    let mut r = rng(seed);
    let docs = (0..n).map(|i| {
        let len = r.random_range(1..30);
        let terms = (0..len)
            .map(|_| {
                let x: f64 = r.random();
                format!("w{}", (x * x * 40.0) as usize)
            })
            .collect();
        Document::new(format!("doc{i:03}"), terms)
    });
    build_index(docs).unwrap()
}

/// BM25 recomputed from raw term counts with the Lucene idf.
pub fn bm25_oracle(index: &CorpusIndex, terms: &[String], doc: usize, k1: f64, b: f64) -> f64 {
    let n = index.doc_count() as f64;
    let doc_terms: Vec<Vec<&str>> = (0..index.doc_count()).map(|d| index.doc_terms(d as u32)).collect();
    let avg = doc_terms.iter().map(Vec::len).sum::<usize>() as f64 / n;
    let len = doc_terms[doc].len() as f64;
    let mut score = 0.0;
    for t in terms {
        let tf = doc_terms[doc].iter().filter(|w| **w == t.as_str()).count() as f64;
        if tf == 0.0 {
            continue;
        }
        let df = doc_terms.iter().filter(|d| d.contains(&t.as_str())).count() as f64;
        let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
        score += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * len / avg));
    }
    score
}
