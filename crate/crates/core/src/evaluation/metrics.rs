use std::collections::{HashMap, HashSet};

use serde::Serialize;

use crate::first_stage::RunList;

use super::Qrels;

pub const MAP_DEPTH: usize = 1000;
pub const CUTOFF: usize = 20;

/// Average precision over the first 1000 ranks. `None` when there is no
/// relevant document; unretrieved relevant documents still count in R.
pub fn average_precision<S: AsRef<str>>(ranked: &[S], relevant: &HashSet<&str>) -> Option<f64> {
    if relevant.is_empty() {
        return None;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, doc) in ranked.iter().take(MAP_DEPTH).enumerate() {
        if relevant.contains(doc.as_ref()) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    Some(sum / relevant.len() as f64)
}

/// Relevant documents in the top `cutoff`, divided by `cutoff` even when the
/// run is shorter.
pub fn precision_at<S: AsRef<str>>(ranked: &[S], relevant: &HashSet<&str>, cutoff: usize) -> f64 {
    let hits = ranked
        .iter()
        .take(cutoff)
        .filter(|d| relevant.contains(d.as_ref()))
        .count();
    hits as f64 / cutoff as f64
}

fn gain(grade: u32) -> f64 {
    2f64.powi(grade as i32) - 1.0
}

/// NDCG with gain `2^g - 1` and discount `log2(i + 1)`. The ideal ranking is
/// taken over every judged document. `None` when the ideal DCG is zero.
pub fn ndcg_at<S: AsRef<str>>(ranked: &[S], grades: &HashMap<String, u32>, cutoff: usize) -> Option<f64> {
    let mut ideal: Vec<u32> = grades.values().copied().filter(|&g| g > 0).collect();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg: f64 = ideal
        .iter()
        .take(cutoff)
        .enumerate()
        .map(|(i, &g)| gain(g) / ((i + 2) as f64).log2())
        .sum();
    if idcg == 0.0 {
        return None;
    }
    let dcg: f64 = ranked
        .iter()
        .take(cutoff)
        .enumerate()
        .map(|(i, d)| gain(grades.get(d.as_ref()).copied().unwrap_or(0)) / ((i + 2) as f64).log2())
        .sum();
    Some(dcg / idcg)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryMetrics {
    pub query_id: String,
    pub map: f64,
    pub p20: f64,
    pub ndcg20: f64,
}

/// Per-query metrics and their means, over queries with at least one
/// relevant judgment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub per_query: Vec<QueryMetrics>,
    pub map: f64,
    pub p20: f64,
    pub ndcg20: f64,
    pub query_count: usize,
    /// Queries skipped because they have no relevant document.
    pub excluded: Vec<String>,
}

impl MetricReport {
    pub fn map_by_query(&self) -> HashMap<&str, f64> {
        self.per_query
            .iter()
            .map(|q| (q.query_id.as_str(), q.map))
            .collect()
    }
}

pub fn evaluate_query(run: &RunList, qrels: &Qrels) -> Option<QueryMetrics> {
    let grades = qrels.judgments(&run.query_id)?;
    let relevant: HashSet<&str> = grades
        .iter()
        .filter(|(_, &g)| g > 0)
        .map(|(d, _)| d.as_str())
        .collect();
    let ranked: Vec<&str> = run.doc_ids().collect();
    Some(QueryMetrics {
        query_id: run.query_id.clone(),
        map: average_precision(&ranked, &relevant)?,
        p20: precision_at(&ranked, &relevant, CUTOFF),
        ndcg20: ndcg_at(&ranked, grades, CUTOFF)?,
    })
}

/// Evaluates runs in the given order.
pub fn evaluate<'a>(runs: impl IntoIterator<Item = &'a RunList>, qrels: &Qrels) -> MetricReport {
    let mut per_query = Vec::new();
    let mut excluded = Vec::new();
    for run in runs {
        match evaluate_query(run, qrels) {
            Some(m) => per_query.push(m),
            None => {
                log::info!("query {} has no relevant documents; excluded from means", run.query_id);
                excluded.push(run.query_id.clone());
            }
        }
    }
    let n = per_query.len();
    let mean = |f: fn(&QueryMetrics) -> f64| {
        if n == 0 {
            0.0
        } else {
            per_query.iter().map(f).sum::<f64>() / n as f64
        }
    };
    MetricReport {
        map: mean(|q| q.map),
        p20: mean(|q| q.p20),
        ndcg20: mean(|q| q.ndcg20),
        query_count: n,
        per_query,
        excluded,
    }
}
