//! Relevance judgments, ranking metrics and significance testing.

mod metrics;
mod qrels;
mod ttest;

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub use metrics::{
    average_precision, evaluate, evaluate_query, ndcg_at, precision_at, MetricReport, QueryMetrics, CUTOFF,
    MAP_DEPTH,
};
pub use qrels::Qrels;
pub use ttest::{ln_gamma, paired_t_test, regularized_incomplete_beta, two_tailed_p, TTest};

impl MetricReport {
    /// Aligned plain-text table: one row per query, then the mean row.
    pub fn to_table(&self, label: &str) -> String {
        let width = self
            .per_query
            .iter()
            .map(|q| q.query_id.len())
            .chain([label.len(), 5])
            .max()
            .unwrap_or(5);
        let mut out = String::new();
        writeln!(out, "{:<width$}  {:>8}  {:>8}  {:>8}", "query", "MAP", "P@20", "NDCG@20").unwrap();
        for q in &self.per_query {
            writeln!(out, "{:<width$}  {:>8.4}  {:>8.4}  {:>8.4}", q.query_id, q.map, q.p20, q.ndcg20).unwrap();
        }
        writeln!(
            out,
            "{:<width$}  {:>8.4}  {:>8.4}  {:>8.4}   ({} queries)",
            label, self.map, self.p20, self.ndcg20, self.query_count
        )
        .unwrap();
        out
    }

    /// One JSON object per query followed by a summary object.
    pub fn to_jsonl(&self, label: &str) -> String {
        let mut out = String::new();
        for q in &self.per_query {
            out.push_str(&serde_json::to_string(q).expect("serializable"));
            out.push('\n');
        }
        let summary = serde_json::json!({
            "query_id": "all",
            "label": label,
            "map": self.map,
            "p20": self.p20,
            "ndcg20": self.ndcg20,
            "query_count": self.query_count,
            "excluded": self.excluded,
        });
        out.push_str(&summary.to_string());
        out.push('\n');
        out
    }

    pub fn write(&self, table_path: &Path, jsonl_path: &Path, label: &str) -> Result<()> {
        std::fs::write(table_path, self.to_table(label)).map_err(|e| Error::io(table_path, e))?;
        std::fs::write(jsonl_path, self.to_jsonl(label)).map_err(|e| Error::io(jsonl_path, e))
    }
}

/// Per-query MAP values of two reports aligned on their shared queries.
pub fn aligned_map(a: &MetricReport, b: &MetricReport) -> (Vec<f64>, Vec<f64>) {
    let b_map = b.map_by_query();
    a.per_query
        .iter()
        .filter_map(|q| b_map.get(q.query_id.as_str()).map(|&bm| (q.map, bm)))
        .unzip()
}
