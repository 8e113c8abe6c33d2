use std::collections::{HashMap, HashSet};

use crate::corpus::{CorpusIndex, TermId};
use crate::error::{Error, Result};

use super::{Query, RunList};

/// Feedback-document counts searched when tuning BM25+QE.
pub const FB_DOCS_GRID: [usize; 3] = [5, 10, 20];
/// Expansion-term counts searched when tuning BM25+QE.
pub const FB_TERMS_GRID: [usize; 3] = [10, 20, 50];

/// Appends the `fb_terms` best non-query terms from the top `fb_docs`
/// documents of `run`, ranked by tf-idf summed over those documents (ties by
/// term). Expansion terms get weight `beta`. `fb_docs` is capped at the run
/// length.
pub fn rocchio_expand(
    query: &Query,
    run: &RunList,
    index: &CorpusIndex,
    fb_docs: usize,
    fb_terms: usize,
    beta: f64,
) -> Result<Query> {
    if fb_docs < 1 || fb_terms < 1 {
        return Err(Error::Parameter(
            "feedback documents and expansion terms must both be at least 1".into(),
        ));
    }
    if run.is_empty() {
        return Err(Error::EmptyRun(query.id.clone()));
    }
    let original: HashSet<&str> = query.terms.iter().map(String::as_str).collect();
    let mut pooled: HashMap<TermId, f64> = HashMap::new();
    for entry in run.entries.iter().take(fb_docs) {
        let doc = index.require_doc(&entry.doc_id)?;
        for &(t, tf) in index.doc_term_freqs(doc) {
            if original.contains(index.term(t)) {
                continue;
            }
            *pooled.entry(t).or_insert(0.0) += tf as f64 * index.idf(t);
        }
    }
    let mut ranked: Vec<(TermId, f64)> = pooled.into_iter().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.truncate(fb_terms);

    let mut expanded = query.clone();
    for (t, _) in ranked {
        expanded.terms.push(index.term(t).to_string());
        expanded.weights.push(beta);
    }
    Ok(expanded)
}
