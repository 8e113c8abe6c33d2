//! Unsupervised first-stage ranking: BM25 and a Rocchio-style expansion.

mod rocchio;
mod run;

use crate::corpus::{preprocess, CorpusIndex, DocIdx, Stopwords};
use crate::error::{Error, Result};

pub use rocchio::{rocchio_expand, FB_DOCS_GRID, FB_TERMS_GRID};
pub use run::{read_runs, write_runs, RunEntry, RunList};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QueryKind {
    #[default]
    Title,
    Description,
}

/// A preprocessed query. Every term carries a weight; original terms have
/// weight 1.0 and expansion terms the Rocchio beta.
#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub id: String,
    pub terms: Vec<String>,
    pub weights: Vec<f64>,
    pub kind: QueryKind,
}

impl Query {
    pub fn new(id: impl Into<String>, terms: Vec<String>) -> Self {
        let weights = vec![1.0; terms.len()];
        Query {
            id: id.into(),
            terms,
            weights,
            kind: QueryKind::Title,
        }
    }

    /// Preprocesses raw query text exactly as documents are.
    pub fn from_text(id: impl Into<String>, text: &str, stopwords: &Stopwords) -> Self {
        Self::new(id, preprocess(text, stopwords))
    }

    pub fn with_kind(mut self, kind: QueryKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn weighted_terms(&self) -> impl Iterator<Item = (&str, f64)> {
        self.terms.iter().map(String::as_str).zip(self.weights.iter().copied())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

impl Bm25Params {
    pub fn new(k1: f64, b: f64) -> Result<Self> {
        if !(k1 >= 0.0 && k1.is_finite()) {
            return Err(Error::Parameter(format!("k1 must be >= 0, got {k1}")));
        }
        if !(0.0..=1.0).contains(&b) {
            return Err(Error::Parameter(format!("b must be in [0, 1], got {b}")));
        }
        Ok(Bm25Params { k1, b })
    }

    /// Grid used for tuning: k1 in 0.6..=2.0 step 0.2, b in 0.1..=1.0 step 0.1.
    pub fn grid() -> Vec<Bm25Params> {
        let mut grid = Vec::new();
        for i in 0..8 {
            for j in 1..=10 {
                grid.push(Bm25Params {
                    k1: (6 + 2 * i) as f64 / 10.0,
                    b: j as f64 / 10.0,
                });
            }
        }
        grid
    }
}

/// `ln(1 + (N - df + 0.5) / (df + 0.5))`, non-negative for every df.
pub fn bm25_idf(doc_count: usize, df: usize) -> f64 {
    let (n, df) = (doc_count as f64, df as f64);
    (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
}

#[inline]
fn term_contribution(idf: f64, tf: f64, doc_len: f64, avg_len: f64, params: Bm25Params) -> f64 {
    let norm = if avg_len > 0.0 { doc_len / avg_len } else { 1.0 };
    idf * tf * (params.k1 + 1.0) / (tf + params.k1 * (1.0 - params.b + params.b * norm))
}

/// BM25 score of one document, summing over query term occurrences in order.
pub fn bm25_score(query: &Query, doc_id: &str, index: &CorpusIndex, params: Bm25Params) -> Result<f64> {
    let doc = index.require_doc(doc_id)?;
    Ok(score_doc(query, doc, index, params))
}

pub(crate) fn score_doc(query: &Query, doc: DocIdx, index: &CorpusIndex, params: Bm25Params) -> f64 {
    let n = index.doc_count();
    let doc_len = index.doc_len(doc) as f64;
    let mut score = 0.0;
    for (term, weight) in query.weighted_terms() {
        let tf = index.tf(term, doc);
        if tf == 0 {
            continue;
        }
        let idf = bm25_idf(n, index.df(term));
        score += weight * term_contribution(idf, tf as f64, doc_len, index.avg_doc_len(), params);
    }
    score
}

/// Top-`depth` documents containing at least one query term with non-zero
/// weight, by descending BM25 score; ties go to the smaller doc id.
pub fn bm25_search(query: &Query, index: &CorpusIndex, params: Bm25Params, depth: usize) -> RunList {
    let n = index.doc_count();
    let mut scores = vec![0.0f64; n];
    let mut touched = vec![false; n];
    let mut candidates: Vec<DocIdx> = Vec::new();
    for (term, weight) in query.weighted_terms() {
        let Some(tid) = index.term_id(term) else {
            continue;
        };
        let postings = index.postings(tid);
        let idf = bm25_idf(n, postings.len());
        for p in postings {
            let d = p.doc as usize;
            scores[d] += weight
                * term_contribution(idf, p.tf as f64, index.doc_len(p.doc) as f64, index.avg_doc_len(), params);
            if weight != 0.0 && !touched[d] {
                touched[d] = true;
                candidates.push(p.doc);
            }
        }
    }
    // doc indices ascend with doc id
    candidates.sort_unstable_by(|&a, &b| {
        scores[b as usize]
            .total_cmp(&scores[a as usize])
            .then(a.cmp(&b))
    });
    candidates.truncate(depth);
    RunList::from_ordered(
        query.id.clone(),
        candidates
            .into_iter()
            .map(|d| (index.doc_id(d).to_string(), scores[d as usize]))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_index, Document};

    fn toy() -> CorpusIndex {
        let docs = [
            ("d1", "a b c a"),
            ("d2", "b c"),
            ("d3", "a d d d e"),
        ];
        build_index(docs.iter().map(|(id, t)| {
            Document::new(*id, t.split(' ').map(String::from).collect())
        }))
        .unwrap()
    }

    fn q(terms: &[&str]) -> Query {
        Query::new("q", terms.iter().map(|s| s.to_string()).collect())
    }

    #[test]
    fn hand_computed_toy_score() {
        // N=3, df(a)=2, avgdl=11/3, d1 has tf(a)=2 and length 4
        let index = toy();
        let idf = (1.0f64 + (3.0 - 2.0 + 0.5) / (2.0 + 0.5)).ln();
        let expected = idf * 2.0 * 2.2 / (2.0 + 1.2 * (0.25 + 0.75 * 4.0 / (11.0 / 3.0)));
        let got = bm25_score(&q(&["a"]), "d1", &index, Bm25Params::default()).unwrap();
        assert!((got - expected).abs() < 1e-12);
        assert!((got - 0.6301433699583).abs() < 1e-9);
    }

    #[test]
    fn absent_and_empty_queries_score_zero() {
        let index = toy();
        let p = Bm25Params::default();
        assert_eq!(bm25_score(&q(&["e"]), "d2", &index, p).unwrap(), 0.0);
        assert_eq!(bm25_score(&q(&[]), "d1", &index, p).unwrap(), 0.0);
        assert!(matches!(bm25_score(&q(&["a"]), "zz", &index, p), Err(Error::UnknownDocument(_))));
    }

    #[test]
    fn search_truncates_to_matching_docs() {
        let index = toy();
        let run = bm25_search(&q(&["e"]), &index, Bm25Params::default(), 1000);
        assert_eq!(run.len(), 1);
        assert_eq!(run.entries[0].rank, 1);
        assert_eq!(run.entries[0].doc_id, "d3");
        let run = bm25_search(&q(&["a", "b"]), &index, Bm25Params::default(), 1000);
        assert_eq!(run.len(), 3);
    }

    #[test]
    fn grid_covers_documented_ranges() {
        let grid = Bm25Params::grid();
        assert_eq!(grid.len(), 80);
        assert_eq!(grid[0], Bm25Params { k1: 0.6, b: 0.1 });
        assert_eq!(grid[79], Bm25Params { k1: 2.0, b: 1.0 });
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(Bm25Params::new(-0.1, 0.5).is_err());
        assert!(Bm25Params::new(1.0, 1.5).is_err());
    }
}
