//! Document ingestion, preprocessing and the inverted index.

mod persist;
pub mod porter;
mod text;

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use persist::INDEX_MAGIC;
pub use text::{preprocess, tokenize, Stopwords};

pub type TermId = u32;
pub type DocIdx = u32;

/// A preprocessed document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub terms: Vec<String>,
}

impl Document {
    pub fn new(id: impl Into<String>, terms: Vec<String>) -> Self {
        Document {
            id: id.into(),
            terms,
        }
    }

    /// Tokenizes `text` with [`preprocess`].
    pub fn from_text(id: impl Into<String>, text: &str, stopwords: &Stopwords) -> Self {
        Self::new(id, preprocess(text, stopwords))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// One line of a JSON-lines corpus or query file.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct RawRecord {
    pub id: String,
    pub text: String,
}

/// Reads `{"id": ..., "text": ...}` objects, one per line. Blank lines are
/// skipped; ids may not contain whitespace because run files are
/// space-delimited.
pub fn read_jsonl(path: &Path) -> Result<Vec<RawRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: RawRecord = serde_json::from_str(&line)
            .map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        if record.id.is_empty() || record.id.chars().any(char::is_whitespace) {
            return Err(Error::parse(
                path,
                i + 1,
                format!("invalid id {:?}: must be non-empty without whitespace", record.id),
            ));
        }
        records.push(record);
    }
    Ok(records)
}

/// A term and its tf-idf weight within one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermWeight {
    pub term: String,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    pub doc: DocIdx,
    pub tf: u32,
}

/// Immutable inverted index with the statistics needed by BM25 and tf-idf.
///
/// Documents are stored in ascending `doc_id` order and vocabulary in
/// lexicographic order, so the index does not depend on input order.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusIndex {
    doc_ids: Vec<String>,
    doc_lookup: HashMap<String, DocIdx>,
    doc_terms: Vec<Vec<TermId>>,
    /// per-document (term, tf), sorted by term id
    doc_tfs: Vec<Vec<(TermId, u32)>>,
    vocab: Vec<String>,
    term_lookup: HashMap<String, TermId>,
    postings: Vec<Vec<Posting>>,
    total_len: u64,
    avg_doc_len: f64,
}

/// Builds the index. Input order does not affect the result.
pub fn build_index<I>(docs: I) -> Result<CorpusIndex>
where
    I: IntoIterator<Item = Document>,
{
    let mut docs: Vec<Document> = docs.into_iter().collect();
    let mut seen = std::collections::HashSet::with_capacity(docs.len());
    for doc in &docs {
        if !seen.insert(doc.id.as_str()) {
            return Err(Error::DuplicateDocument(doc.id.clone()));
        }
    }
    if docs.is_empty() {
        return Err(Error::Parameter("cannot index an empty corpus".into()));
    }
    docs.sort_by(|a, b| a.id.cmp(&b.id));

    let mut vocab: Vec<String> = docs
        .iter()
        .flat_map(|d| d.terms.iter().cloned())
        .collect::<std::collections::HashSet<_>>()
        .into_iter()
        .collect();
    vocab.sort_unstable();
    let term_lookup: HashMap<String, TermId> = vocab
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), i as TermId))
        .collect();

    let mut postings: Vec<Vec<Posting>> = vec![Vec::new(); vocab.len()];
    let mut doc_terms = Vec::with_capacity(docs.len());
    let mut doc_tfs = Vec::with_capacity(docs.len());
    let mut total_len = 0u64;
    for (idx, doc) in docs.iter().enumerate() {
        let ids: Vec<TermId> = doc.terms.iter().map(|t| term_lookup[t]).collect();
        let mut sorted = ids.clone();
        sorted.sort_unstable();
        let mut tfs: Vec<(TermId, u32)> = Vec::new();
        for t in sorted {
            match tfs.last_mut() {
                Some((last, count)) if *last == t => *count += 1,
                _ => tfs.push((t, 1)),
            }
        }
        for &(t, tf) in &tfs {
            postings[t as usize].push(Posting {
                doc: idx as DocIdx,
                tf,
            });
        }
        total_len += ids.len() as u64;
        doc_terms.push(ids);
        doc_tfs.push(tfs);
    }

    let doc_ids: Vec<String> = docs.into_iter().map(|d| d.id).collect();
    let doc_lookup = doc_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.clone(), i as DocIdx))
        .collect();
    let avg_doc_len = total_len as f64 / doc_ids.len() as f64;
    Ok(CorpusIndex {
        doc_ids,
        doc_lookup,
        doc_terms,
        doc_tfs,
        vocab,
        term_lookup,
        postings,
        total_len,
        avg_doc_len,
    })
}

impl CorpusIndex {
    pub fn doc_count(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn avg_doc_len(&self) -> f64 {
        self.avg_doc_len
    }

    pub fn total_len(&self) -> u64 {
        self.total_len
    }

    pub fn vocabulary_size(&self) -> usize {
        self.vocab.len()
    }

    /// Terms in lexicographic order; position equals [`TermId`].
    pub fn vocabulary(&self) -> &[String] {
        &self.vocab
    }

    pub fn term_id(&self, term: &str) -> Option<TermId> {
        self.term_lookup.get(term).copied()
    }

    pub fn term(&self, id: TermId) -> &str {
        &self.vocab[id as usize]
    }

    pub fn doc_index(&self, doc_id: &str) -> Option<DocIdx> {
        self.doc_lookup.get(doc_id).copied()
    }

    pub fn require_doc(&self, doc_id: &str) -> Result<DocIdx> {
        self.doc_index(doc_id)
            .ok_or_else(|| Error::UnknownDocument(doc_id.to_string()))
    }

    pub fn doc_id(&self, doc: DocIdx) -> &str {
        &self.doc_ids[doc as usize]
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn doc_len(&self, doc: DocIdx) -> usize {
        self.doc_terms[doc as usize].len()
    }

    pub fn doc_term_ids(&self, doc: DocIdx) -> &[TermId] {
        &self.doc_terms[doc as usize]
    }

    /// Token strings of a document in original order.
    pub fn doc_terms(&self, doc: DocIdx) -> Vec<&str> {
        self.doc_terms[doc as usize]
            .iter()
            .map(|&t| self.term(t))
            .collect()
    }

    pub fn document(&self, doc: DocIdx) -> Document {
        Document::new(
            self.doc_id(doc),
            self.doc_terms(doc).into_iter().map(String::from).collect(),
        )
    }

    /// Distinct terms of a document with their frequencies, by term id.
    pub fn doc_term_freqs(&self, doc: DocIdx) -> &[(TermId, u32)] {
        &self.doc_tfs[doc as usize]
    }

    pub fn postings(&self, term: TermId) -> &[Posting] {
        &self.postings[term as usize]
    }

    pub fn df(&self, term: &str) -> usize {
        self.term_id(term).map_or(0, |t| self.postings(t).len())
    }

    pub fn tf(&self, term: &str, doc: DocIdx) -> u32 {
        let Some(t) = self.term_id(term) else {
            return 0;
        };
        let tfs = &self.doc_tfs[doc as usize];
        tfs.binary_search_by_key(&t, |&(id, _)| id)
            .map_or(0, |i| tfs[i].1)
    }

    /// `ln(N / df)`; zero for terms outside the vocabulary.
    pub fn idf(&self, term: TermId) -> f64 {
        let df = self.postings[term as usize].len();
        if df == 0 {
            return 0.0;
        }
        (self.doc_count() as f64 / df as f64).ln()
    }

    pub fn idf_of(&self, term: &str) -> f64 {
        self.term_id(term).map_or(0.0, |t| self.idf(t))
    }

    /// The `k` highest tf-idf terms of `doc`, where tf-idf is
    /// `tf * ln(N / df)`. Ties are ordered lexicographically by term.
    pub fn tfidf_summary(&self, doc: DocIdx, k: usize) -> Result<Vec<TermWeight>> {
        if k < 1 {
            return Err(Error::Parameter("summary size k must be at least 1".into()));
        }
        let mut weighted: Vec<(TermId, f64)> = self.doc_tfs[doc as usize]
            .iter()
            .map(|&(t, tf)| (t, tf as f64 * self.idf(t)))
            .collect();
        // term ids follow lexicographic order, so comparing ids breaks ties by term
        weighted.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        weighted.truncate(k);
        Ok(weighted
            .into_iter()
            .map(|(t, weight)| TermWeight {
                term: self.term(t).to_string(),
                weight,
            })
            .collect())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        persist::save(self, path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        persist::load(path)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        persist::to_bytes(self)
    }
}
