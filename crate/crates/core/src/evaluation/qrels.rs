use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Graded judgments `(query, doc) -> grade`. Unjudged pairs count as grade 0.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Qrels {
    judgments: BTreeMap<String, HashMap<String, u32>>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    /// Later judgments of the same pair replace earlier ones.
    pub fn insert(&mut self, query_id: &str, doc_id: &str, grade: u32) {
        self.judgments
            .entry(query_id.to_string())
            .or_default()
            .insert(doc_id.to_string(), grade);
    }

    /// Parses `query_id 0 doc_id grade` lines. Negative grades are read as 0.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut qrels = Qrels::new();
        for (i, line) in text.lines().enumerate() {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            if fields.len() != 4 {
                return Err(Error::parse(path, i + 1, "expected `query_id 0 doc_id grade`"));
            }
            let grade: i64 = fields[3]
                .parse()
                .map_err(|_| Error::parse(path, i + 1, "grade is not an integer"))?;
            qrels.insert(fields[0], fields[2], grade.max(0) as u32);
        }
        Ok(qrels)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut text = String::new();
        for line in BufReader::new(file).lines() {
            text.push_str(&line.map_err(|e| Error::io(path, e))?);
            text.push('\n');
        }
        Self::parse(&text, path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        let mut write = || -> std::io::Result<()> {
            for (qid, docs) in &self.judgments {
                let mut docs: Vec<_> = docs.iter().collect();
                docs.sort();
                for (doc, grade) in docs {
                    writeln!(out, "{qid} 0 {doc} {grade}")?;
                }
            }
            out.flush()
        };
        write().map_err(|e| Error::io(path, e))
    }

    pub fn grade(&self, query_id: &str, doc_id: &str) -> u32 {
        self.judgments
            .get(query_id)
            .and_then(|d| d.get(doc_id))
            .copied()
            .unwrap_or(0)
    }

    pub fn is_judged(&self, query_id: &str, doc_id: &str) -> bool {
        self.judgments
            .get(query_id)
            .is_some_and(|d| d.contains_key(doc_id))
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.judgments.keys().map(String::as_str)
    }

    pub fn judgments(&self, query_id: &str) -> Option<&HashMap<String, u32>> {
        self.judgments.get(query_id)
    }

    /// Number of documents with grade > 0.
    pub fn num_relevant(&self, query_id: &str) -> usize {
        self.judgments
            .get(query_id)
            .map_or(0, |d| d.values().filter(|&&g| g > 0).count())
    }
}
