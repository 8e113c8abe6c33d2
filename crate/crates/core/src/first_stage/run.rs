use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RunEntry {
    pub doc_id: String,
    pub score: f64,
    pub rank: usize,
}

/// A ranked result list for one query. Ranks start at 1 and follow entry
/// order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunList {
    pub query_id: String,
    pub entries: Vec<RunEntry>,
}

impl RunList {
    /// Assigns ranks 1.. to already-ordered `(doc_id, score)` pairs.
    pub fn from_ordered(query_id: impl Into<String>, ordered: Vec<(String, f64)>) -> Self {
        RunList {
            query_id: query_id.into(),
            entries: ordered
                .into_iter()
                .enumerate()
                .map(|(i, (doc_id, score))| RunEntry {
                    doc_id,
                    score,
                    rank: i + 1,
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.doc_id.as_str())
    }

    pub fn truncated(&self, depth: usize) -> RunList {
        RunList {
            query_id: self.query_id.clone(),
            entries: self.entries.iter().take(depth).cloned().collect(),
        }
    }

    /// Appends TREC run lines: `qid Q0 docid rank score tag`.
    pub fn write_trec<W: Write>(&self, out: &mut W, tag: &str) -> std::io::Result<()> {
        for e in &self.entries {
            writeln!(
                out,
                "{} Q0 {} {} {:.6} {}",
                self.query_id, e.doc_id, e.rank, e.score, tag
            )?;
        }
        Ok(())
    }
}

/// Writes runs in the given order as one TREC run file.
pub fn write_runs(path: &Path, runs: &[RunList], tag: &str) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    for run in runs {
        run.write_trec(&mut out, tag).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Reads a TREC run file, ordering each query's entries by rank.
pub fn read_runs(path: &Path) -> Result<BTreeMap<String, RunList>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut runs: BTreeMap<String, RunList> = BTreeMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 6 {
            return Err(Error::parse(path, i + 1, "expected `qid Q0 docid rank score tag`"));
        }
        let rank: usize = fields[3]
            .parse()
            .map_err(|_| Error::parse(path, i + 1, "rank is not an integer"))?;
        let score: f64 = fields[4]
            .parse()
            .map_err(|_| Error::parse(path, i + 1, "score is not a number"))?;
        let run = runs.entry(fields[0].to_string()).or_insert_with(|| RunList {
            query_id: fields[0].to_string(),
            entries: Vec::new(),
        });
        run.entries.push(RunEntry {
            doc_id: fields[2].to_string(),
            score,
            rank,
        });
    }
    for run in runs.values_mut() {
        run.entries.sort_by_key(|e| e.rank);
    }
    Ok(runs)
}
