//! Index file: a magic line, a statistics line, then one line per document
//! holding its id, a tab, and its space-separated terms. Postings are rebuilt
//! on load and checked against the stored statistics.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::{build_index, CorpusIndex, Document};

pub const INDEX_MAGIC: &str = "NPRFIDX1";

pub(super) fn to_bytes(index: &CorpusIndex) -> Vec<u8> {
    let mut out = Vec::new();
    writeln!(
        out,
        "{INDEX_MAGIC}\nN {} V {} TOTAL {}",
        index.doc_count(),
        index.vocabulary_size(),
        index.total_len()
    )
    .expect("write to vec");
    for doc in 0..index.doc_count() as u32 {
        out.extend_from_slice(index.doc_id(doc).as_bytes());
        out.push(b'\t');
        for (i, term) in index.doc_terms(doc).into_iter().enumerate() {
            if i > 0 {
                out.push(b' ');
            }
            out.extend_from_slice(term.as_bytes());
        }
        out.push(b'\n');
    }
    out
}

fn check_token(token: &str, what: &str) -> Result<()> {
    if token.is_empty() || token.chars().any(char::is_whitespace) {
        return Err(Error::Parameter(format!(
            "{what} {token:?} cannot be stored in an index file"
        )));
    }
    Ok(())
}

pub(super) fn save(index: &CorpusIndex, path: &Path) -> Result<()> {
    for id in index.doc_ids() {
        check_token(id, "document id")?;
    }
    for term in index.vocabulary() {
        check_token(term, "term")?;
    }
    std::fs::write(path, to_bytes(index)).map_err(|e| Error::io(path, e))
}

pub(super) fn load(path: &Path) -> Result<CorpusIndex> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines().enumerate();
    let mut next_line = |what: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some((i, line)) => Ok((i + 1, line.map_err(|e| Error::io(path, e))?)),
            None => Err(Error::parse(path, 0, format!("unexpected end of file, expected {what}"))),
        }
    };

    let (_, magic) = next_line("magic header")?;
    if magic != INDEX_MAGIC {
        return Err(Error::parse(path, 1, format!("bad magic {magic:?}")));
    }
    let (_, stats) = next_line("statistics line")?;
    let fields: Vec<&str> = stats.split(' ').collect();
    let parse_stat = |key: &str, pos: usize| -> Result<u64> {
        match (fields.get(pos), fields.get(pos + 1)) {
            (Some(k), Some(v)) if *k == key => v
                .parse()
                .map_err(|_| Error::parse(path, 2, format!("bad value for {key}"))),
            _ => Err(Error::parse(path, 2, format!("missing {key}"))),
        }
    };
    let n = parse_stat("N", 0)?;
    let v = parse_stat("V", 2)?;
    let total = parse_stat("TOTAL", 4)?;

    let mut docs = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let (line_no, line) = next_line("document line")?;
        let (id, terms) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(path, line_no, "missing tab after document id"))?;
        let terms = if terms.is_empty() {
            Vec::new()
        } else {
            terms.split(' ').map(String::from).collect()
        };
        docs.push(Document::new(id, terms));
    }
    let index = build_index(docs)?;
    if index.vocabulary_size() as u64 != v || index.total_len() != total {
        return Err(Error::parse(path, 2, "statistics do not match stored documents"));
    }
    Ok(index)
}
