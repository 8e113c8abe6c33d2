use std::collections::HashSet;
use std::path::Path;

use crate::error::{Error, Result};

use super::porter;

const DEFAULT_STOPWORDS: &str = include_str!("../../data/stopwords_en.txt");

/// A lowercase stopword set.
#[derive(Debug, Clone, Default)]
pub struct Stopwords(HashSet<String>);

impl Stopwords {
    /// The bundled English list.
    pub fn english() -> Self {
        Self::from_lines(DEFAULT_STOPWORDS)
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// One word per line; blank lines are ignored and words are lowercased.
    pub fn from_lines(text: &str) -> Self {
        Stopwords(
            text.lines()
                .map(|l| l.trim().to_lowercase())
                .filter(|l| !l.is_empty())
                .collect(),
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::from_lines(&text))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<S: Into<String>> FromIterator<S> for Stopwords {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Stopwords(iter.into_iter().map(|s| s.into().to_lowercase()).collect())
    }
}

/// Lowercases and splits on every non-alphanumeric character.
pub fn tokenize(raw: &str) -> impl Iterator<Item = String> + '_ {
    raw.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

/// Tokenizes, drops stopwords (matched before stemming) and Porter-stems the
/// remaining tokens, preserving order.
pub fn preprocess(raw: &str, stopwords: &Stopwords) -> Vec<String> {
    tokenize(raw)
        .filter(|t| !stopwords.contains(t))
        .map(|t| porter::stem(&t))
        .collect()
}
