//! Flat `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::embeddings::OovPolicy;
use crate::error::{Error, Result};
use crate::first_stage::Bm25Params;
use crate::training::TrainConfig;

/// Paths and hyperparameters for an experiment. Keys not present in a file
/// keep their defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub corpus: Option<PathBuf>,
    /// Prebuilt index; takes precedence over `corpus`.
    pub index: Option<PathBuf>,
    pub queries: Option<PathBuf>,
    /// Precomputed initial ranking; otherwise BM25 runs over `queries`.
    pub run: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub qrels: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub train: TrainConfig,
    pub target_cap: Option<usize>,
    pub oov: OovPolicy,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            corpus: None,
            index: None,
            queries: None,
            run: None,
            embeddings: None,
            qrels: None,
            stopwords: None,
            output: None,
            train: TrainConfig::default(),
            target_cap: None,
            oov: OovPolicy::SkipTerm,
        }
    }
}

pub const KEYS: &[&str] = &[
    "corpus",
    "index",
    "queries",
    "run",
    "embeddings",
    "qrels",
    "stopwords",
    "output",
    "m",
    "k",
    "depth",
    "model",
    "variant",
    "lr",
    "batch_size",
    "epochs",
    "per_query",
    "seed",
    "bm25.k1",
    "bm25.b",
    "include_query_score",
    "target_cap",
    "oov",
];

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::Parameter(format!("{key} = {value}: {e}")))
}

impl ExperimentConfig {
    /// Sets one key. Relative paths are taken as given.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let t = &mut self.train;
        match key {
            "corpus" => self.corpus = Some(value.into()),
            "index" => self.index = Some(value.into()),
            "queries" => self.queries = Some(value.into()),
            "run" => self.run = Some(value.into()),
            "embeddings" => self.embeddings = Some(value.into()),
            "qrels" => self.qrels = Some(value.into()),
            "stopwords" => self.stopwords = Some(value.into()),
            "output" => self.output = Some(value.into()),
            "m" => t.m = parse_value(key, value)?,
            "k" => t.k = parse_value(key, value)?,
            "depth" => t.depth = parse_value(key, value)?,
            "model" => t.scorer = parse_value(key, value)?,
            "variant" => t.variant = parse_value(key, value)?,
            "lr" => t.lr = parse_value(key, value)?,
            "batch_size" => t.batch_size = parse_value(key, value)?,
            "epochs" => t.epochs = parse_value(key, value)?,
            "per_query" => t.per_query = parse_value(key, value)?,
            "seed" => t.seed = parse_value(key, value)?,
            "bm25.k1" => t.bm25.k1 = parse_value(key, value)?,
            "bm25.b" => t.bm25.b = parse_value(key, value)?,
            "include_query_score" => t.include_query_score = parse_value(key, value)?,
            "target_cap" => {
                self.target_cap = match value {
                    "none" => None,
                    v => Some(parse_value(key, v)?),
                }
            }
            "oov" => {
                self.oov = match value {
                    "skip" => OovPolicy::SkipTerm,
                    "zero" => OovPolicy::ZeroVector,
                    other => return Err(Error::Parameter(format!("oov must be skip or zero, got {other}"))),
                }
            }
            other => return Err(Error::Parameter(format!("unknown config key {other}"))),
        }
        Ok(())
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut config = ExperimentConfig::default();
        let mut seen = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(path, i + 1, "expected key = value"))?;
            let (key, value) = (key.trim(), value.trim());
            if let Some(first) = seen.insert(key.to_string(), i + 1) {
                return Err(Error::parse(path, i + 1, format!("{key} already set on line {first}")));
            }
            config
                .set(key, value)
                .map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Checks ranges and that every configured input file exists.
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        Bm25Params::new(self.train.bm25.k1, self.train.bm25.b)?;
        for path in [
            &self.corpus,
            &self.index,
            &self.queries,
            &self.run,
            &self.embeddings,
            &self.qrels,
            &self.stopwords,
        ]
            .into_iter()
            .flatten()
        {
            if !path.exists() {
                return Err(Error::Parameter(format!("{} does not exist", path.display())));
            }
        }
        Ok(())
    }

    /// Canonical text form: every key, in a fixed order. Parsing it yields
    /// an equal config, and its hash identifies the experiment.
    pub fn to_text(&self) -> String {
        let t = &self.train;
        let mut out = String::new();
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        for (key, value) in [
            ("corpus", path(&self.corpus)),
            ("index", path(&self.index)),
            ("queries", path(&self.queries)),
            ("run", path(&self.run)),
            ("embeddings", path(&self.embeddings)),
            ("qrels", path(&self.qrels)),
            ("stopwords", path(&self.stopwords)),
            ("output", path(&self.output)),
        ] {
            if let Some(v) = value {
                let _ = writeln!(out, "{key} = {v}");
            }
        }
        let _ = writeln!(out, "m = {}", t.m);
        let _ = writeln!(out, "k = {}", t.k);
        let _ = writeln!(out, "depth = {}", t.depth);
        let _ = writeln!(out, "model = {}", t.scorer);
        let _ = writeln!(out, "variant = {}", t.variant);
        let _ = writeln!(out, "lr = {}", t.lr);
        let _ = writeln!(out, "batch_size = {}", t.batch_size);
        let _ = writeln!(out, "epochs = {}", t.epochs);
        let _ = writeln!(out, "per_query = {}", t.per_query);
        let _ = writeln!(out, "seed = {}", t.seed);
        let _ = writeln!(out, "bm25.k1 = {}", t.bm25.k1);
        let _ = writeln!(out, "bm25.b = {}", t.bm25.b);
        let _ = writeln!(out, "include_query_score = {}", t.include_query_score);
        match self.target_cap {
            Some(cap) => {
                let _ = writeln!(out, "target_cap = {cap}");
            }
            None => out.push_str("target_cap = none\n"),
        }
        let oov = match self.oov {
            OovPolicy::SkipTerm => "skip",
            OovPolicy::ZeroVector => "zero",
        };
        let _ = writeln!(out, "oov = {oov}");
        out
    }
}
