//! Loading the inputs an experiment config points at.

use std::path::Path;

use anyhow::{bail, Context, Result};

use nprf::config::ExperimentConfig;
use nprf::corpus::{build_index, read_jsonl, CorpusIndex, Document, Stopwords};
use nprf::embeddings::EmbeddingTable;
use nprf::evaluation::Qrels;
use nprf::feedback::{PreparedQuery, ScoringContext};
use nprf::first_stage::{bm25_search, read_runs, Bm25Params, Query, RunList};
use nprf::training::prepare_queries;

pub fn load_stopwords(path: Option<&Path>) -> Result<Stopwords> {
    match path {
        Some(p) => Stopwords::load(p).with_context(|| format!("loading stopwords {}", p.display())),
        None => Ok(Stopwords::english()),
    }
}

pub fn index_from_corpus(corpus: &Path, stopwords: &Stopwords) -> Result<CorpusIndex> {
    let records = read_jsonl(corpus)?;
    let docs = records.iter().map(|r| Document::from_text(r.id.clone(), &r.text, stopwords));
    Ok(build_index(docs)?)
}

pub fn load_queries(path: &Path, stopwords: &Stopwords) -> Result<Vec<Query>> {
    Ok(read_jsonl(path)?
        .into_iter()
        .map(|r| Query::from_text(r.id, &r.text, stopwords))
        .collect())
}

pub fn search_all(queries: &[Query], index: &CorpusIndex, params: Bm25Params, depth: usize) -> Vec<RunList> {
    use rayon::prelude::*;
    queries.par_iter().map(|q| bm25_search(q, index, params, depth)).collect()
}

pub struct Experiment {
    pub config: ExperimentConfig,
    pub index: CorpusIndex,
    pub table: EmbeddingTable,
    pub initial_runs: Vec<RunList>,
    pub qrels: Option<Qrels>,
}

impl Experiment {
    pub fn load(config: ExperimentConfig, need_qrels: bool) -> Result<Self> {
        let stopwords = load_stopwords(config.stopwords.as_deref())?;
        let index = match (&config.index, &config.corpus) {
            (Some(p), _) => CorpusIndex::load(p)?,
            (None, Some(c)) => index_from_corpus(c, &stopwords)?,
            (None, None) => bail!("the config names neither an index nor a corpus"),
        };
        let Some(emb_path) = &config.embeddings else {
            bail!("the config names no embeddings file");
        };
        let table = EmbeddingTable::load(emb_path, config.oov)?;
        let t = &config.train;
        let mut initial_runs: Vec<RunList> = match (&config.run, &config.queries) {
            (Some(p), _) => read_runs(p)?.into_values().collect(),
            (None, Some(q)) => {
                let queries = load_queries(q, &stopwords)?;
                search_all(&queries, &index, t.bm25, t.depth.max(t.m))
            }
            (None, None) => bail!("the config names neither an initial run nor queries"),
        };
        let empty: Vec<String> = initial_runs
            .iter()
            .filter(|r| r.is_empty())
            .map(|r| r.query_id.clone())
            .collect();
        if !empty.is_empty() {
            log::warn!("skipping {} queries with empty initial rankings: {}", empty.len(), empty.join(" "));
            initial_runs.retain(|r| !r.is_empty());
        }
        initial_runs.sort_by(|a, b| a.query_id.cmp(&b.query_id));
        let qrels = match &config.qrels {
            Some(p) => Some(Qrels::load(p)?),
            None if need_qrels => bail!("the config names no qrels file"),
            None => None,
        };
        Ok(Experiment {
            config,
            index,
            table,
            initial_runs,
            qrels,
        })
    }

    pub fn qrels(&self) -> &Qrels {
        self.qrels.as_ref().expect("loaded with need_qrels")
    }

    pub fn prepare(&self, config: &nprf::training::TrainConfig) -> Result<Vec<PreparedQuery>> {
        let mut ctx = ScoringContext::new(&self.index, &self.table);
        ctx.target_cap = self.config.target_cap;
        Ok(prepare_queries(&ctx, &self.initial_runs, config)?)
    }
}
