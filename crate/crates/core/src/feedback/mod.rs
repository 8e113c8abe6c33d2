//! The NPRF framework: feedback-set construction, first-stage score gating,
//! combination of per-feedback-document scores, and re-ranking.

mod gates;
mod model;

use std::sync::Arc;

use rayon::prelude::*;

use crate::corpus::{CorpusIndex, DocIdx, TermWeight};
use crate::embeddings::{interaction_matrix, EmbeddingTable};
use crate::error::{Error, Result};
use crate::first_stage::RunList;
use crate::nirm::{PreparedInput, ScorerParams};

pub use gates::{normalize_gates, GatedScores};
pub use model::{CombineVariant, Combiner, NprfForward, NprfParams, COMBINE_HIDDEN};

#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackDoc {
    pub doc_id: String,
    pub rel_q_score: f64,
    pub summary: Vec<TermWeight>,
}

/// The top-m documents of an initial ranking, each reduced to its top-k
/// tf-idf terms, in rank order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackSet {
    pub query_id: String,
    pub members: Vec<FeedbackDoc>,
}

impl FeedbackSet {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn rel_q_scores(&self) -> Vec<f64> {
        self.members.iter().map(|d| d.rel_q_score).collect()
    }

    pub fn gates(&self) -> Vec<f64> {
        normalize_gates(&self.rel_q_scores())
    }
}

pub fn build_feedback_set(initial_run: &RunList, index: &CorpusIndex, m: usize, k: usize) -> Result<FeedbackSet> {
    if m < 1 || k < 1 {
        return Err(Error::Parameter("m and k must both be at least 1".into()));
    }
    if initial_run.is_empty() {
        return Err(Error::EmptyRun(initial_run.query_id.clone()));
    }
    let members = initial_run
        .entries
        .iter()
        .take(m)
        .map(|e| {
            let doc = index.require_doc(&e.doc_id)?;
            Ok(FeedbackDoc {
                doc_id: e.doc_id.clone(),
                rel_q_score: e.score,
                summary: index.tfidf_summary(doc, k)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FeedbackSet {
        query_id: initial_run.query_id.clone(),
        members,
    })
}

/// Shared read-only state for scoring targets.
#[derive(Debug, Clone, Copy)]
pub struct ScoringContext<'a> {
    pub index: &'a CorpusIndex,
    pub table: &'a EmbeddingTable,
    /// Keep only the first `n` terms of each target document.
    pub target_cap: Option<usize>,
}

impl<'a> ScoringContext<'a> {
    pub fn new(index: &'a CorpusIndex, table: &'a EmbeddingTable) -> Self {
        ScoringContext {
            index,
            table,
            target_cap: None,
        }
    }

    /// Scorer inputs for one target, one per feedback document.
    pub fn prepare_target(
        &self,
        feedback: &FeedbackSet,
        scorer: &ScorerParams,
        target: DocIdx,
    ) -> Result<Vec<PreparedInput>> {
        let mut terms = self.index.doc_terms(target);
        if let Some(cap) = self.target_cap {
            terms.truncate(cap);
        }
        feedback
            .members
            .iter()
            .map(|member| {
                let matrix = interaction_matrix(&member.summary, &terms, self.table)?;
                let idf: Vec<f64> = member
                    .summary
                    .iter()
                    .map(|tw| self.index.idf_of(&tw.term))
                    .collect();
                scorer.prepare(&matrix, &idf)
            })
            .collect()
    }
}

/// rel_D(q, D_q, d) for one target document.
pub fn nprf_score(
    feedback: &FeedbackSet,
    target_doc_id: &str,
    params: &NprfParams,
    ctx: &ScoringContext<'_>,
) -> Result<f64> {
    let target = ctx.index.require_doc(target_doc_id)?;
    let inputs = ctx.prepare_target(feedback, &params.scorer, target)?;
    Ok(params.forward(&inputs, &feedback.gates())?.score)
}

#[derive(Debug, Clone)]
pub struct PreparedCandidate {
    pub doc_id: String,
    pub rank: usize,
    pub rel_q_score: f64,
    pub inputs: Vec<PreparedInput>,
}

/// A query's feedback set and the scorer inputs of every re-ranking
/// candidate. Inputs do not depend on trainable parameters, so one
/// preparation serves a whole training run.
#[derive(Debug, Clone)]
pub struct PreparedQuery {
    pub query_id: String,
    pub feedback: Arc<FeedbackSet>,
    pub gates: Vec<f64>,
    pub candidates: Vec<PreparedCandidate>,
}

impl PreparedQuery {
    pub fn build(
        ctx: &ScoringContext<'_>,
        initial_run: &RunList,
        scorer: &ScorerParams,
        m: usize,
        k: usize,
        depth: usize,
    ) -> Result<Self> {
        if depth < 1 {
            return Err(Error::Parameter("depth must be at least 1".into()));
        }
        let feedback = build_feedback_set(initial_run, ctx.index, m, k)?;
        let candidates = initial_run
            .entries
            .par_iter()
            .take(depth)
            .map(|e| {
                let doc = ctx.index.require_doc(&e.doc_id)?;
                let inputs = ctx
                    .prepare_target(&feedback, scorer, doc)
                    .map_err(|err| Error::Scoring {
                        doc_id: e.doc_id.clone(),
                        source: Box::new(err),
                    })?;
                Ok(PreparedCandidate {
                    doc_id: e.doc_id.clone(),
                    rank: e.rank,
                    rel_q_score: e.score,
                    inputs,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PreparedQuery {
            query_id: initial_run.query_id.clone(),
            gates: feedback.gates(),
            feedback: Arc::new(feedback),
            candidates,
        })
    }

    pub fn candidate(&self, doc_id: &str) -> Option<&PreparedCandidate> {
        self.candidates.iter().find(|c| c.doc_id == doc_id)
    }

    /// Scores every candidate and sorts by descending score, ties by the
    /// original rank. With `include_query_score`, the candidate's min-max
    /// normalized first-stage score is added to rel_D.
    pub fn rerank(&self, params: &NprfParams, include_query_score: bool) -> Result<RunList> {
        let query_norm = if include_query_score {
            let scores: Vec<f64> = self.candidates.iter().map(|c| c.rel_q_score).collect();
            // gates are 0.5 + 0.5 * norm, so recover norm in [0, 1]
            normalize_gates(&scores).into_iter().map(|g| 2.0 * g - 1.0).collect()
        } else {
            vec![0.0; self.candidates.len()]
        };
        let mut scored = self
            .candidates
            .iter()
            .zip(query_norm)
            .map(|(c, extra)| {
                let fwd = params.forward(&c.inputs, &self.gates).map_err(|err| Error::Scoring {
                    doc_id: c.doc_id.clone(),
                    source: Box::new(err),
                })?;
                Ok((c, fwd.score + extra))
            })
            .collect::<Result<Vec<_>>>()?;
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.rank.cmp(&b.0.rank)));
        Ok(RunList::from_ordered(
            self.query_id.clone(),
            scored.into_iter().map(|(c, s)| (c.doc_id.clone(), s)).collect(),
        ))
    }
}

/// Re-ranks the top `depth` documents of `initial_run` by NPRF score.
pub fn rerank(
    initial_run: &RunList,
    params: &NprfParams,
    m: usize,
    k: usize,
    depth: usize,
    ctx: &ScoringContext<'_>,
) -> Result<RunList> {
    PreparedQuery::build(ctx, initial_run, &params.scorer, m, k, depth)?.rerank(params, false)
}
