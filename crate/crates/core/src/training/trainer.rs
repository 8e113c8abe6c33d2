use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::adam::{adam_step, AdamState};
use super::loss::{hinge_grad, hinge_loss};
use super::sampling::{sample_instances, TrainingInstance};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate, Qrels};
use crate::feedback::{CombineVariant, NprfParams, PreparedQuery};
use crate::first_stage::{Bm25Params, RunList};
use crate::nirm::{Parameters, ScorerKind};

/// Hyperparameters for one training run and the surrounding pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub scorer: ScorerKind,
    pub variant: CombineVariant,
    pub m: usize,
    pub k: usize,
    pub depth: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub per_query: usize,
    pub seed: u64,
    pub bm25: Bm25Params,
    /// Add the normalized first-stage score to rel_D when ranking.
    pub include_query_score: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            scorer: ScorerKind::Drmm,
            variant: CombineVariant::Ds,
            m: 10,
            k: 20,
            depth: 1000,
            lr: 0.001,
            batch_size: 20,
            epochs: 30,
            per_query: 16,
            seed: 42,
            bm25: Bm25Params::default(),
            include_query_score: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("m", self.m),
            ("k", self.k),
            ("depth", self.depth),
            ("batch_size", self.batch_size),
            ("epochs", self.epochs),
            ("per_query", self.per_query),
        ];
        for (name, value) in positive {
            if value < 1 {
                return Err(Error::Parameter(format!("{name} must be at least 1")));
            }
        }
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::Parameter(format!("lr must be finite and non-negative, got {}", self.lr)));
        }
        Ok(())
    }
}

/// Mixes a master seed with a purpose label and an index (splitmix64
/// finalizer), so each random stream is independent but reproducible.
pub fn derive_seed(master: u64, label: &str, index: u64) -> u64 {
    let mut x = master;
    for b in label.bytes().chain(index.to_le_bytes()) {
        x = x.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(u64::from(b));
        x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        x ^= x >> 31;
    }
    x
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters of the epoch with the best validation MAP.
    pub params: NprfParams,
    /// 1-based.
    pub best_epoch: usize,
    pub epoch_losses: Vec<f64>,
    pub validation_maps: Vec<f64>,
    /// Validation MAP of the freshly initialized model.
    pub initial_validation_map: f64,
    /// Every query whose data influenced the returned parameters.
    pub consumed_queries: BTreeSet<String>,
    pub skipped_queries: usize,
}

/// The candidate pool of a prepared query as a run list, in initial order.
pub fn candidate_run(query: &PreparedQuery) -> RunList {
    RunList::from_ordered(
        query.query_id.clone(),
        query
            .candidates
            .iter()
            .map(|c| (c.doc_id.clone(), c.rel_q_score))
            .collect(),
    )
}

/// Re-ranks every query; runs come back in input order.
pub fn rerank_all(queries: &[&PreparedQuery], params: &NprfParams, include_query_score: bool) -> Result<Vec<RunList>> {
    queries
        .par_iter()
        .map(|q| q.rerank(params, include_query_score))
        .collect()
}

fn validation_map(
    queries: &[&PreparedQuery],
    params: &NprfParams,
    qrels: &Qrels,
    include_query_score: bool,
) -> Result<f64> {
    let runs = rerank_all(queries, params, include_query_score)?;
    Ok(evaluate(&runs, qrels).map)
}

fn instance_gradient(
    params: &NprfParams,
    query: &PreparedQuery,
    inst: &TrainingInstance,
) -> Result<(f64, NprfParams)> {
    let lookup = |doc: &str| {
        query
            .candidate(doc)
            .ok_or_else(|| Error::UnknownDocument(doc.to_string()))
    };
    let plus = lookup(&inst.d_plus)?;
    let minus = lookup(&inst.d_minus)?;
    let fwd_plus = params.forward(&plus.inputs, &query.gates)?;
    let fwd_minus = params.forward(&minus.inputs, &query.gates)?;
    let loss = hinge_loss(fwd_plus.score, fwd_minus.score);
    let (d_plus, d_minus) = hinge_grad(fwd_plus.score, fwd_minus.score);
    let mut grad = params.zeros_like();
    if d_plus != 0.0 {
        params.backward_into(&plus.inputs, &fwd_plus, d_plus, &mut grad)?;
        params.backward_into(&minus.inputs, &fwd_minus, d_minus, &mut grad)?;
    }
    Ok((loss, grad))
}

fn sorted_by_id<'a>(queries: &[&'a PreparedQuery]) -> Vec<&'a PreparedQuery> {
    let mut v = queries.to_vec();
    v.sort_by(|a, b| a.query_id.cmp(&b.query_id));
    v
}

/// Trains NPRF parameters on `train` queries with mini-batch Adam on the
/// pairwise hinge loss, and keeps the epoch whose re-ranking of
/// `validation` scores the best MAP (ties go to the earlier epoch). The
/// order in which queries are passed does not matter.
pub fn train(
    train: &[&PreparedQuery],
    validation: &[&PreparedQuery],
    qrels: &Qrels,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    let (train, validation) = (&sorted_by_id(train)[..], &sorted_by_id(validation)[..]);
    let by_id: HashMap<&str, &PreparedQuery> = train.iter().map(|q| (q.query_id.as_str(), *q)).collect();
    let pools: Vec<RunList> = train.iter().map(|q| candidate_run(q)).collect();
    let pool_refs: Vec<&RunList> = pools.iter().collect();
    let (instances, skipped_queries) =
        sample_instances(qrels, &pool_refs, config.per_query, derive_seed(config.seed, "sample", 0))?;

    let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "init", 0));
    let mut params = NprfParams::uniform(config.scorer, config.variant, config.m, &mut init_rng)?;
    let mut adam = AdamState::for_params(&params, config.lr);
    let initial_validation_map = validation_map(validation, &params, qrels, config.include_query_score)?;

    let mut best: Option<(f64, usize, NprfParams)> = None;
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut validation_maps = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..instances.len()).collect();

    for epoch in 1..=config.epochs {
        order.sort_unstable();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "epoch", epoch as u64)));
        let mut epoch_loss = 0.0;
        for (batch_no, batch) in order.chunks(config.batch_size).enumerate() {
            let results: Vec<Result<(f64, NprfParams)>> = batch
                .par_iter()
                .map(|&i| {
                    let inst = &instances[i];
                    instance_gradient(&params, by_id[inst.query_id.as_str()], inst)
                })
                .collect();
            let mut batch_loss = 0.0;
            let mut grad = params.zeros_like();
            for r in results {
                let (loss, g) = r?;
                batch_loss += loss;
                grad.add_scaled(&g, 1.0);
            }
            if !batch_loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    batch: batch_no + 1,
                    loss: batch_loss,
                });
            }
            epoch_loss += batch_loss;
            grad.scale(1.0 / batch.len() as f64);
            adam_step(&mut params, &grad, &mut adam)?;
        }
        let mean_loss = epoch_loss / instances.len() as f64;
        let map = validation_map(validation, &params, qrels, config.include_query_score)?;
        log::debug!("epoch {epoch}: loss {mean_loss:.6}, validation MAP {map:.4}");
        epoch_losses.push(mean_loss);
        validation_maps.push(map);
        if best.as_ref().is_none_or(|(b, _, _)| map > *b) {
            best = Some((map, epoch, params.clone()));
        }
    }

    let (_, best_epoch, params) = best.expect("at least one epoch");
    let consumed_queries = train
        .iter()
        .chain(validation)
        .map(|q| q.query_id.clone())
        .collect();
    Ok(TrainOutcome {
        params,
        best_epoch,
        epoch_losses,
        validation_maps,
        initial_validation_map,
        consumed_queries,
        skipped_queries,
    })
}
