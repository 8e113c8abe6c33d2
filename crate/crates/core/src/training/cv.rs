use rayon::prelude::*;

use super::folds::{make_folds, FoldPlan};
use super::trainer::{candidate_run, rerank_all, train, TrainConfig, TrainOutcome};
use crate::error::Result;
use crate::evaluation::{evaluate, MetricReport, Qrels};
use crate::feedback::{PreparedQuery, ScoringContext};
use crate::first_stage::RunList;
use crate::nirm::ScorerParams;

/// Builds feedback sets and scorer inputs for every initial run.
pub fn prepare_queries(
    ctx: &ScoringContext<'_>,
    initial_runs: &[RunList],
    config: &TrainConfig,
) -> Result<Vec<PreparedQuery>> {
    let structure = ScorerParams::zeros(config.scorer);
    initial_runs
        .iter()
        .map(|run| PreparedQuery::build(ctx, run, &structure, config.m, config.k, config.depth))
        .collect()
}

#[derive(Debug, Clone)]
pub struct FoldOutcome {
    pub fold: usize,
    pub test_queries: Vec<String>,
    pub training: TrainOutcome,
}

#[derive(Debug, Clone)]
pub struct CvOutcome {
    pub plan: FoldPlan,
    pub folds: Vec<FoldOutcome>,
    /// Re-ranked test runs of all folds, ordered by query id.
    pub test_runs: Vec<RunList>,
    pub report: MetricReport,
    /// The first-stage ranking over the same candidate pools.
    pub baseline_runs: Vec<RunList>,
    pub baseline_report: MetricReport,
}

/// Five-fold cross-validation: each fold trains on three partitions, selects
/// on the fourth and re-ranks the fifth. Metrics are computed over the union
/// of the test runs. Folds run in parallel; results do not depend on it.
pub fn cross_validate(queries: &[PreparedQuery], qrels: &Qrels, config: &TrainConfig) -> Result<CvOutcome> {
    config.validate()?;
    let mut sorted: Vec<&PreparedQuery> = queries.iter().collect();
    sorted.sort_by(|a, b| a.query_id.cmp(&b.query_id));
    let ids: Vec<String> = sorted.iter().map(|q| q.query_id.clone()).collect();
    let plan = make_folds(&ids, config.seed)?;

    let pick = |wanted: &[String]| -> Vec<&PreparedQuery> {
        wanted
            .iter()
            .map(|id| {
                let pos = ids.binary_search(id).expect("fold ids come from the query list");
                sorted[pos]
            })
            .collect()
    };

    let results: Vec<Result<(FoldOutcome, Vec<RunList>)>> = plan
        .folds
        .par_iter()
        .enumerate()
        .map(|(i, fold)| {
            let training = train(&pick(&fold.train), &pick(&fold.validation), qrels, config)?;
            let runs = rerank_all(&pick(&fold.test), &training.params, config.include_query_score)?;
            log::info!(
                "fold {}: best epoch {}, validation MAP {:.4}",
                i + 1,
                training.best_epoch,
                training.validation_maps[training.best_epoch - 1]
            );
            Ok((
                FoldOutcome {
                    fold: i + 1,
                    test_queries: fold.test.clone(),
                    training,
                },
                runs,
            ))
        })
        .collect();

    let mut folds = Vec::with_capacity(results.len());
    let mut test_runs = Vec::new();
    for r in results {
        let (outcome, runs) = r?;
        folds.push(outcome);
        test_runs.extend(runs);
    }
    test_runs.sort_by(|a, b| a.query_id.cmp(&b.query_id));
    let baseline_runs: Vec<RunList> = sorted.iter().map(|q| candidate_run(q)).collect();
    Ok(CvOutcome {
        report: evaluate(&test_runs, qrels),
        baseline_report: evaluate(&baseline_runs, qrels),
        plan,
        folds,
        test_runs,
        baseline_runs,
    })
}
