use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::evaluation::Qrels;
use crate::first_stage::RunList;

/// One (relevant, non-relevant) target pair for a query.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TrainingInstance {
    pub query_id: String,
    pub d_plus: String,
    pub d_minus: String,
}

/// Judged-relevant and judged-non-relevant documents of a candidate pool.
pub fn candidate_pools<'a>(qrels: &Qrels, run: &'a RunList) -> (Vec<&'a str>, Vec<&'a str>) {
    let mut relevant = Vec::new();
    let mut non_relevant = Vec::new();
    for doc in run.doc_ids() {
        if !qrels.is_judged(&run.query_id, doc) {
            continue;
        }
        if qrels.grade(&run.query_id, doc) > 0 {
            relevant.push(doc);
        } else {
            non_relevant.push(doc);
        }
    }
    (relevant, non_relevant)
}

/// Draws `per_query` pairs per query, with replacement, uniformly from the
/// judged-relevant and judged-non-relevant documents of each run. Queries
/// lacking either kind are skipped and the skip count is returned.
pub fn sample_instances(
    qrels: &Qrels,
    runs: &[&RunList],
    per_query: usize,
    seed: u64,
) -> Result<(Vec<TrainingInstance>, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(runs.len() * per_query);
    let mut skipped = 0;
    for run in runs {
        let (relevant, non_relevant) = candidate_pools(qrels, run);
        if relevant.is_empty() || non_relevant.is_empty() {
            skipped += 1;
            continue;
        }
        for _ in 0..per_query {
            samples.push(TrainingInstance {
                query_id: run.query_id.clone(),
                d_plus: relevant.choose(&mut rng).expect("non-empty").to_string(),
                d_minus: non_relevant.choose(&mut rng).expect("non-empty").to_string(),
            });
        }
    }
    if skipped > 0 {
        log::info!("{skipped} queries skipped: no relevant/non-relevant pair in the candidate pool");
    }
    if samples.is_empty() {
        return Err(Error::NoEligibleQuery);
    }
    Ok((samples, skipped))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(qid: &str, docs: &[&str]) -> RunList {
        RunList::from_ordered(qid, docs.iter().map(|d| (d.to_string(), 1.0)).collect())
    }

    #[test]
    fn unique_pair_repeats() {
        let mut q = Qrels::new();
        q.insert("q", "a", 1);
        q.insert("q", "b", 0);
        let r = run("q", &["a", "b", "c"]);
        let (samples, skipped) = sample_instances(&q, &[&r], 4, 1).unwrap();
        assert_eq!(skipped, 0);
        assert_eq!(samples.len(), 4);
        assert!(samples.iter().all(|s| s.d_plus == "a" && s.d_minus == "b"));
    }

    #[test]
    fn same_seed_same_samples() {
        let mut q = Qrels::new();
        for (d, g) in [("a", 1), ("b", 2), ("c", 0), ("d", 0), ("e", 0)] {
            q.insert("q", d, g);
        }
        let r = run("q", &["a", "b", "c", "d", "e"]);
        let first = sample_instances(&q, &[&r], 16, 9).unwrap();
        let second = sample_instances(&q, &[&r], 16, 9).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn ineligible_queries_are_skipped() {
        let mut q = Qrels::new();
        q.insert("q1", "a", 1);
        q.insert("q2", "a", 1);
        q.insert("q2", "b", 0);
        let r1 = run("q1", &["a", "x"]);
        let r2 = run("q2", &["a", "b"]);
        let (samples, skipped) = sample_instances(&q, &[&r1, &r2], 2, 0).unwrap();
        assert_eq!(skipped, 1);
        assert!(samples.iter().all(|s| s.query_id == "q2"));
        assert!(matches!(sample_instances(&q, &[&r1], 2, 0), Err(Error::NoEligibleQuery)));
    }
}
