use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const NUM_FOLDS: usize = 5;

/// One cross-validation split: three partitions train, one validates, one
/// tests.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub partitions: Vec<Vec<String>>,
    pub folds: Vec<Fold>,
}

/// Shuffles query ids by `seed` and cuts them into five partitions, giving
/// the remainder to the earliest partitions. Fold `i` tests on partition `i`,
/// validates on partition `i + 1 (mod 5)` and trains on the rest.
pub fn make_folds(query_ids: &[String], seed: u64) -> Result<FoldPlan> {
    if query_ids.len() < NUM_FOLDS {
        return Err(Error::Parameter(format!(
            "cross-validation needs at least {NUM_FOLDS} queries, got {}",
            query_ids.len()
        )));
    }
    let mut ids = query_ids.to_vec();
    ids.sort();
    ids.dedup();
    if ids.len() != query_ids.len() {
        return Err(Error::Parameter("query ids must be unique".into()));
    }
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let base = ids.len() / NUM_FOLDS;
    let extra = ids.len() % NUM_FOLDS;
    let mut partitions = Vec::with_capacity(NUM_FOLDS);
    let mut start = 0;
    for p in 0..NUM_FOLDS {
        let size = base + usize::from(p < extra);
        partitions.push(ids[start..start + size].to_vec());
        start += size;
    }

    let folds = (0..NUM_FOLDS)
        .map(|i| {
            let validation_part = (i + 1) % NUM_FOLDS;
            let train = (0..NUM_FOLDS)
                .filter(|&p| p != i && p != validation_part)
                .flat_map(|p| partitions[p].iter().cloned())
                .collect();
            Fold {
                train,
                validation: partitions[validation_part].clone(),
                test: partitions[i].clone(),
            }
        })
        .collect();
    Ok(FoldPlan { partitions, folds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("q{i}")).collect()
    }

    #[test]
    fn ten_queries_two_per_fold() {
        let plan = make_folds(&ids(10), 1).unwrap();
        assert!(plan.partitions.iter().all(|p| p.len() == 2));
    }

    #[test]
    fn remainder_goes_first() {
        let plan = make_folds(&ids(11), 1).unwrap();
        let sizes: Vec<_> = plan.partitions.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![3, 2, 2, 2, 2]);
    }

    #[test]
    fn too_few_queries() {
        assert!(make_folds(&ids(4), 1).is_err());
    }

    #[test]
    fn folds_are_disjoint_and_exhaustive() {
        for seed in 0..20 {
            let all = ids(23);
            let plan = make_folds(&all, seed).unwrap();
            let universe: HashSet<&String> = all.iter().collect();
            let mut tested = HashSet::new();
            for fold in &plan.folds {
                let train: HashSet<_> = fold.train.iter().collect();
                let valid: HashSet<_> = fold.validation.iter().collect();
                let test: HashSet<_> = fold.test.iter().collect();
                assert!(train.is_disjoint(&valid) && train.is_disjoint(&test) && valid.is_disjoint(&test));
                let union: HashSet<_> = train.union(&valid).copied().chain(test.iter().copied()).collect();
                assert_eq!(union, universe);
                for q in &fold.test {
                    assert!(tested.insert(q.clone()), "{q} tested twice");
                }
            }
            assert_eq!(tested.len(), all.len());
        }
    }
}
