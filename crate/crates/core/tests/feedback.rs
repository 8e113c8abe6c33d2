mod common;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

use common::{random_matrix, rng};
use nprf::corpus::{build_index, Document};
use nprf::embeddings::{EmbeddingTable, OovPolicy};
use nprf::feedback::{build_feedback_set, normalize_gates, nprf_score, CombineVariant, NprfParams, ScoringContext};
use nprf::first_stage::RunList;
use nprf::nirm::{PreparedInput, ScorerKind};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn gates_lie_in_half_to_one(scores in prop::collection::vec(-50.0f64..50.0, 1..12)) {
        let gates = normalize_gates(&scores);
        prop_assert_eq!(gates.len(), scores.len());
        prop_assert!(gates.iter().all(|g| (0.5..=1.0).contains(g)));
        let top = scores.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        prop_assert_eq!(gates[top], 1.0);
        let raw = 3.7;
        prop_assert_eq!(raw * gates[top], raw);
    }

    #[test]
    fn constant_scores_give_unit_gates(v in -10.0f64..10.0, n in 1usize..10) {
        prop_assert_eq!(normalize_gates(&vec![v; n]), vec![1.0; n]);
    }

    #[test]
    fn gates_preserve_order(scores in prop::collection::vec(0.0f64..30.0, 2..10)) {
        let gates = normalize_gates(&scores);
        for i in 0..scores.len() {
            for j in 0..scores.len() {
                if scores[i] < scores[j] {
                    prop_assert!(gates[i] <= gates[j]);
                }
            }
        }
    }
}

fn random_case<R: Rng>(r: &mut R, variant: CombineVariant, kind: ScorerKind) -> (NprfParams, Vec<PreparedInput>, Vec<f64>) {
    let m = r.random_range(2..=6);
    let params = NprfParams::uniform(kind, variant, m, r).unwrap();
    let inputs: Vec<PreparedInput> = (0..m)
        .map(|_| {
            let rows = r.random_range(1..=8);
            let cols = r.random_range(1..=12);
            let matrix = random_matrix(r, rows, cols);
            let idf: Vec<f64> = (0..rows).map(|_| r.random_range(0.5..5.0)).collect();
            params.scorer.prepare(&matrix, &idf).unwrap()
        })
        .collect();
    let rel_q: Vec<f64> = (0..m).map(|_| r.random_range(0.0..15.0)).collect();
    (params, inputs, normalize_gates(&rel_q))
}

#[test]
fn ds_is_invariant_to_joint_permutation() {
    let mut r = rng(31);
    for case in 0..100 {
        let kind = if case % 2 == 0 { ScorerKind::Drmm } else { ScorerKind::Knrm };
        let (params, inputs, gates) = random_case(&mut r, CombineVariant::Ds, kind);
        let base = params.forward(&inputs, &gates).unwrap().score;
        let mut order: Vec<usize> = (0..inputs.len()).collect();
        order.shuffle(&mut r);
        let p_inputs: Vec<PreparedInput> = order.iter().map(|&i| inputs[i].clone()).collect();
        let p_gates: Vec<f64> = order.iter().map(|&i| gates[i]).collect();
        let permuted = params.forward(&p_inputs, &p_gates).unwrap().score;
        assert!((base - permuted).abs() <= 1e-12, "case {case}: {base} vs {permuted}");
    }
}

#[test]
fn ff_depends_on_feedback_order() {
    let mut r = rng(32);
    for case in 0..50 {
        let (params, inputs, gates) = random_case(&mut r, CombineVariant::Ff, ScorerKind::Knrm);
        let base = params.forward(&inputs, &gates).unwrap().score;
        let n = inputs.len();
        let changed = (1..n).any(|shift| {
            let order: Vec<usize> = (0..n).map(|i| (i + shift) % n).collect();
            let p_inputs: Vec<PreparedInput> = order.iter().map(|&i| inputs[i].clone()).collect();
            let p_gates: Vec<f64> = order.iter().map(|&i| gates[i]).collect();
            params.forward(&p_inputs, &p_gates).unwrap().score != base
        });
        assert!(changed, "case {case}: no permutation changed the ff score");
    }
}

#[test]
fn ff_prime_is_ff_with_unit_gates() {
    let mut r = rng(33);
    for _ in 0..50 {
        let (ff, inputs, gates) = random_case(&mut r, CombineVariant::Ff, ScorerKind::Drmm);
        let mut prime = ff.clone();
        prime.variant = CombineVariant::FfPrime;
        let ones = vec![1.0; gates.len()];
        assert_eq!(
            prime.forward(&inputs, &gates).unwrap().score,
            ff.forward(&inputs, &ones).unwrap().score
        );
    }
}

#[test]
fn end_to_end_score_on_a_toy_corpus() {
    let docs = [
        ("a", "apple banana apple cherry"),
        ("b", "banana date egg"),
        ("c", "cherry fig grape apple"),
        ("d", "grape egg fig"),
    ];
    let index = build_index(docs.iter().map(|(id, text)| {
        Document::new(*id, text.split_whitespace().map(str::to_string).collect())
    }))
    .unwrap();
    let vocab: Vec<String> = index.vocabulary().to_vec();
    let table = EmbeddingTable::random(vocab.iter().map(String::as_str), 8, 5).unwrap();
    assert_eq!(table.oov_policy(), OovPolicy::SkipTerm);
    let run = RunList::from_ordered("q", vec![("a".into(), 3.0), ("c".into(), 2.0), ("b".into(), 1.0)]);
    let fb = build_feedback_set(&run, &index, 2, 3).unwrap();
    assert_eq!(fb.len(), 2);
    assert_eq!(fb.gates(), vec![1.0, 0.5]);
    let ctx = ScoringContext::new(&index, &table);
    let params = NprfParams::uniform(ScorerKind::Knrm, CombineVariant::Ds, 2, &mut rng(1)).unwrap();
    let s1 = nprf_score(&fb, "d", &params, &ctx).unwrap();
    let s2 = nprf_score(&fb, "d", &params, &ctx).unwrap();
    assert!(s1.is_finite());
    assert_eq!(s1, s2);
    assert!(nprf_score(&fb, "nope", &params, &ctx).is_err());
}
