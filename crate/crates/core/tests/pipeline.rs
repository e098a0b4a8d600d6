use std::collections::BTreeMap;

use asr_core::domain::{
    AdaptationOption, AdaptationSpace, Dimension, FeatureVector, QualityVector, UncertaintyVector,
};
use asr_core::features::{FeatureMask, Scaler, ScalerKind};
use asr_core::goals::{Goal, GoalSet};
use asr_core::learners::{
    select_model, CandidateScore, Family, Loss, ModelSpec, ModelTarget, Penalty,
};
use asr_core::mape::plan_best_option;
use asr_core::metrics::classification_metrics;
use asr_core::reducer::{AssignedModel, PlanMode, ReducerConfig, TrainingStrategy};
use asr_core::verifier::{GroundTruth, QualityModel, VerificationResult, Verifier};

const TRUTH: [i64; 6] = [0, 1, 0, 1, 1, 0];
const MODELS: [[i64; 6]; 3] = [[0, 1, 0, 1, 0, 1], [0, 1, 1, 1, 0, 0], [1, 1, 0, 1, 1, 0]];

fn score(c: usize) -> CandidateScore {
    let m = classification_metrics(&TRUTH, &MODELS[c]).unwrap();
    let metrics = BTreeMap::from([
        ("f1".to_string(), m.f1),
        ("mcc".to_string(), m.mcc),
        ("accuracy".to_string(), m.accuracy),
    ]);
    CandidateScore {
        candidate: c,
        target: 0,
        metrics,
        flags: Vec::new(),
    }
}

#[test]
fn response_time_toy_selects_third_model() {
    let scores: Vec<CandidateScore> = (0..3).map(score).collect();
    let acc: Vec<f64> = scores
        .iter()
        .map(|s| (s.metric("accuracy") * 1000.0).round() / 10.0)
        .collect();
    // The first model is right on four of six rows.
    assert_eq!(acc, vec![66.7, 66.7, 83.3]);
    let refs: Vec<&CandidateScore> = scores.iter().collect();
    assert_eq!(select_model(&refs, true).unwrap(), 2);
}

#[test]
fn planner_skips_cheap_option_that_fails_a_threshold() {
    let gs = GoalSet::new([
        Goal::below(0, 10.0),
        Goal::below(1, 10.0),
        Goal::minimize(2),
    ])
    .unwrap();
    let v = VerificationResult {
        ids: vec![0, 1, 2],
        qualities: vec![
            QualityVector(vec![8.0, 9.0, 20.0]),
            QualityVector(vec![9.0, 8.0, 18.0]),
            QualityVector(vec![12.0, 7.0, 5.0]),
        ],
        t_sim_ms: 0.0,
        t_real_ms: 0.0,
    };
    assert_eq!(plan_best_option(&v, &gs).unwrap(), 1);
}

struct Linear;

impl GroundTruth for Linear {
    fn n_qualities(&self) -> usize {
        2
    }

    fn qualities(&self, option: &AdaptationOption, _: &UncertaintyVector) -> QualityVector {
        let x = option.config[0];
        QualityVector(vec![x, 10.0 - x])
    }
}

fn reducer(gs: &GoalSet) -> ReducerConfig {
    let models = ModelTarget::from_goals(gs)
        .into_iter()
        .map(|t| {
            let spec = if t.is_classification() {
                ModelSpec::new(Family::SgdClassifier, Loss::Hinge, Penalty::None)
            } else {
                ModelSpec::new(
                    Family::PaRegressor,
                    Loss::SquaredEpsilonInsensitive,
                    Penalty::None,
                )
            };
            AssignedModel {
                model: t.new_model(spec, 1).unwrap(),
                target: t,
                scaler: Scaler::unfitted(ScalerKind::None, 1),
            }
        })
        .collect();
    ReducerConfig {
        exploration_rate: 0.1,
        warmup_cycles: 1,
        granularity: 3,
        training_strategy: TrainingStrategy::Random,
        training_budget: None,
        testing_budget: None,
        mask: FeatureMask::full(1),
        models,
        seed: 11,
    }
}

#[test]
fn unsatisfiable_thresholds_fall_back_to_the_optimization_ranking() {
    // No option meets q0 < -1, so the thresholds stage keeps nothing.
    let gs = GoalSet::new([Goal::below(0, -1.0), Goal::minimize(1)]).unwrap();
    let space =
        AdaptationSpace::enumerate(vec![Dimension::new("x", (0..20).map(f64::from).collect())])
            .unwrap();
    let raw: Vec<FeatureVector> = space
        .options()
        .iter()
        .map(|o| FeatureVector(o.config.clone()))
        .collect();
    let verifier = Verifier::new(vec![
        QualityModel {
            quality: 0,
            noise_std: 0.0,
            cost_ms: 1.0,
        },
        QualityModel {
            quality: 1,
            noise_std: 0.0,
            cost_ms: 1.0,
        },
    ])
    .unwrap();
    let mut r = reducer(&gs);
    // One satisfying sample first so the classifier has seen both classes,
    // then enough violating ones that it predicts a violation everywhere.
    r.ingest_verification(&raw[..1], &[QualityVector(vec![-5.0, 15.0])], 99)
        .unwrap();
    let all: Vec<usize> = (0..raw.len()).collect();
    let u = UncertaintyVector::new();
    for round in 0..30 {
        let v = verifier
            .verify(&space, &all, &u, &Linear, &gs, round)
            .unwrap();
        r.ingest_verification(&raw, &v.qualities, round).unwrap();
    }
    let p = r.reduce(&gs, &raw, 1).unwrap();
    assert_eq!(p.mode, PlanMode::Testing);
    assert_eq!(p.flags, vec!["fallback-optimization".to_string()]);
    assert_eq!(p.filtered.len(), 3);
    // Smallest predicted 10 - x means the largest x.
    assert!(p.filtered.iter().all(|&i| i >= 15), "{:?}", p.filtered);
}
