//! Design stage: data collection, feature selection, model evaluation
//! over an exploration-rate by warm-up grid, and model selection.

use std::collections::BTreeSet;

use asr_core::features::{mask_from_importance, FeatureMask, LabeledDataset, Scaler, ScalerKind};
use asr_core::importance::{compute_feature_importance, TreeParams};
use asr_core::learners::{
    evaluate_models, select_model, Candidate, EvalSettings, EvaluationReport, Family, Loss,
    ModelSpec, Penalty,
};
use asr_core::reducer::{AssignedModel, ReducerConfig};
use asr_core::seed::{derive, derived_rng};
use asr_core::{Error, Result};
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::scenario::{build_system, Scenario};

/// Every option of every cycle, verified with the scenario's verifier on
/// a trajectory separate from the one used by `run`.
pub fn collect(sc: &Scenario, cycles: usize) -> Result<LabeledDataset> {
    let mut sys = build_system(&sc.cfg.system, derive(sc.cfg.seed, "collect", 0))?;
    let mut ds = LabeledDataset::new(sys.feature_names(), sys.quality_names());
    let all: Vec<usize> = (0..sys.space().len()).collect();
    for c in 0..cycles {
        let u = sys.uncertainties();
        let feats = sys.features(&u);
        let v = sc.verifier.verify(
            sys.space(),
            &all,
            &u,
            &*sys,
            &sc.goals,
            derive(sc.cfg.seed, "collect-verify", c as u64),
        )?;
        for (i, q) in v.ids.iter().zip(v.qualities) {
            ds.push(c, *i, feats[*i].clone(), q)?;
        }
        sys.advance();
    }
    Ok(ds)
}

pub fn default_catalog() -> Vec<Candidate> {
    let scalers = [
        ScalerKind::None,
        ScalerKind::MinMax,
        ScalerKind::MaxAbs,
        ScalerKind::Standard,
    ];
    let penalties = [Penalty::L1, Penalty::L2, Penalty::Elasticnet];
    let mut specs = vec![ModelSpec::new(
        Family::Perceptron,
        Loss::Hinge,
        Penalty::None,
    )];
    for loss in [Loss::Hinge, Loss::Log] {
        specs.extend(penalties.map(|p| ModelSpec::new(Family::SgdClassifier, loss, p)));
    }
    specs.push(ModelSpec::new(
        Family::PaClassifier,
        Loss::Hinge,
        Penalty::None,
    ));
    for loss in [Loss::Squared, Loss::EpsilonInsensitive] {
        specs.extend(penalties.map(|p| ModelSpec::new(Family::SgdRegressor, loss, p)));
    }
    for loss in [Loss::EpsilonInsensitive, Loss::SquaredEpsilonInsensitive] {
        specs.push(ModelSpec::new(Family::PaRegressor, loss, Penalty::None));
    }
    specs
        .into_iter()
        .flat_map(|spec| scalers.map(|scaler| Candidate { spec, scaler }))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRow {
    pub quality: String,
    pub feature: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub exploration_rate: f64,
    pub warmup_cycles: usize,
    /// Sum over goal targets of the best primary metric.
    pub score: f64,
}

pub struct DesignOutcome {
    pub reducer: ReducerConfig,
    pub importance: Vec<ImportanceRow>,
    pub grid: Vec<GridRow>,
    /// Evaluation of the chosen grid point.
    pub report: EvaluationReport,
    pub chosen: Vec<String>,
}

fn grid_score(report: &EvaluationReport, n_targets: usize) -> Result<f64> {
    let mut total = 0.0;
    for t in 0..n_targets {
        let scores = report.for_target(t);
        let classification = scores.first().is_some_and(|s| s.metrics.contains_key("f1"));
        let best = select_model(&scores, classification)?;
        let s = scores
            .iter()
            .find(|s| s.candidate == best)
            .expect("selected from these");
        let v = s.metric(if classification { "f1" } else { "r2" });
        total += if v.is_finite() { v } else { 0.0 };
    }
    Ok(total)
}

/// Runs the design pipeline on a collected dataset.
pub fn design(sc: &Scenario, ds: &LabeledDataset, catalog: &[Candidate]) -> Result<DesignOutcome> {
    if catalog.is_empty() {
        return Err(Error::Config("empty candidate catalog".into()));
    }
    if ds.feature_names != sc.feature_names {
        return Err(Error::Contract(
            "dataset features do not match the scenario's system".into(),
        ));
    }
    let d = &sc.cfg.design;
    if d.exploration_rates.is_empty() || d.warmup_cycles.is_empty() {
        return Err(Error::Config("design grid is empty".into()));
    }
    let seed = derive(sc.cfg.seed, "design", 0);

    let imp_ds = match d.importance_rows {
        Some(k) if k < ds.len() => {
            let mut rows =
                index::sample(&mut derived_rng(seed, "importance-rows", 0), ds.len(), k).into_vec();
            rows.sort_unstable();
            ds.subset(&rows)
        }
        _ => ds.clone(),
    };
    let qualities: BTreeSet<usize> = sc.goals.goals().map(|g| g.quality).collect();
    let params = TreeParams {
        n_trees: d.trees,
        seed,
        ..TreeParams::default()
    };
    let mut scores = Vec::new();
    let mut importance = Vec::new();
    for &q in &qualities {
        let imp = compute_feature_importance(&imp_ds, q, &params)?;
        if let Some(w) = &imp.warning {
            log::warn!("importance for {}: {w}", ds.quality_names[q]);
        }
        for (f, s) in ds.feature_names.iter().zip(&imp.scores) {
            importance.push(ImportanceRow {
                quality: ds.quality_names[q].clone(),
                feature: f.clone(),
                score: *s,
            });
        }
        scores.push(imp.scores);
    }
    let n = ds.feature_names.len();
    let mut mask = mask_from_importance(&scores, 1.0 / (2.0 * n as f64), n)?;
    if mask.is_empty() {
        mask = FeatureMask::full(n);
    }
    let masked = ds.masked(&mask)?;

    let n_targets = asr_core::learners::ModelTarget::from_goals(&sc.goals).len();
    let mut grid = Vec::new();
    let mut reports = Vec::new();
    for &e in &d.exploration_rates {
        for &w in &d.warmup_cycles {
            let settings = EvalSettings {
                warmup_cycles: Some(w),
                exploration: e,
                seed,
                ..EvalSettings::default()
            };
            let report = evaluate_models(catalog, &masked, &sc.goals, &settings)?;
            grid.push(GridRow {
                exploration_rate: e,
                warmup_cycles: w,
                score: grid_score(&report, n_targets)?,
            });
            reports.push(report);
        }
    }
    let best = grid
        .iter()
        .map(|g| g.score)
        .fold(f64::NEG_INFINITY, f64::max);
    let pick = (0..grid.len())
        .filter(|&i| grid[i].score >= best - d.tolerance)
        .min_by(|&a, &b| {
            grid[a]
                .exploration_rate
                .total_cmp(&grid[b].exploration_rate)
                .then(grid[a].warmup_cycles.cmp(&grid[b].warmup_cycles))
        })
        .expect("grid is non-empty");
    let report = reports.swap_remove(pick);
    let chosen_point = grid[pick].clone();

    let targets = asr_core::learners::ModelTarget::from_goals(&sc.goals);
    let mut models = Vec::new();
    let mut chosen = Vec::new();
    for (t, target) in targets.iter().enumerate() {
        let c = select_model(&report.for_target(t), target.is_classification())?;
        let cand = catalog[c];
        chosen.push(format!(
            "{} -> {}",
            target.label(&ds.quality_names),
            cand.name()
        ));
        let scaler = match cand.scaler {
            ScalerKind::None => Scaler::unfitted(ScalerKind::None, mask.len()),
            k => Scaler::fit(k, &masked.features)?,
        };
        models.push(AssignedModel {
            target: target.clone(),
            scaler,
            model: target.new_model(cand.spec, mask.len())?,
        });
    }
    let r = &sc.cfg.reducer;
    let reducer = ReducerConfig {
        exploration_rate: chosen_point.exploration_rate,
        warmup_cycles: chosen_point.warmup_cycles,
        granularity: r.granularity,
        training_strategy: r.training_strategy,
        training_budget: r.training_budget,
        testing_budget: r.testing_budget,
        mask,
        models,
        seed: derive(sc.cfg.seed, "reducer", 0),
    };
    reducer.validate(&sc.goals, n)?;
    Ok(DesignOutcome {
        reducer,
        importance,
        grid,
        report,
        chosen,
    })
}
