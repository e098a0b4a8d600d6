//! The machine learning module of the loop: prediction, goal-based
//! filtering, exploration, the warm-up state machine and online ingestion.

use rand::seq::{index, SliceRandom};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{FeatureVector, QualityVector};
use crate::features::{FeatureMask, Scaler};
use crate::goals::{Goal, GoalKind, GoalSet};
use crate::learners::{ModelTarget, OnlineModel, Output, Target};
use crate::seed::derived_rng;
use crate::{Error, Result};

/// `ceil(e * n)` that ignores rounding noise just above an integer.
pub fn exploration_size(e: f64, n: usize) -> usize {
    let x = e * n as f64;
    ((x - 1e-9).ceil().max(0.0) as usize).min(n)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainingStrategy {
    #[default]
    Random,
    RoundRobin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlanMode {
    Training,
    Testing,
}

/// Predicted goal values for one option.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Prediction {
    /// Predicted satisfaction per threshold goal, aligned with `GoalSet::thresholds`.
    pub thresholds: Vec<bool>,
    /// Predicted quality per setpoint goal, aligned with `GoalSet::setpoints`.
    pub setpoints: Vec<f64>,
    pub optimization: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReductionPlan {
    pub filtered: Vec<usize>,
    pub explored: Vec<usize>,
    pub mode: PlanMode,
    pub flags: Vec<String>,
}

impl ReductionPlan {
    /// Filtered options first, then explored ones.
    pub fn to_verify(&self) -> Vec<usize> {
        self.filtered
            .iter()
            .chain(&self.explored)
            .copied()
            .collect()
    }
}

/// A goal model with its own scaler in front of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignedModel {
    pub target: ModelTarget,
    pub scaler: Scaler,
    pub model: OnlineModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducerConfig {
    pub exploration_rate: f64,
    pub warmup_cycles: usize,
    pub granularity: usize,
    #[serde(default)]
    pub training_strategy: TrainingStrategy,
    /// Options verified per warm-up cycle; all of them when unset.
    #[serde(default)]
    pub training_budget: Option<usize>,
    /// Cap on options verified per testing cycle; explored options are cut first.
    #[serde(default)]
    pub testing_budget: Option<usize>,
    pub mask: FeatureMask,
    pub models: Vec<AssignedModel>,
    #[serde(default)]
    pub seed: u64,
}

impl ReducerConfig {
    pub fn validate(&self, goals: &GoalSet, raw_dim: usize) -> Result<()> {
        if self.granularity == 0 {
            return Err(Error::Config("granularity must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.exploration_rate) {
            return Err(Error::Config(format!(
                "exploration rate {} outside [0, 1]",
                self.exploration_rate
            )));
        }
        if self.training_budget == Some(0) {
            return Err(Error::Config("training budget must be positive".into()));
        }
        self.mask.check(raw_dim)?;
        let dim = self.mask.len();
        for m in &self.models {
            if m.model.dim() != dim || m.scaler.dim() != dim {
                return Err(Error::Config(format!(
                    "model or scaler dimension differs from the {dim} masked features"
                )));
            }
            if m.model.is_classifier() != m.target.is_classification() {
                return Err(Error::Config(
                    "classification targets need classifiers and value targets regressors".into(),
                ));
            }
        }
        for want in ModelTarget::from_goals(goals) {
            if !self.models.iter().any(|m| m.target == want) {
                return Err(Error::Config(format!("no model assigned for {want:?}")));
            }
        }
        Ok(())
    }

    fn model_for(&self, want: &ModelTarget) -> Option<&AssignedModel> {
        self.models.iter().find(|m| &m.target == want)
    }

    /// Predicts goal values for every option from its raw feature vector.
    pub fn predict(
        &self,
        goals: &GoalSet,
        raw: &[FeatureVector],
    ) -> Result<(Vec<Prediction>, bool)> {
        let targets = ModelTarget::from_goals(goals);
        let assigned: Vec<&AssignedModel> = targets
            .iter()
            .map(|t| {
                self.model_for(t)
                    .ok_or_else(|| Error::Config(format!("no model assigned for {t:?}")))
            })
            .collect::<Result<_>>()?;
        let cold = assigned.iter().any(|m| m.model.is_cold());
        let preds = raw
            .par_iter()
            .map(|f| {
                let x = self.mask.apply(f)?;
                let mut p = Prediction::default();
                for (t, m) in targets.iter().zip(&assigned) {
                    let xs = m.scaler.apply(&x)?;
                    let out = m.model.predict_one(&xs)?;
                    match (t, out) {
                        (ModelTarget::Thresholds { goals }, Output::Class { label, .. }) => {
                            p.thresholds = (0..goals.len()).map(|j| label >> j & 1 == 1).collect();
                        }
                        (ModelTarget::Setpoint { .. }, o) => p.setpoints.push(o.as_f64()),
                        (ModelTarget::Optimization { .. }, o) => p.optimization = Some(o.as_f64()),
                        _ => {
                            return Err(Error::Contract(
                                "model output does not match its target".into(),
                            ))
                        }
                    }
                }
                Ok(p)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((preds, cold))
    }

    /// Warm-up batch for `cycle`.
    pub fn training_batch(&self, n: usize, cycle: usize) -> Vec<usize> {
        let b = self.training_budget.unwrap_or(n).min(n);
        if b == n {
            return (0..n).collect();
        }
        match self.training_strategy {
            TrainingStrategy::RoundRobin => {
                let start = (cycle * b) % n;
                let mut ids: Vec<usize> = (0..b).map(|k| (start + k) % n).collect();
                ids.sort_unstable();
                ids
            }
            TrainingStrategy::Random => {
                let mut rng = derived_rng(self.seed, "training-batch", cycle as u64);
                let mut ids = index::sample(&mut rng, n, b).into_vec();
                ids.sort_unstable();
                ids
            }
        }
    }

    /// Builds the verification plan for one cycle. `raw` holds one
    /// unmasked feature vector per option of the space, in id order.
    pub fn reduce(
        &self,
        goals: &GoalSet,
        raw: &[FeatureVector],
        cycle: usize,
    ) -> Result<ReductionPlan> {
        let n = raw.len();
        if n == 0 {
            return Err(Error::Domain("empty adaptation space".into()));
        }
        if cycle < self.warmup_cycles {
            return Ok(ReductionPlan {
                filtered: self.training_batch(n, cycle),
                explored: Vec::new(),
                mode: PlanMode::Training,
                flags: Vec::new(),
            });
        }
        let (preds, cold) = self.predict(goals, raw)?;
        if cold {
            return Ok(ReductionPlan {
                filtered: self.training_batch(n, cycle),
                explored: Vec::new(),
                mode: PlanMode::Testing,
                flags: vec!["cold-model".into()],
            });
        }
        let ids: Vec<usize> = (0..n).collect();
        let mut flags = Vec::new();
        let mut filtered = filter_options(&ids, &preds, self.granularity, goals)?;
        let mut rng = derived_rng(self.seed, "explore", cycle as u64);
        if filtered.is_empty() {
            if goals.optimization.is_some() {
                flags.push("fallback-optimization".into());
                let relaxed = GoalSet {
                    optimization: goals.optimization,
                    ..GoalSet::default()
                };
                let stripped: Vec<Prediction> = preds
                    .iter()
                    .map(|p| Prediction {
                        optimization: p.optimization,
                        ..Prediction::default()
                    })
                    .collect();
                filtered = filter_options(&ids, &stripped, self.granularity, &relaxed)?;
            } else {
                flags.push("fallback-random".into());
                let k = self
                    .granularity
                    .min(exploration_size(self.exploration_rate, n).max(1));
                let mut pick = index::sample(&mut rng, n, k.min(n)).into_vec();
                pick.sort_unstable();
                filtered = pick;
            }
        }
        let mut explored = determine_exploration(n, &filtered, self.exploration_rate, &mut rng);
        if let Some(b) = self.testing_budget {
            explored.truncate(b.saturating_sub(filtered.len()));
            filtered.truncate(b);
        }
        Ok(ReductionPlan {
            filtered,
            explored,
            mode: PlanMode::Testing,
            flags,
        })
    }

    /// Learns from verified options: one update per option per model.
    /// Samples are presented in a seeded random order. Nothing is updated
    /// when any sample is invalid.
    pub fn ingest_verification(
        &mut self,
        raw: &[FeatureVector],
        phis: &[QualityVector],
        seed: u64,
    ) -> Result<usize> {
        if raw.len() != phis.len() {
            return Err(Error::Contract(format!(
                "{} feature vectors but {} quality vectors",
                raw.len(),
                phis.len()
            )));
        }
        let xs: Vec<FeatureVector> = raw
            .iter()
            .map(|f| self.mask.apply(f))
            .collect::<Result<_>>()?;
        let mut order: Vec<usize> = (0..raw.len()).collect();
        order.shuffle(&mut derived_rng(seed, "ingest", 0));
        let mut updated = self.models.clone();
        let mut count = 0;
        for m in &mut updated {
            let targets: Vec<Target> = phis
                .iter()
                .map(|q| m.target.target(q))
                .collect::<Result<_>>()?;
            for &i in &order {
                let x = m.scaler.apply(&xs[i])?;
                m.model.learn(&x, targets[i])?;
                count += 1;
            }
        }
        self.models = updated;
        Ok(count)
    }
}

fn setpoint_distance(goals: &[Goal], values: &[f64]) -> f64 {
    goals
        .iter()
        .zip(values)
        .map(|(g, v)| match g.kind {
            GoalKind::Setpoint { target, .. } => (v - target).abs(),
            _ => 0.0,
        })
        .sum()
}

/// Staged filter: predicted threshold compliance, then the `g` options
/// closest to the setpoints, then the `g` best by the optimization goal.
pub fn filter_options(
    ids: &[usize],
    preds: &[Prediction],
    g: usize,
    gs: &GoalSet,
) -> Result<Vec<usize>> {
    if ids.len() != preds.len() {
        return Err(Error::Contract(format!(
            "{} options but {} predictions",
            ids.len(),
            preds.len()
        )));
    }
    if g == 0 {
        return Err(Error::Config("granularity must be at least 1".into()));
    }
    for p in preds {
        if p.thresholds.len() != gs.thresholds.len()
            || p.setpoints.len() != gs.setpoints.len()
            || p.optimization.is_some() != gs.optimization.is_some()
        {
            return Err(Error::Contract(
                "prediction does not match the goal set".into(),
            ));
        }
    }
    let mut pool: Vec<usize> = (0..ids.len())
        .filter(|&i| preds[i].thresholds.iter().all(|&s| s))
        .collect();
    let mut ranked = false;
    if !gs.setpoints.is_empty() {
        let dist: Vec<f64> = pool
            .iter()
            .map(|&i| setpoint_distance(&gs.setpoints, &preds[i].setpoints))
            .collect();
        let mut order: Vec<usize> = (0..pool.len()).collect();
        order.sort_by(|&a, &b| {
            dist[a]
                .total_cmp(&dist[b])
                .then(ids[pool[a]].cmp(&ids[pool[b]]))
        });
        pool = order.into_iter().take(g).map(|k| pool[k]).collect();
        ranked = true;
    }
    if let Some(opt) = gs.optimization {
        let max = opt.kind == GoalKind::OptimizeMax;
        pool.sort_by(|&a, &b| {
            let (qa, qb) = (
                preds[a].optimization.unwrap(),
                preds[b].optimization.unwrap(),
            );
            let c = if max {
                qb.total_cmp(&qa)
            } else {
                qa.total_cmp(&qb)
            };
            c.then(ids[a].cmp(&ids[b]))
        });
        pool.truncate(g);
        ranked = true;
    }
    if !ranked {
        pool.sort_by_key(|&i| ids[i]);
        pool.truncate(g);
    }
    Ok(pool.into_iter().map(|i| ids[i]).collect())
}

/// Uniform sample without replacement of `min(ceil(e*n), n - |filtered|)`
/// options outside `filtered`, returned in ascending id order.
pub fn determine_exploration(
    n: usize,
    filtered: &[usize],
    e: f64,
    rng: &mut crate::seed::Rng,
) -> Vec<usize> {
    let mut taken = vec![false; n];
    for &f in filtered {
        if f < n {
            taken[f] = true;
        }
    }
    let rest: Vec<usize> = (0..n).filter(|&i| !taken[i]).collect();
    let k = exploration_size(e, n).min(rest.len());
    let mut out: Vec<usize> = index::sample(rng, rest.len(), k)
        .into_iter()
        .map(|i| rest[i])
        .collect();
    out.sort_unstable();
    out
}
