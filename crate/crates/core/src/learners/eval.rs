//! Design-stage splitting, candidate evaluation and model selection.

use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ModelSpec, OnlineModel, Target};
use crate::features::{LabeledDataset, Scaler, ScalerKind};
use crate::goals::{evaluate_goal, Goal, GoalSet};
use crate::metrics::{classification_metrics, regression_metrics};
use crate::seed::derived_rng;
use crate::{Error, Result};

/// What a model predicts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelTarget {
    /// One class per combination of satisfied thresholds: bit `j` of the
    /// class is set iff threshold `j` holds.
    Thresholds { goals: Vec<Goal> },
    /// The raw quality of a setpoint goal.
    Setpoint { goal: Goal },
    /// The raw quality of the optimization goal.
    Optimization { goal: Goal },
}

impl ModelTarget {
    /// One classifier for all thresholds, one regressor per setpoint and
    /// one for the optimization goal.
    pub fn from_goals(gs: &GoalSet) -> Vec<ModelTarget> {
        let mut t = Vec::new();
        if !gs.thresholds.is_empty() {
            t.push(ModelTarget::Thresholds {
                goals: gs.thresholds.clone(),
            });
        }
        t.extend(
            gs.setpoints
                .iter()
                .map(|&goal| ModelTarget::Setpoint { goal }),
        );
        if let Some(goal) = gs.optimization {
            t.push(ModelTarget::Optimization { goal });
        }
        t
    }

    pub fn is_classification(&self) -> bool {
        matches!(self, ModelTarget::Thresholds { .. })
    }

    pub fn classes(&self) -> Vec<i64> {
        match self {
            ModelTarget::Thresholds { goals } => (0..1i64 << goals.len()).collect(),
            _ => Vec::new(),
        }
    }

    /// Training target derived from a verified quality vector.
    pub fn target(&self, phi: &[f64]) -> Result<Target> {
        let get = |q: usize| {
            phi.get(q).copied().ok_or_else(|| {
                Error::Domain(format!(
                    "quality index {q} outside vector of length {}",
                    phi.len()
                ))
            })
        };
        match self {
            ModelTarget::Thresholds { goals } => {
                let mut class = 0i64;
                for (j, g) in goals.iter().enumerate() {
                    if evaluate_goal(g, get(g.quality)?)? {
                        class |= 1 << j;
                    }
                }
                Ok(Target::Class(class))
            }
            ModelTarget::Setpoint { goal } | ModelTarget::Optimization { goal } => {
                let v = get(goal.quality)?;
                crate::error::ensure_finite("regression target", &[v])?;
                Ok(Target::Value(v))
            }
        }
    }

    pub fn label(&self, quality_names: &[String]) -> String {
        match self {
            ModelTarget::Thresholds { goals } => goals
                .iter()
                .map(|g| g.label(quality_names))
                .collect::<Vec<_>>()
                .join("+"),
            ModelTarget::Setpoint { goal } | ModelTarget::Optimization { goal } => {
                goal.label(quality_names)
            }
        }
    }

    pub fn new_model(&self, spec: ModelSpec, dim: usize) -> Result<OnlineModel> {
        if self.is_classification() {
            OnlineModel::classifier(spec, self.classes(), dim)
        } else {
            OnlineModel::regressor(spec, dim)
        }
    }
}

/// A model architecture paired with the scaler fitted in front of it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    #[serde(flatten)]
    pub spec: ModelSpec,
    pub scaler: ScalerKind,
}

impl Candidate {
    pub fn name(&self) -> String {
        let s = match self.scaler {
            ScalerKind::None => "none",
            ScalerKind::MinMax => "min-max",
            ScalerKind::MaxAbs => "max-abs",
            ScalerKind::Standard => "standard",
        };
        format!("{}+{s}", self.spec.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSettings {
    pub train_fraction: f64,
    /// Caps training to this many cycles' worth of rows.
    pub warmup_cycles: Option<usize>,
    /// Fraction of test rows learned from after they are scored.
    pub exploration: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            warmup_cycles: None,
            exploration: 0.0,
            epochs: 1,
            seed: 0,
        }
    }
}

/// Disjoint seeded partition; `|train| = round(w * |ds|)`.
pub fn split(ds: &LabeledDataset, w: f64, seed: u64) -> Result<(LabeledDataset, LabeledDataset)> {
    if ds.len() < 2 {
        return Err(Error::Domain("split needs at least two rows".into()));
    }
    if !(w > 0.0 && w < 1.0) {
        return Err(Error::Domain(format!("train fraction {w} outside (0, 1)")));
    }
    let n_train = (w * ds.len() as f64).round() as usize;
    if n_train == 0 || n_train == ds.len() {
        return Err(Error::Domain(format!(
            "train fraction {w} leaves an empty partition of {} rows",
            ds.len()
        )));
    }
    let mut idx: Vec<usize> = (0..ds.len()).collect();
    idx.shuffle(&mut derived_rng(seed, "split", 0));
    Ok((ds.subset(&idx[..n_train]), ds.subset(&idx[n_train..])))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub candidate: usize,
    pub target: usize,
    pub metrics: BTreeMap<String, f64>,
    pub flags: Vec<String>,
}

impl CandidateScore {
    pub fn metric(&self, name: &str) -> f64 {
        self.metrics.get(name).copied().unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub model: String,
    pub goal: String,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub targets: Vec<String>,
    pub candidates: Vec<String>,
    pub scores: Vec<CandidateScore>,
}

impl EvaluationReport {
    pub fn for_target(&self, target: usize) -> Vec<&CandidateScore> {
        self.scores.iter().filter(|s| s.target == target).collect()
    }

    pub fn rows(&self) -> Vec<MetricRow> {
        self.scores
            .iter()
            .flat_map(|s| {
                s.metrics.iter().map(|(k, &v)| MetricRow {
                    model: self.candidates[s.candidate].clone(),
                    goal: self.targets[s.target].clone(),
                    metric: k.clone(),
                    value: v,
                })
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for r in self.rows() {
            wr.serialize(r)?;
        }
        wr.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Trains every compatible candidate for every goal target online and
/// scores it on held-out rows.
pub fn evaluate_models(
    catalog: &[Candidate],
    ds: &LabeledDataset,
    goals: &GoalSet,
    settings: &EvalSettings,
) -> Result<EvaluationReport> {
    if ds.is_empty() {
        return Err(Error::Domain("model evaluation on an empty dataset".into()));
    }
    if catalog.is_empty() {
        return Err(Error::Config("empty candidate catalog".into()));
    }
    goals.check_qualities(ds.quality_names.len())?;
    let targets = ModelTarget::from_goals(goals);
    let (train, test) = split(ds, settings.train_fraction, settings.seed)?;
    let limit = match settings.warmup_cycles {
        Some(w) => {
            let per_cycle = ds.len().div_ceil(ds.n_cycles().max(1));
            (w * per_cycle).clamp(1, train.len())
        }
        None => train.len(),
    };
    let train = train.subset(&(0..limit).collect::<Vec<_>>());

    let jobs: Vec<(usize, usize)> = (0..targets.len())
        .flat_map(|t| (0..catalog.len()).map(move |c| (t, c)))
        .filter(|&(t, c)| targets[t].is_classification() == catalog[c].spec.family.is_classifier())
        .collect();
    let scores = jobs
        .par_iter()
        .map(|&(t, c)| score_candidate(&catalog[c], &targets[t], &train, &test, settings, t, c))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvaluationReport {
        targets: targets.iter().map(|t| t.label(&ds.quality_names)).collect(),
        candidates: catalog.iter().map(Candidate::name).collect(),
        scores,
    })
}

fn score_candidate(
    cand: &Candidate,
    target: &ModelTarget,
    train: &LabeledDataset,
    test: &LabeledDataset,
    settings: &EvalSettings,
    t: usize,
    c: usize,
) -> Result<CandidateScore> {
    match fit_and_score(cand, target, train, test, settings, t, c) {
        Err(Error::NonFinite(what)) => {
            let names: &[&str] = if target.is_classification() {
                &["f1", "mcc", "accuracy"]
            } else {
                &["r2", "mse", "mae", "me"]
            };
            Ok(CandidateScore {
                candidate: c,
                target: t,
                metrics: names.iter().map(|n| (n.to_string(), f64::NAN)).collect(),
                flags: vec![format!("diverged: {what}")],
            })
        }
        r => r,
    }
}

fn fit_and_score(
    cand: &Candidate,
    target: &ModelTarget,
    train: &LabeledDataset,
    test: &LabeledDataset,
    settings: &EvalSettings,
    t: usize,
    c: usize,
) -> Result<CandidateScore> {
    let scaler = Scaler::fit(cand.scaler, &train.features)?;
    let dim = train.feature_names.len();
    let mut model = target.new_model(cand.spec, dim)?;
    let mut x = vec![0.0; dim];
    for _ in 0..settings.epochs.max(1) {
        for (f, q) in train.features.iter().zip(&train.qualities) {
            x.copy_from_slice(f);
            scaler.apply_in_place(&mut x)?;
            model.learn(&x, target.target(q)?)?;
        }
    }
    let mut rng = derived_rng(settings.seed, "explore-eval", (t * 1000 + c) as u64);
    let mut truth = Vec::with_capacity(test.len());
    let mut pred = Vec::with_capacity(test.len());
    for (f, q) in test.features.iter().zip(&test.qualities) {
        x.copy_from_slice(f);
        scaler.apply_in_place(&mut x)?;
        let y = target.target(q)?;
        truth.push(y);
        pred.push(model.predict_one(&x)?);
        if settings.exploration > 0.0 && rng.random::<f64>() < settings.exploration {
            model.learn(&x, y)?;
        }
    }

    let mut metrics = BTreeMap::new();
    let mut flags = Vec::new();
    if target.is_classification() {
        let yt: Vec<i64> = truth
            .iter()
            .map(|y| match y {
                Target::Class(c) => *c,
                Target::Value(v) => *v as i64,
            })
            .collect();
        let yp: Vec<i64> = pred.iter().map(|p| p.as_f64() as i64).collect();
        let m = classification_metrics(&yt, &yp)?;
        metrics.insert("f1".into(), m.f1);
        metrics.insert("mcc".into(), m.mcc);
        metrics.insert("accuracy".into(), m.accuracy);
        flags.extend(m.flags);
    } else {
        let yt: Vec<f64> = truth
            .iter()
            .map(|y| match y {
                Target::Value(v) => *v,
                Target::Class(c) => *c as f64,
            })
            .collect();
        let yp: Vec<f64> = pred.iter().map(|p| p.as_f64()).collect();
        let m = regression_metrics(&yt, &yp)?;
        metrics.insert("r2".into(), m.r2);
        metrics.insert("mse".into(), m.mse);
        metrics.insert("mae".into(), m.mae);
        metrics.insert("me".into(), m.me);
        flags.extend(m.flags);
    }
    Ok(CandidateScore {
        candidate: c,
        target: t,
        metrics,
        flags,
    })
}

/// Picks the best score: highest F1 (classification) or R2 (regression),
/// then highest MCC or lowest MSE, then the earliest candidate.
/// Returns the winning `CandidateScore::candidate`.
pub fn select_model(scores: &[&CandidateScore], classification: bool) -> Result<usize> {
    let first = *scores
        .first()
        .ok_or_else(|| Error::Domain("no evaluation reports to select from".into()))?;
    let key = |s: &CandidateScore| -> (f64, f64) {
        let clean = |v: f64| if v.is_nan() { f64::NEG_INFINITY } else { v };
        if classification {
            (clean(s.metric("f1")), clean(s.metric("mcc")))
        } else {
            (clean(s.metric("r2")), clean(-s.metric("mse")))
        }
    };
    let mut best = first;
    for &s in &scores[1..] {
        let (a, b) = (key(s), key(best));
        let better = a.0 > b.0
            || (a.0 == b.0 && (a.1 > b.1 || (a.1 == b.1 && s.candidate < best.candidate)));
        if better {
            best = s;
        }
    }
    Ok(best.candidate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{FeatureVector, QualityVector};
    use crate::learners::{Family, Loss, Penalty};

    fn toy(n: usize) -> LabeledDataset {
        let mut ds = LabeledDataset::new(vec!["a".into(), "b".into()], vec!["q".into()]);
        for i in 0..n {
            let a = (i % 10) as f64 / 10.0;
            let b = (i / 10) as f64 / 10.0;
            ds.push(
                i / 10,
                i % 10,
                FeatureVector(vec![a, b]),
                QualityVector(vec![a + 2.0 * b]),
            )
            .unwrap();
        }
        ds
    }

    #[test]
    fn split_cardinality_and_determinism() {
        let ds = toy(10);
        let (tr, te) = split(&ds, 0.8, 3).unwrap();
        assert_eq!((tr.len(), te.len()), (8, 2));
        let mut all: Vec<usize> = tr
            .options
            .iter()
            .zip(&tr.cycles)
            .chain(te.options.iter().zip(&te.cycles))
            .map(|(o, c)| c * 10 + o)
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(split(&ds, 0.8, 3).unwrap(), (tr, te));
        assert!(split(&ds, 0.01, 3).is_err());
        assert!(split(&ds, 1.0, 3).is_err());
    }

    #[test]
    fn split_is_a_partition_of_rows() {
        let ds = toy(100);
        let (tr, te) = split(&ds, 0.5, 9).unwrap();
        let key = |d: &LabeledDataset| -> Vec<(usize, usize)> {
            d.cycles
                .iter()
                .copied()
                .zip(d.options.iter().copied())
                .collect()
        };
        let mut all = key(&tr);
        all.extend(key(&te));
        all.sort_unstable();
        let mut orig = key(&ds);
        orig.sort_unstable();
        assert_eq!(all, orig);
    }

    #[test]
    fn threshold_class_encoding() {
        let t = ModelTarget::Thresholds {
            goals: vec![Goal::below(0, 10.0), Goal::below(1, 5.0)],
        };
        assert_eq!(t.target(&[12.0, 7.0]).unwrap(), Target::Class(0));
        assert_eq!(t.target(&[8.0, 7.0]).unwrap(), Target::Class(1));
        assert_eq!(t.target(&[12.0, 3.0]).unwrap(), Target::Class(2));
        assert_eq!(t.target(&[8.0, 3.0]).unwrap(), Target::Class(3));
        assert_eq!(t.classes(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn separable_data_is_learned_perfectly() {
        let ds = toy(100);
        let gs = GoalSet::new([Goal::below(0, 1.05)]).unwrap();
        let mut spec = ModelSpec::new(Family::Perceptron, Loss::Hinge, Penalty::None);
        spec.hyperparams.fit_intercept = true;
        let cands = [Candidate {
            spec,
            scaler: ScalerKind::None,
        }];
        let settings = EvalSettings {
            epochs: 200,
            ..EvalSettings::default()
        };
        let rep = evaluate_models(&cands, &ds, &gs, &settings).unwrap();
        assert_eq!(rep.scores.len(), 1);
        assert_eq!(rep.scores[0].metric("f1"), 1.0);
    }

    #[test]
    fn regression_targets_only_get_regressors() {
        let ds = toy(100);
        let gs = GoalSet::new([Goal::below(0, 1.0), Goal::minimize(0)]).unwrap();
        let cands = [
            Candidate {
                spec: ModelSpec::new(Family::SgdClassifier, Loss::Hinge, Penalty::L1),
                scaler: ScalerKind::MinMax,
            },
            Candidate {
                spec: ModelSpec::new(Family::PaRegressor, Loss::EpsilonInsensitive, Penalty::None),
                scaler: ScalerKind::None,
            },
        ];
        let rep = evaluate_models(&cands, &ds, &gs, &EvalSettings::default()).unwrap();
        assert_eq!(rep.scores.len(), 2);
        assert_eq!(rep.for_target(0)[0].candidate, 0);
        assert_eq!(rep.for_target(1)[0].candidate, 1);
        assert!(rep.for_target(1)[0].metric("r2") > 0.9);
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("model,goal,metric,value\n"));
        assert!(evaluate_models(&[], &ds, &gs, &EvalSettings::default()).is_err());
    }

    fn score(candidate: usize, f1: f64, mcc: f64) -> CandidateScore {
        CandidateScore {
            candidate,
            target: 0,
            metrics: [("f1".to_string(), f1), ("mcc".to_string(), mcc)]
                .into_iter()
                .collect(),
            flags: vec![],
        }
    }

    #[test]
    fn selection_rules() {
        let (a, b, c) = (
            score(0, 0.5, 0.1),
            score(1, 0.666, 0.2),
            score(2, 0.833, 0.3),
        );
        assert_eq!(select_model(&[&a, &b, &c], true).unwrap(), 2);
        assert_eq!(select_model(&[&a], true).unwrap(), 0);
        let (x, y) = (score(0, 0.8, 0.5), score(1, 0.8, 0.7));
        assert_eq!(select_model(&[&x, &y], true).unwrap(), 1);
        let (x, y) = (score(0, 0.8, 0.7), score(1, 0.8, 0.7));
        assert_eq!(select_model(&[&y, &x], true).unwrap(), 0);
        assert!(select_model(&[], true).is_err());
    }
}
