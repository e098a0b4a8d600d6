//! Online linear classifiers and regressors.
//!
//! Binary classifiers keep one weight vector with `classes[1]` as the
//! positive class. With more than two classes the model is one-vs-rest and
//! prediction takes the arg-max score, the lowest class index winning ties.

mod eval;

pub use eval::{
    evaluate_models, select_model, split, Candidate, CandidateScore, EvalSettings,
    EvaluationReport, MetricRow, ModelTarget,
};

use serde::{Deserialize, Serialize};

use crate::error::ensure_finite;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Perceptron,
    SgdClassifier,
    PaClassifier,
    SgdRegressor,
    PaRegressor,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Perceptron => "perceptron",
            Family::SgdClassifier => "sgd-classifier",
            Family::PaClassifier => "pa-classifier",
            Family::SgdRegressor => "sgd-regressor",
            Family::PaRegressor => "pa-regressor",
        }
    }

    pub fn is_classifier(self) -> bool {
        matches!(
            self,
            Family::Perceptron | Family::SgdClassifier | Family::PaClassifier
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Loss {
    Hinge,
    Log,
    Squared,
    EpsilonInsensitive,
    SquaredEpsilonInsensitive,
}

impl Loss {
    pub fn as_str(self) -> &'static str {
        match self {
            Loss::Hinge => "hinge",
            Loss::Log => "log",
            Loss::Squared => "squared",
            Loss::EpsilonInsensitive => "epsilon-insensitive",
            Loss::SquaredEpsilonInsensitive => "squared-epsilon-insensitive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Penalty {
    None,
    L1,
    L2,
    Elasticnet,
}

impl Penalty {
    pub fn as_str(self) -> &'static str {
        match self {
            Penalty::None => "none",
            Penalty::L1 => "l1",
            Penalty::L2 => "l2",
            Penalty::Elasticnet => "elasticnet",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    /// SGD learning rate.
    pub eta: f64,
    /// Regularisation strength.
    pub alpha: f64,
    /// L1 share of the elastic-net penalty.
    pub l1_ratio: f64,
    /// Insensitivity band of the epsilon losses.
    pub epsilon: f64,
    /// Passive-aggressive step cap.
    pub c: f64,
    pub fit_intercept: bool,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            eta: 0.01,
            alpha: 1e-4,
            l1_ratio: 0.15,
            epsilon: 0.1,
            c: 1.0,
            fit_intercept: true,
        }
    }
}

impl Hyperparams {
    fn validate(&self) -> Result<()> {
        ensure_finite(
            "hyperparameters",
            &[self.eta, self.alpha, self.l1_ratio, self.epsilon, self.c],
        )?;
        if self.eta <= 0.0 || self.c <= 0.0 {
            return Err(Error::Config("eta and C must be strictly positive".into()));
        }
        if self.alpha < 0.0 || self.epsilon < 0.0 || !(0.0..=1.0).contains(&self.l1_ratio) {
            return Err(Error::Config(
                "alpha and epsilon must be non-negative, l1_ratio within [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// Architecture of a model without any learned state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    pub loss: Loss,
    pub penalty: Penalty,
    #[serde(default)]
    pub hyperparams: Hyperparams,
}

impl ModelSpec {
    pub fn new(family: Family, loss: Loss, penalty: Penalty) -> Self {
        Self {
            family,
            loss,
            penalty,
            hyperparams: Hyperparams::default(),
        }
    }

    pub fn name(&self) -> String {
        format!(
            "{}:{}:{}",
            self.family.as_str(),
            self.loss.as_str(),
            self.penalty.as_str()
        )
    }

    fn validate(&self) -> Result<()> {
        self.hyperparams.validate()?;
        use Family::*;
        use Loss::*;
        let ok = match self.family {
            Perceptron => true,
            SgdClassifier => matches!(self.loss, Hinge | Log | Squared),
            PaClassifier => self.loss == Hinge,
            SgdRegressor => matches!(
                self.loss,
                Squared | EpsilonInsensitive | SquaredEpsilonInsensitive
            ),
            PaRegressor => matches!(self.loss, EpsilonInsensitive | SquaredEpsilonInsensitive),
        };
        if !ok {
            return Err(Error::Config(format!(
                "loss {:?} is not supported by {:?}",
                self.loss, self.family
            )));
        }
        Ok(())
    }
}

/// Training target of one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    Class(i64),
    Value(f64),
}

/// Model output for one feature vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Output {
    /// `cold` is set while fewer than two distinct classes have been seen.
    Class {
        label: i64,
        cold: bool,
    },
    Value {
        value: f64,
        cold: bool,
    },
}

impl Output {
    pub fn is_cold(&self) -> bool {
        match *self {
            Output::Class { cold, .. } | Output::Value { cold, .. } => cold,
        }
    }

    pub fn as_f64(&self) -> f64 {
        match *self {
            Output::Class { label, .. } => label as f64,
            Output::Value { value, .. } => value,
        }
    }
}

/// A linear model that learns one sample at a time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineModel {
    pub family: Family,
    pub loss: Loss,
    pub penalty: Penalty,
    pub hyperparams: Hyperparams,
    #[serde(default)]
    pub classes: Vec<i64>,
    pub weights: Vec<Vec<f64>>,
    pub intercepts: Vec<f64>,
    /// Samples seen per class (classifiers) or in total (regressors).
    pub seen: Vec<u64>,
    pub updates: u64,
}

impl OnlineModel {
    pub fn classifier(spec: ModelSpec, classes: Vec<i64>, dim: usize) -> Result<Self> {
        spec.validate()?;
        if !spec.family.is_classifier() {
            return Err(Error::Config(format!(
                "{:?} is not a classifier",
                spec.family
            )));
        }
        let mut sorted = classes.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() < 2 || sorted.len() != classes.len() {
            return Err(Error::Config(
                "classifiers need at least two distinct classes".into(),
            ));
        }
        let heads = if classes.len() == 2 { 1 } else { classes.len() };
        Ok(Self {
            family: spec.family,
            loss: spec.loss,
            penalty: spec.penalty,
            hyperparams: spec.hyperparams,
            seen: vec![0; classes.len()],
            classes,
            weights: vec![vec![0.0; dim]; heads],
            intercepts: vec![0.0; heads],
            updates: 0,
        })
    }

    pub fn regressor(spec: ModelSpec, dim: usize) -> Result<Self> {
        spec.validate()?;
        if spec.family.is_classifier() {
            return Err(Error::Config(format!(
                "{:?} is not a regressor",
                spec.family
            )));
        }
        Ok(Self {
            family: spec.family,
            loss: spec.loss,
            penalty: spec.penalty,
            hyperparams: spec.hyperparams,
            classes: Vec::new(),
            weights: vec![vec![0.0; dim]],
            intercepts: vec![0.0],
            seen: vec![0],
            updates: 0,
        })
    }

    pub fn spec(&self) -> ModelSpec {
        ModelSpec {
            family: self.family,
            loss: self.loss,
            penalty: self.penalty,
            hyperparams: self.hyperparams,
        }
    }

    pub fn is_classifier(&self) -> bool {
        self.family.is_classifier()
    }

    pub fn dim(&self) -> usize {
        self.weights[0].len()
    }

    pub fn is_cold(&self) -> bool {
        if self.is_classifier() {
            self.seen.iter().filter(|&&c| c > 0).count() < 2
        } else {
            self.updates == 0
        }
    }

    fn score(&self, head: usize, x: &[f64]) -> f64 {
        self.weights[head]
            .iter()
            .zip(x)
            .map(|(w, x)| w * x)
            .sum::<f64>()
            + self.intercepts[head]
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Contract(format!(
                "model expects {} features, got {}",
                self.dim(),
                x.len()
            )));
        }
        Ok(())
    }

    /// Learns from one sample and returns the updated model.
    pub fn learn_online(&self, x: &[f64], target: Target) -> Result<Self> {
        let mut m = self.clone();
        m.learn(x, target)?;
        Ok(m)
    }

    /// In-place variant of [`OnlineModel::learn_online`]; the model is left
    /// unchanged when an error is returned.
    pub fn learn(&mut self, x: &[f64], target: Target) -> Result<()> {
        self.check_dim(x)?;
        ensure_finite("learning sample", x)?;
        match (self.is_classifier(), target) {
            (true, Target::Class(label)) => {
                let k = self
                    .classes
                    .iter()
                    .position(|&c| c == label)
                    .ok_or_else(|| Error::Contract(format!("unknown class label {label}")))?;
                if self.classes.len() == 2 {
                    let y = if k == 1 { 1.0 } else { -1.0 };
                    self.step_classifier(0, x, y);
                } else {
                    for head in 0..self.classes.len() {
                        let y = if head == k { 1.0 } else { -1.0 };
                        self.step_classifier(head, x, y);
                    }
                }
                self.seen[k] += 1;
            }
            (false, Target::Value(y)) => {
                ensure_finite("regression target", &[y])?;
                self.step_regressor(x, y);
                self.seen[0] += 1;
            }
            (true, Target::Value(_)) => {
                return Err(Error::Contract("classifier given a scalar target".into()))
            }
            (false, Target::Class(_)) => {
                return Err(Error::Contract("regressor given a class target".into()))
            }
        }
        self.updates += 1;
        Ok(())
    }

    fn sq_norm(&self, x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum::<f64>()
            + if self.hyperparams.fit_intercept {
                1.0
            } else {
                0.0
            }
    }

    /// Adds `tau * x` to head `h` (and `tau` to its intercept).
    fn axpy(&mut self, h: usize, tau: f64, x: &[f64]) {
        for (w, xi) in self.weights[h].iter_mut().zip(x) {
            *w += tau * xi;
        }
        if self.hyperparams.fit_intercept {
            self.intercepts[h] += tau;
        }
    }

    /// Gradient step `w -= eta * (g * x + alpha * dpenalty(w))`.
    fn sgd_step(&mut self, h: usize, g: f64, x: &[f64]) {
        let hp = self.hyperparams;
        let sign = |v: f64| {
            if v > 0.0 {
                1.0
            } else if v < 0.0 {
                -1.0
            } else {
                0.0
            }
        };
        let penalty = self.penalty;
        for (w, xi) in self.weights[h].iter_mut().zip(x) {
            let dp = match penalty {
                Penalty::None => 0.0,
                Penalty::L2 => *w,
                Penalty::L1 => sign(*w),
                Penalty::Elasticnet => hp.l1_ratio * sign(*w) + (1.0 - hp.l1_ratio) * *w,
            };
            *w -= hp.eta * (g * xi + hp.alpha * dp);
        }
        if hp.fit_intercept {
            self.intercepts[h] -= hp.eta * g;
        }
    }

    fn step_classifier(&mut self, h: usize, x: &[f64], y: f64) {
        let s = self.score(h, x);
        match self.family {
            Family::Perceptron => {
                if y * s <= 0.0 {
                    self.axpy(h, y, x);
                }
            }
            Family::PaClassifier => {
                let loss = (1.0 - y * s).max(0.0);
                let n = self.sq_norm(x);
                if loss > 0.0 && n > 0.0 {
                    let tau = (loss / n).min(self.hyperparams.c);
                    self.axpy(h, tau * y, x);
                }
            }
            Family::SgdClassifier => {
                let z = y * s;
                let g = match self.loss {
                    Loss::Hinge => {
                        if z < 1.0 {
                            -y
                        } else {
                            0.0
                        }
                    }
                    // d/ds log(1 + exp(-y s)) = -y * sigmoid(-z)
                    Loss::Log => {
                        let sig = if z > 0.0 {
                            let e = (-z).exp();
                            e / (1.0 + e)
                        } else {
                            1.0 / (1.0 + z.exp())
                        };
                        -y * sig
                    }
                    _ => -2.0 * (y - s),
                };
                self.sgd_step(h, g, x);
            }
            _ => unreachable!("regressor family in classifier step"),
        }
    }

    fn step_regressor(&mut self, x: &[f64], y: f64) {
        let s = self.score(0, x);
        let r = y - s;
        let eps = self.hyperparams.epsilon;
        match self.family {
            Family::PaRegressor => {
                let loss = (r.abs() - eps).max(0.0);
                let n = self.sq_norm(x);
                if loss > 0.0 && n > 0.0 {
                    let c = self.hyperparams.c;
                    let tau = match self.loss {
                        Loss::SquaredEpsilonInsensitive => loss / (n + 1.0 / (2.0 * c)),
                        _ => (loss / n).min(c),
                    };
                    self.axpy(0, tau * r.signum(), x);
                }
            }
            Family::SgdRegressor => {
                let g = match self.loss {
                    Loss::Squared => -2.0 * r,
                    Loss::EpsilonInsensitive if r.abs() > eps => -r.signum(),
                    Loss::SquaredEpsilonInsensitive if r.abs() > eps => {
                        -2.0 * (r - eps * r.signum())
                    }
                    _ => 0.0,
                };
                self.sgd_step(0, g, x);
            }
            _ => unreachable!("classifier family in regressor step"),
        }
    }

    /// Predicts one output per feature vector.
    pub fn predict(&self, xs: &[impl AsRef<[f64]>]) -> Result<Vec<Output>> {
        xs.iter().map(|x| self.predict_one(x.as_ref())).collect()
    }

    pub fn predict_one(&self, x: &[f64]) -> Result<Output> {
        self.check_dim(x)?;
        let cold = self.is_cold();
        if !self.is_classifier() {
            return Ok(Output::Value {
                value: self.score(0, x),
                cold,
            });
        }
        if cold {
            let k = self.seen.iter().position(|&c| c > 0).unwrap_or(0);
            return Ok(Output::Class {
                label: self.classes[k],
                cold,
            });
        }
        let k = if self.classes.len() == 2 {
            usize::from(self.score(0, x) > 0.0)
        } else {
            let mut best = 0;
            let mut best_s = self.score(0, x);
            for h in 1..self.classes.len() {
                let s = self.score(h, x);
                if s > best_s {
                    best = h;
                    best_s = s;
                }
            }
            best
        };
        Ok(Output::Class {
            label: self.classes[k],
            cold,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn spec(f: Family, l: Loss, p: Penalty) -> ModelSpec {
        ModelSpec::new(f, l, p)
    }

    #[test]
    fn perceptron_single_step() {
        let m = OnlineModel::classifier(
            spec(Family::Perceptron, Loss::Hinge, Penalty::None),
            vec![-1, 1],
            2,
        )
        .unwrap();
        let m = m.learn_online(&[1.0, 1.0], Target::Class(1)).unwrap();
        assert_eq!(m.weights[0], vec![1.0, 1.0]);
    }

    #[test]
    fn pa_classifier_single_step() {
        let mut s = spec(Family::PaClassifier, Loss::Hinge, Penalty::None);
        s.hyperparams.fit_intercept = false;
        let m = OnlineModel::classifier(s, vec![-1, 1], 2).unwrap();
        let m = m.learn_online(&[1.0, 0.0], Target::Class(1)).unwrap();
        assert_eq!(m.weights[0], vec![1.0, 0.0]);
    }

    #[test]
    fn sgd_regressor_single_step() {
        let mut s = spec(Family::SgdRegressor, Loss::Squared, Penalty::None);
        s.hyperparams.eta = 0.1;
        s.hyperparams.alpha = 0.0;
        s.hyperparams.fit_intercept = false;
        let m = OnlineModel::regressor(s, 1).unwrap();
        let m = m.learn_online(&[1.0], Target::Value(2.0)).unwrap();
        assert!((m.weights[0][0] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn affine_prediction() {
        let mut m = OnlineModel::regressor(
            spec(Family::PaRegressor, Loss::EpsilonInsensitive, Penalty::None),
            1,
        )
        .unwrap();
        m.weights[0] = vec![2.0];
        m.intercepts[0] = 1.0;
        m.updates = 1;
        assert_eq!(
            m.predict_one(&[3.0]).unwrap(),
            Output::Value {
                value: 7.0,
                cold: false
            }
        );
    }

    #[test]
    fn non_finite_target_leaves_model_unchanged() {
        let mut m =
            OnlineModel::regressor(spec(Family::SgdRegressor, Loss::Squared, Penalty::L2), 2)
                .unwrap();
        let before = m.clone();
        assert!(m.learn(&[1.0, 2.0], Target::Value(f64::NAN)).is_err());
        assert!(m.learn(&[1.0], Target::Value(1.0)).is_err());
        assert_eq!(m, before);
    }

    #[test]
    fn separable_rows_are_reproduced() {
        // Four features, label 1 iff the second feature is below 0.5.
        let rows = [
            ([0.4, 0.75, 0.2, 0.1], 0),
            ([0.5, 0.4, 0.15, 0.5], 1),
            ([0.2, 0.6, 0.8, 0.25], 0),
            ([0.8, 0.05, 0.25, 0.5], 1),
            ([0.5, 0.25, 0.2, 0.7], 1),
            ([0.6, 0.7, 0.4, 0.4], 0),
        ];
        let mut m = OnlineModel::classifier(
            spec(Family::Perceptron, Loss::Hinge, Penalty::None),
            vec![0, 1],
            4,
        )
        .unwrap();
        for _ in 0..100 {
            for (x, y) in &rows {
                m.learn(x, Target::Class(*y)).unwrap();
            }
        }
        for (x, y) in &rows {
            assert_eq!(
                m.predict_one(x).unwrap(),
                Output::Class {
                    label: *y,
                    cold: false
                }
            );
        }
    }

    #[test]
    fn multiclass_ties_pick_lowest_index() {
        let mut m = OnlineModel::classifier(
            spec(Family::PaClassifier, Loss::Hinge, Penalty::None),
            vec![0, 1, 2, 3],
            2,
        )
        .unwrap();
        m.seen = vec![1, 1, 0, 0];
        assert_eq!(
            m.predict_one(&[1.0, 1.0]).unwrap(),
            Output::Class {
                label: 0,
                cold: false
            }
        );
        m.intercepts = vec![0.0, 1.0, 1.0, 0.5];
        assert_eq!(
            m.predict_one(&[1.0, 1.0]).unwrap(),
            Output::Class {
                label: 1,
                cold: false
            }
        );
    }

    #[test]
    fn cold_until_two_classes_seen() {
        let m = OnlineModel::classifier(
            spec(Family::SgdClassifier, Loss::Log, Penalty::L1),
            vec![0, 1, 2, 3],
            1,
        )
        .unwrap();
        assert!(m.predict_one(&[0.0]).unwrap().is_cold());
        let m = m.learn_online(&[1.0], Target::Class(2)).unwrap();
        assert_eq!(
            m.predict_one(&[0.0]).unwrap(),
            Output::Class {
                label: 2,
                cold: true
            }
        );
        let m = m.learn_online(&[-1.0], Target::Class(0)).unwrap();
        assert!(!m.predict_one(&[0.0]).unwrap().is_cold());
    }

    #[test]
    fn invalid_specs_are_config_errors() {
        assert!(OnlineModel::classifier(
            spec(Family::PaClassifier, Loss::Log, Penalty::None),
            vec![0, 1],
            1
        )
        .is_err());
        assert!(OnlineModel::classifier(
            spec(Family::Perceptron, Loss::Hinge, Penalty::None),
            vec![0],
            1
        )
        .is_err());
        assert!(
            OnlineModel::regressor(spec(Family::Perceptron, Loss::Hinge, Penalty::None), 1)
                .is_err()
        );
        let mut s = spec(Family::SgdRegressor, Loss::Squared, Penalty::None);
        s.hyperparams.eta = 0.0;
        assert!(OnlineModel::regressor(s, 1).is_err());
    }

    #[test]
    fn model_json_shape() {
        let m = OnlineModel::classifier(
            spec(Family::SgdClassifier, Loss::Log, Penalty::L1),
            vec![0, 1],
            2,
        )
        .unwrap();
        let v: serde_json::Value = serde_json::to_value(&m).unwrap();
        for k in [
            "family",
            "loss",
            "penalty",
            "hyperparams",
            "classes",
            "weights",
            "intercepts",
        ] {
            assert!(v.get(k).is_some(), "{k}");
        }
        assert_eq!(v["family"], "sgd-classifier");
        let back: OnlineModel = serde_json::from_value(v).unwrap();
        assert_eq!(back, m);
        assert_eq!(m.spec().name(), "sgd-classifier:log:l1");
    }

    #[test]
    fn l1_keeps_irrelevant_weights_small() {
        let mut m = OnlineModel::classifier(
            spec(Family::SgdClassifier, Loss::Hinge, Penalty::L1),
            vec![0, 1],
            3,
        )
        .unwrap();
        let mut r = rng(4);
        for _ in 0..10_000 {
            let a: f64 = r.random_range(-1.0..1.0);
            let b: f64 = r.random_range(-1.0..1.0);
            m.learn(&[a, b, 0.0], Target::Class(i64::from(a + 0.5 * b > 0.0)))
                .unwrap();
        }
        let w = &m.weights[0];
        let max = w.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(w[2].abs() < 0.05 * max);
    }

    #[test]
    fn perceptron_mistake_bound() {
        // Unit-norm-ish data separated by margin gamma around a fixed direction.
        let mut r = rng(11);
        let u = [0.6, 0.8];
        let gamma = 0.1;
        let mut data = Vec::new();
        while data.len() < 500 {
            let x = [r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)];
            let d: f64 = u[0] * x[0] + u[1] * x[1];
            if d.abs() >= gamma {
                data.push((x, if d > 0.0 { 1 } else { -1 }));
            }
        }
        let big_r = data
            .iter()
            .map(|(x, _)| (x[0] * x[0] + x[1] * x[1]).sqrt())
            .fold(0.0, f64::max);
        let mut s = spec(Family::Perceptron, Loss::Hinge, Penalty::None);
        s.hyperparams.fit_intercept = false;
        let mut m = OnlineModel::classifier(s, vec![-1, 1], 2).unwrap();
        let mut mistakes = 0u32;
        for _ in 0..20 {
            for (x, y) in &data {
                if m.predict_one(x).unwrap()
                    != (Output::Class {
                        label: *y,
                        cold: m.is_cold(),
                    })
                {
                    mistakes += 1;
                }
                m.learn(x, Target::Class(*y)).unwrap();
            }
        }
        assert!(f64::from(mistakes) <= (big_r / gamma).powi(2));
    }

    proptest! {
        #[test]
        fn pa_update_zeroes_hinge_loss_when_uncapped(
            x in prop::collection::vec(-2.0..2.0f64, 1..6),
            w0 in prop::collection::vec(-1.0..1.0f64, 6),
            pos in any::<bool>(),
        ) {
            let mut s = spec(Family::PaClassifier, Loss::Hinge, Penalty::None);
            s.hyperparams.c = 1e9;
            let mut m = OnlineModel::classifier(s, vec![0, 1], x.len()).unwrap();
            m.weights[0] = w0[..x.len()].to_vec();
            let y = if pos { 1.0 } else { -1.0 };
            let before = (1.0 - y * m.score(0, &x)).max(0.0);
            let m2 = m.learn_online(&x, Target::Class(i64::from(pos))).unwrap();
            let after = (1.0 - y * m2.score(0, &x)).max(0.0);
            prop_assert!(after <= before + 1e-12);
            prop_assert!(after < 1e-9);
        }

        #[test]
        fn learning_is_a_pure_transition(
            xs in prop::collection::vec(prop::collection::vec(-3.0..3.0f64, 3), 1..40),
            ys in prop::collection::vec(0i64..4, 40),
        ) {
            let base = OnlineModel::classifier(spec(Family::SgdClassifier, Loss::Hinge, Penalty::Elasticnet), vec![0, 1, 2, 3], 3).unwrap();
            let run = || {
                let mut m = base.clone();
                let mut out = Vec::new();
                for (x, &y) in xs.iter().zip(&ys) {
                    m = m.learn_online(x, Target::Class(y)).unwrap();
                    out.push(m.predict_one(x).unwrap());
                }
                (m, out)
            };
            prop_assert_eq!(run(), run());
        }
    }
}
