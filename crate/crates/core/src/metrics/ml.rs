use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One-vs-rest counts for a single class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Averaging {
    #[default]
    Macro,
    Weighted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub f1: f64,
    pub mcc: f64,
    pub accuracy: f64,
    /// Per observed class, in ascending label order.
    pub per_class: BTreeMap<i64, ConfusionCounts>,
    pub flags: Vec<String>,
}

pub fn classification_metrics(y_true: &[i64], y_pred: &[i64]) -> Result<ClassificationMetrics> {
    classification_metrics_with(y_true, y_pred, Averaging::Macro)
}

/// F1 averaged over the classes observed in either vector, and the
/// multi-class Matthews correlation coefficient.
pub fn classification_metrics_with(
    y_true: &[i64],
    y_pred: &[i64],
    averaging: Averaging,
) -> Result<ClassificationMetrics> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Contract(format!(
            "label vectors differ in length ({} vs {})",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.is_empty() {
        return Err(Error::Domain("classification metrics on no samples".into()));
    }
    let n = y_true.len() as u64;
    let mut truth: BTreeMap<i64, u64> = BTreeMap::new();
    let mut pred: BTreeMap<i64, u64> = BTreeMap::new();
    let mut per_class: BTreeMap<i64, ConfusionCounts> = BTreeMap::new();
    let mut correct = 0u64;
    for (&t, &p) in y_true.iter().zip(y_pred) {
        *truth.entry(t).or_default() += 1;
        *pred.entry(p).or_default() += 1;
        per_class.entry(t).or_default();
        per_class.entry(p).or_default();
        if t == p {
            correct += 1;
        }
    }
    for (&k, c) in per_class.iter_mut() {
        let tp = y_true
            .iter()
            .zip(y_pred)
            .filter(|(&t, &p)| t == k && p == k)
            .count() as u64;
        let t = truth.get(&k).copied().unwrap_or(0);
        let p = pred.get(&k).copied().unwrap_or(0);
        *c = ConfusionCounts {
            tp,
            fp: p - tp,
            fn_: t - tp,
            tn: n + tp - t - p,
        };
    }

    let f1 = match averaging {
        Averaging::Macro => {
            per_class.values().map(ConfusionCounts::f1).sum::<f64>() / per_class.len() as f64
        }
        Averaging::Weighted => {
            per_class
                .iter()
                .map(|(k, c)| c.f1() * truth.get(k).copied().unwrap_or(0) as f64)
                .sum::<f64>()
                / n as f64
        }
    };

    let mut flags = Vec::new();
    let s = n as f64;
    let c = correct as f64;
    let pt: f64 = per_class
        .keys()
        .map(|k| {
            pred.get(k).copied().unwrap_or(0) as f64 * truth.get(k).copied().unwrap_or(0) as f64
        })
        .sum();
    let p2: f64 = pred.values().map(|&v| (v as f64).powi(2)).sum();
    let t2: f64 = truth.values().map(|&v| (v as f64).powi(2)).sum();
    let denom = ((s * s - p2) * (s * s - t2)).sqrt();
    let mcc = if denom > 0.0 {
        ((c * s - pt) / denom).clamp(-1.0, 1.0)
    } else {
        flags.push("mcc: degenerate denominator".to_string());
        0.0
    };

    Ok(ClassificationMetrics {
        f1,
        mcc,
        accuracy: c / s,
        per_class,
        flags,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub r2: f64,
    pub mse: f64,
    /// Median absolute error.
    pub mae: f64,
    /// Maximum absolute error.
    pub me: f64,
    pub flags: Vec<String>,
}

pub fn regression_metrics(y_true: &[f64], y_pred: &[f64]) -> Result<RegressionMetrics> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Contract(format!(
            "value vectors differ in length ({} vs {})",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.is_empty() {
        return Err(Error::Domain("regression metrics on no samples".into()));
    }
    crate::error::ensure_finite("regression truth", y_true)?;
    crate::error::ensure_finite("regression prediction", y_pred)?;
    let n = y_true.len() as f64;
    let mut abs: Vec<f64> = y_true
        .iter()
        .zip(y_pred)
        .map(|(t, p)| (t - p).abs())
        .collect();
    let ss_res: f64 = abs.iter().map(|a| a * a).sum();
    let mse = ss_res / n;
    abs.sort_by(f64::total_cmp);
    let m = abs.len();
    let mae = if m % 2 == 1 {
        abs[m / 2]
    } else {
        0.5 * (abs[m / 2 - 1] + abs[m / 2])
    };
    let me = abs[m - 1];

    let mut flags = Vec::new();
    let mean = y_true.iter().sum::<f64>() / n;
    let ss_tot: f64 = y_true.iter().map(|t| (t - mean).powi(2)).sum();
    let r2 = if y_true.len() < 2 {
        flags.push("r2: fewer than two samples".to_string());
        0.0
    } else if ss_tot == 0.0 {
        flags.push("r2: constant target".to_string());
        0.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok(RegressionMetrics {
        r2,
        mse,
        mae,
        me,
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_classifier() {
        let y = [0, 1, 2, 2, 3];
        let m = classification_metrics(&y, &y).unwrap();
        assert_eq!((m.f1, m.mcc, m.accuracy), (1.0, 1.0, 1.0));
    }

    #[test]
    fn balanced_binary_confusion_has_zero_mcc() {
        let m = classification_metrics(&[1, 1, 0, 0], &[1, 0, 1, 0]).unwrap();
        assert_eq!(m.mcc, 0.0);
        assert_eq!(
            m.per_class[&1],
            ConfusionCounts {
                tp: 1,
                fp: 1,
                fn_: 1,
                tn: 1
            }
        );
    }

    #[test]
    fn hand_built_confusion() {
        // truth / prediction pairs: TP=2, FN=1, FP=1, TN=2 for class 1.
        let t = [0, 1, 0, 1, 1, 0];
        let p = [0, 1, 0, 1, 0, 1];
        let m = classification_metrics(&t, &p).unwrap();
        assert_eq!(
            m.per_class[&1],
            ConfusionCounts {
                tp: 2,
                fp: 1,
                fn_: 1,
                tn: 2
            }
        );
        assert!((m.accuracy - 4.0 / 6.0).abs() < 1e-15);
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-12);
        assert!((m.mcc - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn length_mismatch_is_contract_error() {
        assert!(matches!(
            classification_metrics(&[1], &[1, 0]),
            Err(Error::Contract(_))
        ));
        assert!(matches!(
            regression_metrics(&[1.0], &[1.0, 0.0]),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn degenerate_mcc_is_flagged() {
        let m = classification_metrics(&[1, 1, 1], &[1, 1, 1]).unwrap();
        assert_eq!(m.mcc, 0.0);
        assert!(!m.flags.is_empty());
    }

    #[test]
    fn regression_examples() {
        let y = [1.0, 2.0, 5.0];
        let m = regression_metrics(&y, &y).unwrap();
        assert_eq!((m.r2, m.mse, m.mae, m.me), (1.0, 0.0, 0.0, 0.0));
        let mean = [8.0 / 3.0; 3];
        assert!(regression_metrics(&y, &mean).unwrap().r2.abs() < 1e-12);
        let m = regression_metrics(&[1.0, 4.0], &[1.0, 2.0]).unwrap();
        assert_eq!((m.mse, m.mae, m.me), (2.0, 1.0, 2.0));
        assert!(!regression_metrics(&[3.0, 3.0], &[3.0, 3.0])
            .unwrap()
            .flags
            .is_empty());
    }

    #[test]
    fn weighted_average_uses_support() {
        let t = [0, 0, 0, 1];
        let p = [0, 0, 0, 0];
        let macro_ = classification_metrics(&t, &p).unwrap().f1;
        let weighted = classification_metrics_with(&t, &p, Averaging::Weighted)
            .unwrap()
            .f1;
        assert!((macro_ - (6.0 / 7.0) / 2.0).abs() < 1e-12);
        assert!((weighted - 0.75 * 6.0 / 7.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn classification_ranges_and_relabel_invariance(
            pairs in prop::collection::vec((0i64..4, 0i64..4), 1..80),
            shift in 1i64..50,
        ) {
            let t: Vec<i64> = pairs.iter().map(|p| p.0).collect();
            let p: Vec<i64> = pairs.iter().map(|p| p.1).collect();
            let m = classification_metrics(&t, &p).unwrap();
            prop_assert!((0.0..=1.0).contains(&m.f1));
            prop_assert!((-1.0..=1.0).contains(&m.mcc));
            for c in m.per_class.values() {
                prop_assert!((0.0..=1.0).contains(&c.precision()));
                prop_assert!((0.0..=1.0).contains(&c.recall()));
            }
            // Consistent renaming: reverse the order and shift labels.
            let rn = |v: &[i64]| v.iter().map(|x| 10 * shift - x).collect::<Vec<_>>();
            let m2 = classification_metrics(&rn(&t), &rn(&p)).unwrap();
            prop_assert!((m.mcc - m2.mcc).abs() < 1e-12);
            prop_assert!((m.f1 - m2.f1).abs() < 1e-12);
        }

        #[test]
        fn regression_ranges(pairs in prop::collection::vec((-100.0..100.0f64, -100.0..100.0f64), 2..80)) {
            let t: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let p: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let m = regression_metrics(&t, &p).unwrap();
            prop_assert!(m.mse >= 0.0 && m.mae >= 0.0 && m.me >= 0.0);
            prop_assert!(m.me >= m.mae);
            prop_assert!(m.r2 <= 1.0);
        }
    }
}
