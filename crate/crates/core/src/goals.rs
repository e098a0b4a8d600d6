//! Threshold, setpoint and optimization goals and their predicates.
//!
//! All comparisons are strict: a quality sitting exactly on a bound or on
//! the edge of a setpoint window violates the goal.

use serde::{Deserialize, Serialize};

use crate::error::ensure_finite;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GoalKind {
    ThresholdBelow { bound: f64 },
    ThresholdAbove { bound: f64 },
    Setpoint { target: f64, margin: f64 },
    OptimizeMin,
    OptimizeMax,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Goal {
    pub quality: usize,
    #[serde(flatten)]
    pub kind: GoalKind,
}

impl Goal {
    pub fn below(quality: usize, bound: f64) -> Self {
        Self {
            quality,
            kind: GoalKind::ThresholdBelow { bound },
        }
    }

    pub fn above(quality: usize, bound: f64) -> Self {
        Self {
            quality,
            kind: GoalKind::ThresholdAbove { bound },
        }
    }

    pub fn setpoint(quality: usize, target: f64, margin: f64) -> Self {
        Self {
            quality,
            kind: GoalKind::Setpoint { target, margin },
        }
    }

    pub fn minimize(quality: usize) -> Self {
        Self {
            quality,
            kind: GoalKind::OptimizeMin,
        }
    }

    pub fn maximize(quality: usize) -> Self {
        Self {
            quality,
            kind: GoalKind::OptimizeMax,
        }
    }

    pub fn is_threshold(&self) -> bool {
        matches!(
            self.kind,
            GoalKind::ThresholdBelow { .. } | GoalKind::ThresholdAbove { .. }
        )
    }

    pub fn is_setpoint(&self) -> bool {
        matches!(self.kind, GoalKind::Setpoint { .. })
    }

    pub fn is_optimization(&self) -> bool {
        matches!(self.kind, GoalKind::OptimizeMin | GoalKind::OptimizeMax)
    }

    /// Short column-friendly label, e.g. `packet_loss_lt_10`.
    pub fn label(&self, quality_names: &[String]) -> String {
        let q = quality_names
            .get(self.quality)
            .cloned()
            .unwrap_or_else(|| format!("q{}", self.quality));
        match self.kind {
            GoalKind::ThresholdBelow { bound } => format!("{q}_lt_{bound}"),
            GoalKind::ThresholdAbove { bound } => format!("{q}_gt_{bound}"),
            GoalKind::Setpoint { target, margin } => format!("{q}_sp_{target}_{margin}"),
            GoalKind::OptimizeMin => format!("{q}_min"),
            GoalKind::OptimizeMax => format!("{q}_max"),
        }
    }

    fn validate(&self) -> Result<()> {
        match self.kind {
            GoalKind::ThresholdBelow { bound } | GoalKind::ThresholdAbove { bound } => {
                ensure_finite("threshold bound", &[bound])
            }
            GoalKind::Setpoint { target, margin } => {
                ensure_finite("setpoint", &[target, margin])?;
                if margin <= 0.0 {
                    return Err(Error::Config(format!(
                        "setpoint margin must be strictly positive, got {margin}"
                    )));
                }
                Ok(())
            }
            GoalKind::OptimizeMin | GoalKind::OptimizeMax => Ok(()),
        }
    }
}

/// Threshold and setpoint goals plus at most one optimization goal.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GoalSet {
    pub thresholds: Vec<Goal>,
    pub setpoints: Vec<Goal>,
    pub optimization: Option<Goal>,
}

impl GoalSet {
    pub fn new(goals: impl IntoIterator<Item = Goal>) -> Result<Self> {
        let mut gs = GoalSet::default();
        for g in goals {
            g.validate()?;
            if g.is_threshold() {
                gs.thresholds.push(g);
            } else if g.is_setpoint() {
                gs.setpoints.push(g);
            } else if gs.optimization.replace(g).is_some() {
                return Err(Error::Config(
                    "at most one optimization goal is allowed".into(),
                ));
            }
        }
        Ok(gs)
    }

    /// Thresholds, then setpoints, then the optimization goal.
    pub fn goals(&self) -> impl Iterator<Item = &Goal> {
        self.thresholds
            .iter()
            .chain(&self.setpoints)
            .chain(self.optimization.iter())
    }

    /// Thresholds followed by setpoints.
    pub fn pointwise(&self) -> impl Iterator<Item = &Goal> {
        self.thresholds.iter().chain(&self.setpoints)
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty() && self.setpoints.is_empty() && self.optimization.is_none()
    }

    /// Checks that every goal indexes one of `n_qualities` qualities.
    pub fn check_qualities(&self, n_qualities: usize) -> Result<()> {
        match self.goals().find(|g| g.quality >= n_qualities) {
            Some(g) => Err(Error::Domain(format!(
                "goal on quality {} but only {n_qualities} qualities exist",
                g.quality
            ))),
            None => Ok(()),
        }
    }
}

/// Point-wise evaluation of a threshold or setpoint goal.
pub fn evaluate_goal(goal: &Goal, q: f64) -> Result<bool> {
    ensure_finite("goal input", &[q])?;
    match goal.kind {
        GoalKind::ThresholdBelow { bound } => Ok(q < bound),
        GoalKind::ThresholdAbove { bound } => Ok(q > bound),
        GoalKind::Setpoint { target, margin } => Ok((q - target).abs() < margin),
        GoalKind::OptimizeMin | GoalKind::OptimizeMax => Err(Error::Contract(
            "optimization goals are set-relative; use evaluate_optimization".into(),
        )),
    }
}

/// Marks every minimiser (or maximiser) of `qs` as satisfying the goal.
pub fn evaluate_optimization(goal: &Goal, qs: &[f64]) -> Result<Vec<bool>> {
    if qs.is_empty() {
        return Err(Error::Domain("optimization over an empty set".into()));
    }
    ensure_finite("optimization input", qs)?;
    let best = match goal.kind {
        GoalKind::OptimizeMin => qs.iter().copied().fold(f64::INFINITY, f64::min),
        GoalKind::OptimizeMax => qs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        _ => {
            return Err(Error::Contract(
                "evaluate_optimization needs an optimization goal".into(),
            ))
        }
    };
    Ok(qs.iter().map(|&q| q == best).collect())
}

/// True iff every threshold and setpoint goal holds on `phi`.
pub fn goalset_satisfied(gs: &GoalSet, phi: &[f64]) -> Result<bool> {
    for g in gs.pointwise() {
        let q = *phi.get(g.quality).ok_or_else(|| {
            Error::Domain(format!(
                "quality index {} outside vector of length {}",
                g.quality,
                phi.len()
            ))
        })?;
        if !evaluate_goal(g, q)? {
            return Ok(false);
        }
    }
    Ok(true)
}
