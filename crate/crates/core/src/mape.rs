//! The MAPE-K loop: monitor, analyse with optional reduction, verify, plan,
//! execute, and the planner's selection rule.

use std::time::Instant;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::domain::{AdaptationSpace, FeatureVector, QualityVector, UncertaintyVector};
use crate::features::compose_features;
use crate::goals::{goalset_satisfied, GoalKind, GoalSet};
use crate::reducer::{exploration_size, PlanMode, ReducerConfig};
use crate::seed::{derive, derived_rng};
use crate::verifier::{GroundTruth, VerificationResult, Verifier};
use crate::{Error, Result};

/// A simulated managed system the loop can monitor and adapt.
pub trait ManagedSystem: GroundTruth {
    fn space(&self) -> &AdaptationSpace;
    fn quality_names(&self) -> Vec<String>;
    fn feature_names(&self) -> Vec<String>;
    /// Current monitored uncertainties.
    fn uncertainties(&self) -> UncertaintyVector;
    /// Raw feature vector per option under `u`, in id order.
    fn features(&self, u: &UncertaintyVector) -> Vec<FeatureVector> {
        compose_features(self.space(), u)
    }
    fn apply_option(&mut self, id: usize) -> Result<()>;
    /// Moves the environment to the next cycle.
    fn advance(&mut self);
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Training,
    Testing,
    #[default]
    Exhaustive,
    Random,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Training => "training",
            Mode::Testing => "testing",
            Mode::Exhaustive => "exhaustive",
            Mode::Random => "random",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Approach {
    Ml2asr,
    Reference,
    Random,
}

impl Approach {
    pub fn as_str(self) -> &'static str {
        match self {
            Approach::Ml2asr => "ml2asr",
            Approach::Reference => "reference",
            Approach::Random => "random",
        }
    }
}

impl std::str::FromStr for Approach {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ml2asr" => Ok(Self::Ml2asr),
            "reference" => Ok(Self::Reference),
            "random" => Ok(Self::Random),
            _ => Err(Error::Config(format!("unknown approach '{s}'"))),
        }
    }
}

/// Log entry of one adaptation cycle.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub cycle: usize,
    pub approach: String,
    pub seed: u64,
    pub mode: Mode,
    pub n_total: usize,
    pub n_filtered: usize,
    pub n_explored: usize,
    pub n_verified: usize,
    pub chosen_id: usize,
    /// Noise-free qualities of the applied option.
    pub realized: QualityVector,
    /// Noise-free qualities of the exhaustive reference choice.
    pub reference: Option<QualityVector>,
    /// Simulated time to verify the whole space (T_t).
    pub t_total_sim_ms: f64,
    /// Simulated time to verify the reduced space (T_r).
    pub t_reduced_sim_ms: f64,
    /// Real time spent predicting and learning (T_o).
    pub t_learn_real_ms: f64,
    /// Realized satisfaction per threshold and setpoint goal.
    pub satisfied: Vec<bool>,
    pub flags: Vec<String>,
}

fn threshold_violation(kind: GoalKind, q: f64) -> f64 {
    let norm = |b: f64| if b == 0.0 { 1.0 } else { b.abs() };
    match kind {
        GoalKind::ThresholdBelow { bound } if q >= bound => (q - bound) / norm(bound),
        GoalKind::ThresholdAbove { bound } if q <= bound => (bound - q) / norm(bound),
        _ => 0.0,
    }
}

fn setpoint_distance(gs: &GoalSet, q: &[f64]) -> f64 {
    gs.setpoints
        .iter()
        .map(|g| match g.kind {
            GoalKind::Setpoint { target, .. } => (q[g.quality] - target).abs(),
            _ => 0.0,
        })
        .sum()
}

/// Picks the option to apply from a verification result.
///
/// The candidate pool holds the options meeting every threshold and
/// setpoint; if none do, it holds the options with the smallest summed
/// normalised threshold violation and then the smallest setpoint distance.
/// Within the pool the optimization goal decides, else the setpoint
/// distance, and remaining ties go to the lowest id.
pub fn plan_best_option(verified: &VerificationResult, gs: &GoalSet) -> Result<usize> {
    if verified.is_empty() {
        return Err(Error::Contract(
            "planner received no verified options".into(),
        ));
    }
    let q = &verified.qualities;
    let mut pool: Vec<usize> = Vec::new();
    for (i, qi) in q.iter().enumerate() {
        if goalset_satisfied(gs, qi)? {
            pool.push(i);
        }
    }
    if pool.is_empty() {
        let key = |i: usize| -> (f64, f64) {
            let v: f64 = gs
                .thresholds
                .iter()
                .map(|g| threshold_violation(g.kind, q[i][g.quality]))
                .sum();
            (v, setpoint_distance(gs, &q[i]))
        };
        let keys: Vec<(f64, f64)> = (0..verified.len()).map(key).collect();
        let best = keys
            .iter()
            .copied()
            .fold((f64::INFINITY, f64::INFINITY), |a, b| {
                if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) {
                    b
                } else {
                    a
                }
            });
        pool = (0..verified.len()).filter(|&i| keys[i] == best).collect();
        if pool.is_empty() {
            return Err(Error::NonFinite("verified qualities".into()));
        }
    }
    let score = |i: usize| -> f64 {
        match gs.optimization {
            Some(g) if g.kind == GoalKind::OptimizeMax => -q[i][g.quality],
            Some(g) => q[i][g.quality],
            None => setpoint_distance(gs, &q[i]),
        }
    };
    let best = pool
        .into_iter()
        .min_by(|&a, &b| {
            score(a)
                .total_cmp(&score(b))
                .then(verified.ids[a].cmp(&verified.ids[b]))
        })
        .expect("non-empty pool");
    Ok(verified.ids[best])
}

/// Per-approach loop state.
pub struct LoopRunner {
    pub approach: Approach,
    pub goals: GoalSet,
    pub verifier: Verifier,
    /// Required for `Approach::Ml2asr`.
    pub reducer: Option<ReducerConfig>,
    /// Granularity and exploration rate sizing the random baseline.
    pub granularity: usize,
    pub exploration_rate: f64,
    /// Seed of this run; drives the random baseline's sampling.
    pub seed: u64,
    /// Seed shared by all approaches of a scenario; keys verification noise.
    pub scenario_seed: u64,
    /// Also verify the whole space each cycle to record `q_o`.
    pub co_reference: bool,
}

impl LoopRunner {
    pub fn validate(&self, system: &dyn ManagedSystem) -> Result<()> {
        self.goals.check_qualities(system.n_qualities())?;
        self.verifier.check_coverage(&self.goals)?;
        if self.approach == Approach::Ml2asr {
            let r = self
                .reducer
                .as_ref()
                .ok_or_else(|| Error::Config("ml2asr needs a reducer configuration".into()))?;
            r.validate(&self.goals, system.feature_names().len())?;
        }
        if self.granularity == 0 {
            return Err(Error::Config("granularity must be at least 1".into()));
        }
        Ok(())
    }

    /// Runs one complete cycle and applies the chosen option.
    pub fn run_cycle(
        &mut self,
        system: &mut dyn ManagedSystem,
        cycle: usize,
    ) -> Result<CycleRecord> {
        let n = system.space().len();
        let u = system.uncertainties();
        let verify_seed = derive(self.scenario_seed, "verify", cycle as u64);
        let mut flags = Vec::new();
        let mut t_learn = 0.0;

        let (raw, ids, mode, n_filtered, n_explored) = match self.approach {
            Approach::Ml2asr => {
                let reducer = self.reducer.as_ref().expect("validated");
                let raw = system.features(&u);
                let start = Instant::now();
                let plan = reducer.reduce(&self.goals, &raw, cycle)?;
                t_learn += start.elapsed().as_secs_f64() * 1e3;
                flags.extend(plan.flags.iter().cloned());
                let mode = match plan.mode {
                    PlanMode::Training => Mode::Training,
                    PlanMode::Testing => Mode::Testing,
                };
                (
                    Some(raw),
                    plan.to_verify(),
                    mode,
                    plan.filtered.len(),
                    plan.explored.len(),
                )
            }
            Approach::Reference => (None, (0..n).collect(), Mode::Exhaustive, n, 0),
            Approach::Random => {
                let k = (self.granularity + exploration_size(self.exploration_rate, n)).min(n);
                let mut rng = derived_rng(self.seed, "random-plan", cycle as u64);
                let mut ids = index::sample(&mut rng, n, k).into_vec();
                ids.sort_unstable();
                (None, ids, Mode::Random, k, 0)
            }
        };

        let verified =
            self.verifier
                .verify(system.space(), &ids, &u, &*system, &self.goals, verify_seed)?;
        let chosen = plan_best_option(&verified, &self.goals)?;
        let space = system.space();
        let realized = system.qualities(space.option(chosen)?, &u);

        let reference = if self.approach == Approach::Reference {
            Some(realized.clone())
        } else if self.co_reference {
            let all: Vec<usize> = (0..n).collect();
            let full = self
                .verifier
                .verify(space, &all, &u, &*system, &self.goals, verify_seed)?;
            let best = plan_best_option(&full, &self.goals)?;
            Some(system.qualities(space.option(best)?, &u))
        } else {
            None
        };

        if let (Approach::Ml2asr, Some(raw)) = (self.approach, raw.as_ref()) {
            let reducer = self.reducer.as_mut().expect("validated");
            let xs: Vec<FeatureVector> = verified.ids.iter().map(|&i| raw[i].clone()).collect();
            let start = Instant::now();
            reducer.ingest_verification(
                &xs,
                &verified.qualities,
                derive(self.seed, "ingest", cycle as u64),
            )?;
            t_learn += start.elapsed().as_secs_f64() * 1e3;
        }

        let satisfied = self
            .goals
            .pointwise()
            .map(|g| crate::goals::evaluate_goal(g, realized[g.quality]))
            .collect::<Result<Vec<_>>>()?;

        system.apply_option(chosen)?;
        system.advance();

        Ok(CycleRecord {
            cycle,
            approach: self.approach.as_str().to_string(),
            seed: self.seed,
            mode,
            n_total: n,
            n_filtered,
            n_explored,
            n_verified: verified.len(),
            chosen_id: chosen,
            realized,
            reference,
            t_total_sim_ms: n as f64 * self.verifier.cost_per_option(),
            t_reduced_sim_ms: verified.t_sim_ms,
            t_learn_real_ms: t_learn,
            satisfied,
            flags,
        })
    }

    /// Runs `cycles` consecutive cycles starting at cycle 0.
    pub fn run(
        &mut self,
        system: &mut dyn ManagedSystem,
        cycles: usize,
    ) -> Result<Vec<CycleRecord>> {
        self.validate(system)?;
        (0..cycles).map(|c| self.run_cycle(system, c)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::goals::Goal;

    fn vr(qs: &[[f64; 3]]) -> VerificationResult {
        VerificationResult {
            ids: (0..qs.len()).collect(),
            qualities: qs.iter().map(|q| QualityVector(q.to_vec())).collect(),
            t_sim_ms: 0.0,
            t_real_ms: 0.0,
        }
    }

    #[test]
    fn planner_prefers_cheapest_compliant_option() {
        let gs = GoalSet::new([
            Goal::below(0, 10.0),
            Goal::below(1, 10.0),
            Goal::minimize(2),
        ])
        .unwrap();
        let v = vr(&[[8.0, 9.0, 20.0], [9.0, 8.0, 18.0], [12.0, 7.0, 5.0]]);
        assert_eq!(plan_best_option(&v, &gs).unwrap(), 1);
    }

    #[test]
    fn planner_falls_back_to_least_violation() {
        let gs = GoalSet::new([Goal::below(0, 10.0), Goal::minimize(2)]).unwrap();
        let v = vr(&[[15.0, 0.0, 1.0], [11.0, 0.0, 9.0], [20.0, 0.0, 0.0]]);
        assert_eq!(plan_best_option(&v, &gs).unwrap(), 1);
    }

    #[test]
    fn planner_single_and_empty() {
        let gs = GoalSet::new([Goal::below(0, 1.0)]).unwrap();
        assert_eq!(plan_best_option(&vr(&[[5.0, 0.0, 0.0]]), &gs).unwrap(), 0);
        assert!(matches!(
            plan_best_option(&vr(&[]), &gs),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn planner_uses_setpoint_distance_without_optimization() {
        let gs = GoalSet::new([Goal::setpoint(1, 10.0, 1.0)]).unwrap();
        let v = vr(&[[0.0, 10.6, 0.0], [0.0, 9.8, 0.0], [0.0, 10.2, 0.0]]);
        assert_eq!(plan_best_option(&v, &gs).unwrap(), 1);
        let v = vr(&[[0.0, 14.0, 0.0], [0.0, 7.5, 0.0]]);
        assert_eq!(plan_best_option(&v, &gs).unwrap(), 1);
    }

    #[test]
    fn planner_ties_go_to_lowest_id() {
        let gs = GoalSet::new([Goal::maximize(2)]).unwrap();
        let mut v = vr(&[[0.0, 0.0, 3.0], [0.0, 0.0, 3.0]]);
        v.ids = vec![7, 4];
        assert_eq!(plan_best_option(&v, &gs).unwrap(), 4);
    }
}
