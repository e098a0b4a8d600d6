//! Building systems, reducers and loop runners from a scenario and
//! executing every approach on the same uncertainty trajectory.

use asr_core::features::{FeatureMask, Scaler, ScalerKind};
use asr_core::goals::GoalSet;
use asr_core::learners::{ModelSpec, ModelTarget};
use asr_core::mape::{Approach, CycleRecord, LoopRunner, ManagedSystem};
use asr_core::reducer::{AssignedModel, ReducerConfig};
use asr_core::seed::derive;
use asr_core::verifier::{QualityModel, Verifier};
use asr_core::{Error, Result};
use asr_sim::profile::Profile;
use asr_sim::{DeltaIoT, Sbs};
use rayon::prelude::*;

use crate::config::{
    resolve_goals, ModelEntry, ScenarioConfig, SystemKind, SystemSpec, TargetKind,
};

pub type System = Box<dyn ManagedSystem + Send>;

pub fn build_system(spec: &SystemSpec, seed: u64) -> Result<System> {
    let profile = spec.profile.as_deref().map(Profile::load).transpose()?;
    Ok(match spec.kind {
        SystemKind::Deltaiot => {
            let cfg = match &spec.config {
                Some(p) => DeltaIoT::load_config(p)?,
                None => Default::default(),
            };
            let sys = DeltaIoT::new(&cfg, seed)?;
            match profile {
                Some(p) => Box::new(sys.with_profile(p)?),
                None => Box::new(sys),
            }
        }
        SystemKind::Sbs => {
            let cfg = match &spec.config {
                Some(p) => Sbs::load_config(p)?,
                None => Default::default(),
            };
            let sys = Sbs::new(&cfg, seed)?;
            match profile {
                Some(p) => Box::new(sys.with_profile(p)),
                None => Box::new(sys),
            }
        }
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunSpec {
    pub id: String,
    pub approach: Approach,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub spec: RunSpec,
    pub records: Vec<CycleRecord>,
}

/// A validated scenario with everything resolved against its system.
pub struct Scenario {
    pub cfg: ScenarioConfig,
    pub goals: GoalSet,
    pub verifier: Verifier,
    pub quality_names: Vec<String>,
    pub feature_names: Vec<String>,
    pub n_options: usize,
}

impl Scenario {
    pub fn new(cfg: ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let probe = build_system(&cfg.system, 0)?;
        let quality_names = probe.quality_names();
        let goals = resolve_goals(&cfg.goals, &quality_names)?;
        if cfg.verifier.noise_std.len() != quality_names.len() {
            return Err(Error::Config(format!(
                "verifier lists {} qualities, the system has {}",
                cfg.verifier.noise_std.len(),
                quality_names.len()
            )));
        }
        let verifier = Verifier::new(
            cfg.verifier
                .noise_std
                .iter()
                .zip(&cfg.verifier.cost_ms)
                .enumerate()
                .map(|(quality, (&noise_std, &cost_ms))| QualityModel {
                    quality,
                    noise_std,
                    cost_ms,
                })
                .collect(),
        )?;
        verifier.check_coverage(&goals)?;
        Ok(Self {
            feature_names: probe.feature_names(),
            n_options: probe.space().len(),
            quality_names,
            goals,
            verifier,
            cfg,
        })
    }

    pub fn system_seed(&self) -> u64 {
        derive(self.cfg.seed, "system", 0)
    }

    /// A system on the shared scenario trajectory.
    pub fn system(&self) -> Result<System> {
        build_system(&self.cfg.system, self.system_seed())
    }

    pub fn runs(&self) -> Vec<RunSpec> {
        let mut runs = Vec::new();
        for a in &self.cfg.approaches {
            let approach: Approach = a.parse().expect("validated");
            match approach {
                Approach::Random => {
                    for k in 0..self.cfg.random_runs {
                        runs.push(RunSpec {
                            id: format!("random-{k:02}"),
                            approach,
                            seed: derive(self.cfg.seed, "random", k as u64),
                        });
                    }
                }
                _ => runs.push(RunSpec {
                    id: approach.as_str().into(),
                    approach,
                    seed: self.cfg.seed,
                }),
            }
        }
        runs
    }

    fn has_reference(&self) -> bool {
        self.cfg.approaches.iter().any(|a| a == "reference")
    }

    fn mask(&self) -> Result<FeatureMask> {
        match &self.cfg.reducer.features {
            None => Ok(FeatureMask::full(self.feature_names.len())),
            Some(names) => {
                let idx = names
                    .iter()
                    .map(|n| {
                        self.feature_names
                            .iter()
                            .position(|f| f == n)
                            .ok_or_else(|| Error::Config(format!("unknown feature '{n}'")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                FeatureMask::new(idx, self.feature_names.len())
            }
        }
    }

    fn target_for(&self, m: &ModelEntry) -> Result<ModelTarget> {
        let gs = &self.goals;
        match m.target {
            TargetKind::Thresholds if !gs.thresholds.is_empty() => Ok(ModelTarget::Thresholds {
                goals: gs.thresholds.clone(),
            }),
            TargetKind::Optimization => gs
                .optimization
                .map(|goal| ModelTarget::Optimization { goal })
                .ok_or_else(|| {
                    Error::Config("optimization model without an optimization goal".into())
                }),
            TargetKind::Setpoint => {
                let pick = match &m.quality {
                    Some(q) => {
                        let qi = q.resolve(&self.quality_names)?;
                        gs.setpoints.iter().find(|g| g.quality == qi)
                    }
                    None if gs.setpoints.len() == 1 => gs.setpoints.first(),
                    None => None,
                };
                pick.map(|&goal| ModelTarget::Setpoint { goal })
                    .ok_or_else(|| {
                        Error::Config(
                            "setpoint model does not match exactly one setpoint goal".into(),
                        )
                    })
            }
            TargetKind::Thresholds => Err(Error::Config(
                "threshold model without threshold goals".into(),
            )),
        }
    }

    /// Scalers fitted on every option of a few cycles of an independent
    /// run, so that no data of the evaluated trajectory leaks in.
    fn calibrate(&self, mask: &FeatureMask, kinds: &[ScalerKind]) -> Result<Vec<Scaler>> {
        let mut scalers: Vec<Scaler> = kinds
            .iter()
            .map(|&k| Scaler::unfitted(k, mask.len()))
            .collect();
        if kinds.iter().all(|&k| k == ScalerKind::None) {
            return Ok(scalers);
        }
        let mut sys = build_system(&self.cfg.system, derive(self.cfg.seed, "calibration", 0))?;
        for _ in 0..self.cfg.reducer.calibration_cycles.max(1) {
            let u = sys.uncertainties();
            for f in sys.features(&u) {
                let x = mask.apply(&f)?;
                for s in scalers.iter_mut().filter(|s| s.kind != ScalerKind::None) {
                    s.update(&x)?;
                }
            }
            sys.advance();
        }
        Ok(scalers)
    }

    pub fn build_reducer(&self) -> Result<ReducerConfig> {
        let r = &self.cfg.reducer;
        let seed = derive(self.cfg.seed, "reducer", 0);
        let mut rc = if let Some(path) = &r.design {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let mut d: ReducerConfig = serde_json::from_str(&text)?;
            d.granularity = r.granularity;
            d.training_strategy = r.training_strategy;
            d.training_budget = r.training_budget;
            d.testing_budget = r.testing_budget;
            d
        } else {
            if r.models.is_empty() {
                return Err(Error::Config(
                    "reducer lists no models and no design file".into(),
                ));
            }
            let mask = self.mask()?;
            let kinds: Vec<ScalerKind> = r.models.iter().map(|m| m.scaler).collect();
            let scalers = self.calibrate(&mask, &kinds)?;
            let models = r
                .models
                .iter()
                .zip(scalers)
                .map(|(m, scaler)| {
                    let target = self.target_for(m)?;
                    let spec = ModelSpec {
                        family: m.family,
                        loss: m.loss,
                        penalty: m.penalty,
                        hyperparams: m.hyperparams,
                    };
                    let model = target.new_model(spec, mask.len())?;
                    Ok(AssignedModel {
                        target,
                        scaler,
                        model,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            ReducerConfig {
                exploration_rate: r.exploration_rate,
                warmup_cycles: r.warmup_cycles,
                granularity: r.granularity,
                training_strategy: r.training_strategy,
                training_budget: r.training_budget,
                testing_budget: r.testing_budget,
                mask,
                models,
                seed,
            }
        };
        rc.seed = seed;
        rc.validate(&self.goals, self.feature_names.len())?;
        Ok(rc)
    }

    /// Cycles entering the run comparison: the testing phase of the
    /// learning approach, or every cycle without one.
    pub fn evaluation_start(&self) -> usize {
        if self.cfg.approaches.iter().any(|a| a == "ml2asr") {
            self.reducer_warmup()
        } else {
            0
        }
    }

    fn reducer_warmup(&self) -> usize {
        if let Some(path) = &self.cfg.reducer.design {
            if let Ok(text) = std::fs::read_to_string(path) {
                if let Ok(d) = serde_json::from_str::<ReducerConfig>(&text) {
                    return d.warmup_cycles;
                }
            }
        }
        self.cfg.reducer.warmup_cycles
    }

    fn runner(&self, spec: &RunSpec, reducer: Option<ReducerConfig>) -> LoopRunner {
        let r = &self.cfg.reducer;
        let exploration_rate = reducer
            .as_ref()
            .map_or(r.exploration_rate, |x| x.exploration_rate);
        LoopRunner {
            approach: spec.approach,
            goals: self.goals.clone(),
            verifier: self.verifier.clone(),
            reducer,
            granularity: r.granularity,
            exploration_rate,
            seed: spec.seed,
            scenario_seed: self.cfg.seed,
            co_reference: !self.has_reference() && spec.approach != Approach::Reference,
        }
    }

    pub fn run_one(&self, spec: &RunSpec, reducer: Option<ReducerConfig>) -> Result<RunResult> {
        let mut runner = self.runner(spec, reducer);
        let mut sys = self.system()?;
        let records = runner.run(&mut *sys, self.cfg.cycles)?;
        Ok(RunResult {
            spec: spec.clone(),
            records,
        })
    }

    /// Runs every approach in parallel. Reference qualities of the
    /// reference run are copied into the other runs' records.
    pub fn run_all(&self) -> Result<Vec<RunResult>> {
        let specs = self.runs();
        let reducer = if specs.iter().any(|s| s.approach == Approach::Ml2asr) {
            Some(self.build_reducer()?)
        } else {
            None
        };
        let mut results = specs
            .par_iter()
            .map(|s| {
                let r = (s.approach == Approach::Ml2asr)
                    .then(|| reducer.clone())
                    .flatten();
                self.run_one(s, r)
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(ri) = results
            .iter()
            .position(|r| r.spec.approach == Approach::Reference)
        {
            let reference: Vec<_> = results[ri]
                .records
                .iter()
                .map(|r| r.realized.clone())
                .collect();
            for (i, run) in results.iter_mut().enumerate() {
                if i != ri {
                    for (rec, q) in run.records.iter_mut().zip(&reference) {
                        rec.reference = Some(q.clone());
                    }
                }
            }
        }
        Ok(results)
    }
}
