//! Scenario files: one TOML or JSON document per scenario.

use std::path::{Path, PathBuf};

use anyhow::Context;
use asr_core::features::ScalerKind;
use asr_core::goals::{Goal, GoalKind, GoalSet};
use asr_core::learners::{Candidate, Family, Hyperparams, Loss, Penalty};
use asr_core::reducer::TrainingStrategy;
use asr_core::{Error, Result};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemKind {
    Deltaiot,
    Sbs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub kind: SystemKind,
    /// Simulator JSON; built-in defaults when absent.
    #[serde(default)]
    pub config: Option<PathBuf>,
    /// Recorded uncertainty profile replacing the random walks.
    #[serde(default)]
    pub profile: Option<PathBuf>,
}

/// A quality referenced by position or by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum QualityRef {
    Index(usize),
    Name(String),
}

impl QualityRef {
    pub fn resolve(&self, names: &[String]) -> Result<usize> {
        match self {
            QualityRef::Index(i) if *i < names.len() => Ok(*i),
            QualityRef::Index(i) => Err(Error::Config(format!("quality index {i} out of range"))),
            QualityRef::Name(n) => names.iter().position(|x| x == n).ok_or_else(|| {
                Error::Config(format!("unknown quality '{n}', expected one of {names:?}"))
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoalSpec {
    pub kind: String,
    pub quality: QualityRef,
    #[serde(default)]
    pub bound: Option<f64>,
    #[serde(default)]
    pub target: Option<f64>,
    #[serde(default)]
    pub margin: Option<f64>,
}

impl GoalSpec {
    pub fn resolve(&self, names: &[String]) -> Result<Goal> {
        let quality = self.quality.resolve(names)?;
        let need = |v: Option<f64>, what: &str| {
            v.ok_or_else(|| Error::Config(format!("goal '{}' needs '{what}'", self.kind)))
        };
        let kind = match self.kind.as_str() {
            "threshold-below" => GoalKind::ThresholdBelow {
                bound: need(self.bound, "bound")?,
            },
            "threshold-above" => GoalKind::ThresholdAbove {
                bound: need(self.bound, "bound")?,
            },
            "setpoint" => GoalKind::Setpoint {
                target: need(self.target, "target")?,
                margin: need(self.margin, "margin")?,
            },
            "optimize-min" => GoalKind::OptimizeMin,
            "optimize-max" => GoalKind::OptimizeMax,
            k => return Err(Error::Config(format!("unknown goal kind '{k}'"))),
        };
        Ok(Goal { quality, kind })
    }
}

pub fn resolve_goals(specs: &[GoalSpec], names: &[String]) -> Result<GoalSet> {
    let goals = specs
        .iter()
        .map(|g| g.resolve(names))
        .collect::<Result<Vec<_>>>()?;
    GoalSet::new(goals)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetKind {
    Thresholds,
    Setpoint,
    Optimization,
}

/// One model of the reducer, with its scaler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelEntry {
    pub target: TargetKind,
    /// Picks the setpoint goal when there are several.
    #[serde(default)]
    pub quality: Option<QualityRef>,
    pub family: Family,
    pub loss: Loss,
    pub penalty: Penalty,
    #[serde(default = "default_scaler")]
    pub scaler: ScalerKind,
    #[serde(default)]
    pub hyperparams: Hyperparams,
}

fn default_scaler() -> ScalerKind {
    ScalerKind::None
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReducerSpec {
    pub exploration_rate: f64,
    pub warmup_cycles: usize,
    pub granularity: usize,
    #[serde(default)]
    pub training_strategy: TrainingStrategy,
    #[serde(default)]
    pub training_budget: Option<usize>,
    #[serde(default)]
    pub testing_budget: Option<usize>,
    /// Kept feature names; all features when absent.
    #[serde(default)]
    pub features: Option<Vec<String>>,
    #[serde(default)]
    pub models: Vec<ModelEntry>,
    /// Reducer chosen by `design`; replaces `models` and `features`.
    #[serde(default)]
    pub design: Option<PathBuf>,
    /// Cycles of an independent run used to fit scalers.
    #[serde(default = "default_calibration")]
    pub calibration_cycles: usize,
}

fn default_calibration() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifierSpec {
    /// Noise std per quality, in quality units.
    pub noise_std: Vec<f64>,
    /// Simulated cost per quality per option, ms.
    pub cost_ms: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSpec {
    #[serde(default = "default_rates")]
    pub exploration_rates: Vec<f64>,
    #[serde(default = "default_warmups")]
    pub warmup_cycles: Vec<usize>,
    #[serde(default = "default_trees")]
    pub trees: usize,
    /// Rows sampled for the importance forest; all when absent.
    #[serde(default)]
    pub importance_rows: Option<usize>,
    /// Score slack within which the smaller grid point wins.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Candidate models; the built-in catalog when absent.
    #[serde(default)]
    pub catalog: Option<Vec<Candidate>>,
}

fn default_rates() -> Vec<f64> {
    vec![0.05, 0.10]
}

fn default_warmups() -> Vec<usize> {
    vec![30, 45, 60]
}

fn default_trees() -> usize {
    100
}

fn default_tolerance() -> f64 {
    0.01
}

impl Default for DesignSpec {
    fn default() -> Self {
        Self {
            exploration_rates: default_rates(),
            warmup_cycles: default_warmups(),
            trees: default_trees(),
            importance_rows: None,
            tolerance: default_tolerance(),
            catalog: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub name: String,
    pub system: SystemSpec,
    pub goals: Vec<GoalSpec>,
    pub reducer: ReducerSpec,
    pub verifier: VerifierSpec,
    #[serde(default = "default_approaches")]
    pub approaches: Vec<String>,
    #[serde(default = "default_random_runs")]
    pub random_runs: usize,
    #[serde(default = "default_cycles")]
    pub cycles: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub design: DesignSpec,
}

fn default_approaches() -> Vec<String> {
    vec!["ml2asr".into(), "reference".into(), "random".into()]
}

fn default_random_runs() -> usize {
    10
}

fn default_cycles() -> usize {
    300
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl ScenarioConfig {
    pub fn parse(text: &str, json: bool) -> anyhow::Result<Self> {
        let cfg: Self = if json {
            serde_json::from_str(text)?
        } else {
            toml::from_str(text)?
        };
        Ok(cfg)
    }

    /// Loads a file by extension; relative paths inside it resolve
    /// against the file's directory.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let json = path.extension().is_some_and(|e| e == "json");
        let mut cfg = Self::parse(&text, json)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(dir) = path.parent() {
            cfg.rebase(dir);
        }
        Ok(cfg)
    }

    fn rebase(&mut self, dir: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(x) = p {
                if x.is_relative() {
                    *x = dir.join(&*x);
                }
            }
        };
        fix(&mut self.system.config);
        fix(&mut self.system.profile);
        fix(&mut self.reducer.design);
    }

    /// `ASR_SEED` and `ASR_OUT` override the file.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(s) = std::env::var("ASR_SEED") {
            self.seed = s
                .parse()
                .map_err(|_| Error::Config(format!("ASR_SEED '{s}' is not a u64")))?;
        }
        if let Ok(o) = std::env::var("ASR_OUT") {
            self.output = PathBuf::from(o);
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} not supported, expected {SCHEMA_VERSION}",
                self.schema_version
            )));
        }
        if self.cycles == 0 {
            return Err(Error::Config("cycles must be positive".into()));
        }
        if self.approaches.is_empty() {
            return Err(Error::Config("no approaches listed".into()));
        }
        for a in &self.approaches {
            a.parse::<asr_core::mape::Approach>()?;
        }
        let has = |a: &str| self.approaches.iter().any(|x| x == a);
        if has("ml2asr") && self.cycles < self.reducer.warmup_cycles {
            return Err(Error::Config(format!(
                "cycles {} shorter than the warm-up of {}",
                self.cycles, self.reducer.warmup_cycles
            )));
        }
        if has("random") && self.random_runs == 0 {
            return Err(Error::Config("random_runs must be at least 1".into()));
        }
        if self.verifier.noise_std.len() != self.verifier.cost_ms.len() {
            return Err(Error::Config(
                "verifier noise_std and cost_ms differ in length".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schema_version = 1
name = "t"
system = { kind = "deltaiot" }
goals = [{ kind = "threshold-below", quality = "packet_loss", bound = 10.0 }]
[reducer]
exploration_rate = 0.05
warmup_cycles = 2
granularity = 3
[verifier]
noise_std = [0.0, 0.0, 0.0]
cost_ms = [1.0, 1.0, 1.0]
"#;

    #[test]
    fn minimal_toml_with_defaults() {
        let c = ScenarioConfig::parse(MINIMAL, false).unwrap();
        c.validate().unwrap();
        assert_eq!(c.cycles, 300);
        assert_eq!(c.random_runs, 10);
        assert_eq!(c.reducer.calibration_cycles, 5);
        let names = vec!["packet_loss".to_string(), "latency".into()];
        let gs = resolve_goals(&c.goals, &names).unwrap();
        assert_eq!(gs.thresholds, vec![Goal::below(0, 10.0)]);
    }

    #[test]
    fn bad_inputs_are_config_errors() {
        let names = vec!["a".to_string()];
        let g = GoalSpec {
            kind: "setpoint".into(),
            quality: QualityRef::Index(0),
            bound: None,
            target: Some(1.0),
            margin: None,
        };
        assert!(g.resolve(&names).unwrap_err().is_config());
        let g = GoalSpec {
            kind: "threshold-below".into(),
            quality: QualityRef::Name("b".into()),
            bound: Some(1.0),
            target: None,
            margin: None,
        };
        assert!(g.resolve(&names).unwrap_err().is_config());
        let mut c = ScenarioConfig::parse(MINIMAL, false).unwrap();
        c.schema_version = 7;
        assert!(c.validate().unwrap_err().is_config());
        c.schema_version = 1;
        c.cycles = 1;
        assert!(c.validate().unwrap_err().is_config());
    }
}
