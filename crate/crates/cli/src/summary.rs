//! Per-run and pooled benchmark summaries.

use asr_core::goals::{goalset_satisfied, GoalSet};
use asr_core::mape::{CycleRecord, Mode};
use asr_core::metrics::{
    quantitative_metrics, wilcoxon_signed_rank, QuantOptions, QuantReport, WilcoxonResult,
};
use asr_core::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::scenario::RunResult;

pub const POOLED_RANDOM: &str = "random-pooled";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run: String,
    pub approach: String,
    pub seed: u64,
    pub quant: QuantReport,
    /// Largest per-cycle learning overhead over the summarized cycles, %.
    pub overhead_max: f64,
    /// Fraction of summarized cycles whose applied option missed a
    /// threshold or setpoint goal.
    pub violation_rate: f64,
    /// Same for the reference choice, when known.
    pub reference_violation_rate: Option<f64>,
    /// Mean realized quality per quality.
    pub mean_quality: Vec<f64>,
    pub cold_cycles: usize,
    pub fallback_cycles: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub quality: String,
    pub ml2asr_mean: f64,
    /// Mean over cycles of the per-cycle mean of the random runs.
    pub random_mean: f64,
    pub n_cycles: usize,
    pub wilcoxon: WilcoxonResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenario: String,
    pub quality_names: Vec<String>,
    pub evaluation_start: usize,
    pub runs: Vec<RunSummary>,
    pub comparison: Option<Comparison>,
}

fn window(records: &[CycleRecord], start: usize) -> Vec<CycleRecord> {
    records
        .iter()
        .filter(|r| r.cycle >= start)
        .cloned()
        .collect()
}

fn summarize_records(
    run: &str,
    approach: &str,
    seed: u64,
    records: &[CycleRecord],
    goals: &GoalSet,
) -> Result<RunSummary> {
    let quant = quantitative_metrics(records, None, QuantOptions::default())?;
    let sel: Vec<&CycleRecord> = records
        .iter()
        .filter(|r| r.mode != Mode::Training)
        .collect();
    let n = sel.len().max(1) as f64;
    let overhead_max = sel
        .iter()
        .filter(|r| r.t_learn_real_ms + r.t_reduced_sim_ms > 0.0)
        .map(|r| r.t_learn_real_ms / (r.t_learn_real_ms + r.t_reduced_sim_ms) * 100.0)
        .fold(0.0, f64::max);
    let violation_rate = sel
        .iter()
        .filter(|r| r.satisfied.iter().any(|s| !s))
        .count() as f64
        / n;
    let reference_violation_rate = if sel.iter().all(|r| r.reference.is_some()) {
        let mut bad = 0usize;
        for r in &sel {
            if !goalset_satisfied(goals, r.reference.as_ref().expect("checked"))? {
                bad += 1;
            }
        }
        Some(bad as f64 / n)
    } else {
        None
    };
    let nq = sel.first().map_or(0, |r| r.realized.len());
    let mean_quality = (0..nq)
        .map(|j| sel.iter().map(|r| r.realized[j]).sum::<f64>() / n)
        .collect();
    let count =
        |f: &dyn Fn(&str) -> bool| sel.iter().filter(|r| r.flags.iter().any(|x| f(x))).count();
    Ok(RunSummary {
        run: run.into(),
        approach: approach.into(),
        seed,
        quant,
        overhead_max,
        violation_rate,
        reference_violation_rate,
        mean_quality,
        cold_cycles: count(&|x| x == "cold-model"),
        fallback_cycles: count(&|x| x.starts_with("fallback")),
    })
}

/// Learning runs are summarized over their testing cycles (they exclude
/// warm-up themselves); the baselines over cycles from `start` on.
pub fn summarize(
    scenario: &str,
    quality_names: &[String],
    goals: &GoalSet,
    runs: &[RunResult],
    start: usize,
) -> Result<Summary> {
    let mut out = Vec::new();
    let mut random: Vec<&RunResult> = Vec::new();
    for r in runs {
        let recs = if r.spec.approach.as_str() == "ml2asr" {
            r.records.clone()
        } else {
            window(&r.records, start)
        };
        out.push(summarize_records(
            &r.spec.id,
            r.spec.approach.as_str(),
            r.spec.seed,
            &recs,
            goals,
        )?);
        if r.spec.approach.as_str() == "random" {
            random.push(r);
        }
    }
    if !random.is_empty() {
        let pooled: Vec<CycleRecord> = random
            .iter()
            .flat_map(|r| window(&r.records, start))
            .collect();
        out.push(summarize_records(
            POOLED_RANDOM,
            "random",
            0,
            &pooled,
            goals,
        )?);
    }
    let comparison = match (
        runs.iter().find(|r| r.spec.approach.as_str() == "ml2asr"),
        goals.optimization,
    ) {
        (Some(ml), Some(opt)) if !random.is_empty() => {
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for rec in ml.records.iter().filter(|r| r.mode == Mode::Testing) {
                let vals: Vec<f64> = random
                    .iter()
                    .filter_map(|r| r.records.iter().find(|x| x.cycle == rec.cycle))
                    .map(|x| x.realized[opt.quality])
                    .collect();
                if vals.len() != random.len() {
                    return Err(Error::Contract(format!(
                        "random runs miss cycle {}",
                        rec.cycle
                    )));
                }
                xs.push(rec.realized[opt.quality]);
                ys.push(vals.iter().sum::<f64>() / vals.len() as f64);
            }
            if xs.is_empty() {
                None
            } else {
                let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
                Some(Comparison {
                    quality: quality_names[opt.quality].clone(),
                    ml2asr_mean: mean(&xs),
                    random_mean: mean(&ys),
                    n_cycles: xs.len(),
                    wilcoxon: wilcoxon_signed_rank(&xs, &ys, 0.05)?,
                })
            }
        }
        _ => None,
    };
    Ok(Summary {
        scenario: scenario.into(),
        quality_names: quality_names.to_vec(),
        evaluation_start: start,
        runs: out,
        comparison,
    })
}

impl Summary {
    pub fn run(&self, id: &str) -> Option<&RunSummary> {
        self.runs.iter().find(|r| r.run == id)
    }
}
