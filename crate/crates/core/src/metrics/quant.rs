use serde::{Deserialize, Serialize};

use crate::mape::{CycleRecord, Mode};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuantOptions {
    /// Count warm-up (training) cycles in AASR and the time metrics.
    pub include_warmup: bool,
}

/// Benchmark-level summary of one cycle stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantReport {
    /// Mean |q_o - q_c| per quality, `None` without reference qualities.
    pub utility_penalty: Option<Vec<f64>>,
    pub aasr: f64,
    /// AASR over every cycle, warm-up included.
    pub aasr_all_cycles: f64,
    pub overhead: f64,
    pub time_saved: f64,
    pub mean_verified: f64,
    pub mean_total: f64,
    /// Cycles that entered the averages.
    pub n_cycles: usize,
    pub flags: Vec<String>,
}

fn aasr(records: &[&CycleRecord]) -> f64 {
    let n = records.len() as f64;
    let sel = records.iter().map(|r| r.n_verified as f64).sum::<f64>() / n;
    let tot = records.iter().map(|r| r.n_total as f64).sum::<f64>() / n;
    if tot == 0.0 {
        0.0
    } else {
        (1.0 - sel / tot) * 100.0
    }
}

/// Utility penalty, AASR, learning overhead and overall time saved.
///
/// Reference qualities come from `reference` when given (aligned by cycle),
/// otherwise from each record's co-executed `q_o`.
pub fn quantitative_metrics(
    records: &[CycleRecord],
    reference: Option<&[CycleRecord]>,
    opts: QuantOptions,
) -> Result<QuantReport> {
    if records.is_empty() {
        return Err(Error::Domain("no cycle records".into()));
    }
    if let Some(r) = reference {
        if r.len() != records.len() || r.iter().zip(records).any(|(a, b)| a.cycle != b.cycle) {
            return Err(Error::Contract(
                "reference stream is not aligned by cycle".into(),
            ));
        }
    }
    let mut flags = Vec::new();
    let chosen: Vec<usize> = (0..records.len())
        .filter(|&i| opts.include_warmup || records[i].mode != Mode::Training)
        .collect();
    if chosen.is_empty() {
        return Err(Error::Domain(
            "no cycles left after excluding warm-up".into(),
        ));
    }
    let sel: Vec<&CycleRecord> = chosen.iter().map(|&i| &records[i]).collect();

    let mut utility = None;
    let nq = sel[0].realized.len();
    let mut sums = vec![0.0; nq];
    let mut have_all = true;
    for &i in &chosen {
        let qc = &records[i].realized;
        let qo = match reference {
            Some(r) => Some(&r[i].realized),
            None => records[i].reference.as_ref(),
        };
        match qo {
            Some(qo) if qo.len() == nq && qc.len() == nq => {
                for j in 0..nq {
                    sums[j] += (qo[j] - qc[j]).abs();
                }
            }
            _ => have_all = false,
        }
    }
    if have_all {
        utility = Some(sums.iter().map(|s| s / chosen.len() as f64).collect());
    } else {
        flags.push("utility penalty: reference qualities missing".to_string());
    }

    let (mut over, mut n_over) = (0.0, 0usize);
    let (mut saved, mut n_saved) = (0.0, 0usize);
    for r in &sel {
        let denom = r.t_learn_real_ms + r.t_reduced_sim_ms;
        if denom > 0.0 {
            over += r.t_learn_real_ms / denom * 100.0;
            n_over += 1;
        }
        if r.t_total_sim_ms > 0.0 {
            saved += (1.0 - (r.t_reduced_sim_ms + r.t_learn_real_ms) / r.t_total_sim_ms) * 100.0;
            n_saved += 1;
        }
    }
    if n_over < sel.len() {
        flags.push("overhead: cycles with zero time excluded".to_string());
    }
    if n_saved < sel.len() {
        flags.push("time saved: undefined for cycles with zero total time".to_string());
    }
    let all: Vec<&CycleRecord> = records.iter().collect();
    let n = sel.len() as f64;
    Ok(QuantReport {
        utility_penalty: utility,
        aasr: aasr(&sel),
        aasr_all_cycles: aasr(&all),
        overhead: if n_over > 0 {
            over / n_over as f64
        } else {
            f64::NAN
        },
        time_saved: if n_saved > 0 {
            saved / n_saved as f64
        } else {
            f64::NAN
        },
        mean_verified: sel.iter().map(|r| r.n_verified as f64).sum::<f64>() / n,
        mean_total: sel.iter().map(|r| r.n_total as f64).sum::<f64>() / n,
        n_cycles: sel.len(),
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::QualityVector;

    fn rec(cycle: usize, mode: Mode, verified: usize, total: usize) -> CycleRecord {
        CycleRecord {
            cycle,
            mode,
            n_total: total,
            n_verified: verified,
            n_filtered: verified,
            realized: QualityVector(vec![1.0, 2.0]),
            reference: Some(QualityVector(vec![1.0, 2.0])),
            t_total_sim_ms: total as f64,
            t_reduced_sim_ms: verified as f64,
            ..CycleRecord::default()
        }
    }

    #[test]
    fn aasr_example() {
        let r = quantitative_metrics(
            &[rec(0, Mode::Testing, 10, 216)],
            None,
            QuantOptions::default(),
        )
        .unwrap();
        assert!((r.aasr - 95.370_370_370).abs() < 1e-6);
        assert_eq!(r.utility_penalty, Some(vec![0.0, 0.0]));
    }

    #[test]
    fn time_example() {
        let mut c = rec(0, Mode::Testing, 1, 1);
        c.t_learn_real_ms = 1.0;
        c.t_reduced_sim_ms = 99.0;
        c.t_total_sim_ms = 1000.0;
        let r = quantitative_metrics(&[c], None, QuantOptions::default()).unwrap();
        assert!((r.overhead - 1.0).abs() < 1e-12);
        assert!((r.time_saved - 90.0).abs() < 1e-12);
    }

    #[test]
    fn aasr_bounds() {
        let r = quantitative_metrics(
            &[rec(0, Mode::Exhaustive, 216, 216)],
            None,
            QuantOptions::default(),
        )
        .unwrap();
        assert_eq!(r.aasr, 0.0);
        let r = quantitative_metrics(
            &[rec(0, Mode::Testing, 0, 216)],
            None,
            QuantOptions::default(),
        )
        .unwrap();
        assert_eq!(r.aasr, 100.0);
    }

    #[test]
    fn warmup_toggle() {
        let recs = vec![
            rec(0, Mode::Training, 216, 216),
            rec(1, Mode::Testing, 21, 216),
        ];
        let excl = quantitative_metrics(&recs, None, QuantOptions::default()).unwrap();
        let incl = quantitative_metrics(
            &recs,
            None,
            QuantOptions {
                include_warmup: true,
            },
        )
        .unwrap();
        assert!((excl.aasr - (1.0 - 21.0 / 216.0) * 100.0).abs() < 1e-9);
        assert_eq!(incl.aasr, excl.aasr_all_cycles);
        assert!(incl.aasr < excl.aasr);
    }

    #[test]
    fn utility_penalty_uses_absolute_differences() {
        let mut a = rec(0, Mode::Testing, 1, 2);
        a.realized = QualityVector(vec![3.0, 0.0]);
        let mut b = rec(1, Mode::Testing, 1, 2);
        b.realized = QualityVector(vec![-1.0, 2.0]);
        let r = quantitative_metrics(&[a, b], None, QuantOptions::default()).unwrap();
        assert_eq!(r.utility_penalty, Some(vec![2.0, 1.0]));
    }

    #[test]
    fn overhead_partition_is_exact() {
        for (o, r) in [(0.3, 99.7), (1e-3, 2100.0), (5.0, 0.5)] {
            let a: f64 = o / (o + r);
            let b: f64 = r / (o + r);
            assert!((a + b - 1.0).abs() <= f64::EPSILON);
        }
    }
}
