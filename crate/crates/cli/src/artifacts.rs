//! CSV and JSON artifacts with pinned column layouts.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use asr_core::domain::QualityVector;
use asr_core::goals::GoalSet;
use asr_core::mape::{CycleRecord, Mode};
use asr_core::{Error, Result};

use crate::summary::Summary;

pub const CYCLES_SUFFIX: &str = ".cycles.csv";

pub fn cycles_header(quality_names: &[String], goal_labels: &[String]) -> Vec<String> {
    let mut h: Vec<String> = [
        "cycle",
        "approach",
        "seed",
        "mode",
        "n_total",
        "n_filtered",
        "n_explored",
        "n_verified",
        "chosen_id",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    h.extend(quality_names.iter().map(|q| format!("q_{q}")));
    h.extend(quality_names.iter().map(|q| format!("q_o_{q}")));
    h.extend(["t_total_sim_ms", "t_reduced_sim_ms", "t_learn_real_ms"].map(String::from));
    h.extend(goal_labels.iter().map(|g| format!("sat_{g}")));
    h
}

pub fn goal_labels(goals: &GoalSet, quality_names: &[String]) -> Vec<String> {
    goals.pointwise().map(|g| g.label(quality_names)).collect()
}

fn num(x: f64) -> String {
    format!("{x}")
}

pub fn write_cycles<W: Write>(
    w: W,
    records: &[CycleRecord],
    quality_names: &[String],
    goal_labels: &[String],
) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(cycles_header(quality_names, goal_labels))?;
    for r in records {
        let mut row = vec![
            r.cycle.to_string(),
            r.approach.clone(),
            r.seed.to_string(),
            r.mode.as_str().to_string(),
            r.n_total.to_string(),
            r.n_filtered.to_string(),
            r.n_explored.to_string(),
            r.n_verified.to_string(),
            r.chosen_id.to_string(),
        ];
        row.extend(r.realized.iter().map(|&x| num(x)));
        match &r.reference {
            Some(q) => row.extend(q.iter().map(|&x| num(x))),
            None => row.extend(quality_names.iter().map(|_| String::new())),
        }
        row.extend([
            num(r.t_total_sim_ms),
            num(r.t_reduced_sim_ms),
            num(r.t_learn_real_ms),
        ]);
        row.extend(r.satisfied.iter().map(|&s| u8::from(s).to_string()));
        wr.write_record(&row)?;
    }
    wr.flush().map_err(|e| Error::io("cycles csv", e))?;
    Ok(())
}

fn parse<T: std::str::FromStr>(s: &str, col: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Contract(format!("column '{col}': cannot parse '{s}'")))
}

fn parse_mode(s: &str) -> Result<Mode> {
    Ok(match s {
        "training" => Mode::Training,
        "testing" => Mode::Testing,
        "exhaustive" => Mode::Exhaustive,
        "random" => Mode::Random,
        _ => return Err(Error::Contract(format!("unknown mode '{s}'"))),
    })
}

/// Reads a cycles CSV back. Quality and goal columns are recognised by
/// their prefixes; flags are not stored and come back empty.
pub fn read_cycles<R: Read>(r: R) -> Result<(Vec<String>, Vec<CycleRecord>)> {
    let mut rd = csv::Reader::from_reader(r);
    let header: Vec<String> = rd.headers()?.iter().map(String::from).collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Contract(format!("cycles csv lacks column '{name}'")))
    };
    let t_total = col("t_total_sim_ms")?;
    let qo: Vec<usize> = (0..header.len())
        .filter(|&i| header[i].starts_with("q_o_"))
        .collect();
    let q: Vec<usize> = (col("chosen_id")? + 1..t_total)
        .filter(|i| !qo.contains(i))
        .collect();
    let names: Vec<String> = q
        .iter()
        .map(|&i| header[i]["q_".len()..].to_string())
        .collect();
    let sat: Vec<usize> = (0..header.len())
        .filter(|&i| header[i].starts_with("sat_"))
        .collect();
    let fixed: Vec<usize> = [
        "cycle",
        "approach",
        "seed",
        "mode",
        "n_total",
        "n_filtered",
        "n_explored",
        "n_verified",
        "chosen_id",
    ]
    .iter()
    .map(|c| col(c))
    .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for row in rd.records() {
        let row = row?;
        let f = |k: usize| &row[fixed[k]];
        let qs = |cols: &[usize]| -> Result<Vec<f64>> {
            cols.iter().map(|&i| parse(&row[i], &header[i])).collect()
        };
        let reference = if qo.iter().all(|&i| !row[i].is_empty()) && !qo.is_empty() {
            Some(QualityVector(qs(&qo)?))
        } else {
            None
        };
        out.push(CycleRecord {
            cycle: parse(f(0), "cycle")?,
            approach: f(1).to_string(),
            seed: parse(f(2), "seed")?,
            mode: parse_mode(f(3))?,
            n_total: parse(f(4), "n_total")?,
            n_filtered: parse(f(5), "n_filtered")?,
            n_explored: parse(f(6), "n_explored")?,
            n_verified: parse(f(7), "n_verified")?,
            chosen_id: parse(f(8), "chosen_id")?,
            realized: QualityVector(qs(&q)?),
            reference,
            t_total_sim_ms: parse(&row[t_total], "t_total_sim_ms")?,
            t_reduced_sim_ms: parse(&row[col("t_reduced_sim_ms")?], "t_reduced_sim_ms")?,
            t_learn_real_ms: parse(&row[col("t_learn_real_ms")?], "t_learn_real_ms")?,
            satisfied: sat
                .iter()
                .map(|&i| Ok(parse::<u8>(&row[i], &header[i])? == 1))
                .collect::<Result<_>>()?,
            flags: Vec::new(),
        });
    }
    Ok((names, out))
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(d) = path.parent() {
        std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

pub fn cycles_path(out: &Path, run_id: &str) -> PathBuf {
    out.join(format!("{run_id}{CYCLES_SUFFIX}"))
}

pub fn summary_header(quality_names: &[String]) -> Vec<String> {
    let mut h: Vec<String> = [
        "run",
        "approach",
        "seed",
        "n_cycles",
        "aasr",
        "aasr_all_cycles",
        "overhead",
        "overhead_max",
        "time_saved",
        "mean_verified",
        "mean_total",
        "violation_rate",
        "reference_violation_rate",
        "cold_cycles",
        "fallback_cycles",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    h.extend(quality_names.iter().map(|q| format!("up_{q}")));
    h.extend(quality_names.iter().map(|q| format!("mean_{q}")));
    h
}

pub fn write_summary_csv<W: Write>(w: W, s: &Summary) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(summary_header(&s.quality_names))?;
    let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
    for r in &s.runs {
        let q = &r.quant;
        let mut row = vec![
            r.run.clone(),
            r.approach.clone(),
            r.seed.to_string(),
            q.n_cycles.to_string(),
            num(q.aasr),
            num(q.aasr_all_cycles),
            num(q.overhead),
            num(r.overhead_max),
            num(q.time_saved),
            num(q.mean_verified),
            num(q.mean_total),
            num(r.violation_rate),
            opt(r.reference_violation_rate),
            r.cold_cycles.to_string(),
            r.fallback_cycles.to_string(),
        ];
        match &q.utility_penalty {
            Some(u) => row.extend(u.iter().map(|&x| num(x))),
            None => row.extend(s.quality_names.iter().map(|_| String::new())),
        }
        row.extend(r.mean_quality.iter().map(|&x| num(x)));
        wr.write_record(&row)?;
    }
    wr.flush().map_err(|e| Error::io("summary csv", e))?;
    Ok(())
}

/// Writes `summary.csv` and `summary.json` into `out`.
pub fn write_summary(out: &Path, s: &Summary) -> Result<()> {
    let p = out.join("summary.csv");
    write_summary_csv(create(&p)?, s)?;
    let p = out.join("summary.json");
    let mut f = create(&p)?;
    serde_json::to_writer_pretty(&mut f, s)?;
    f.flush().map_err(|e| Error::io(&p, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cycles_round_trip() {
        let names = vec!["a".to_string(), "b".into()];
        let labels = vec!["a_lt_1".to_string()];
        let recs = vec![
            CycleRecord {
                cycle: 0,
                approach: "ml2asr".into(),
                seed: 3,
                mode: Mode::Training,
                n_total: 4,
                n_filtered: 4,
                n_verified: 4,
                chosen_id: 1,
                realized: QualityVector(vec![0.5, 2.0]),
                reference: None,
                t_total_sim_ms: 8.0,
                t_reduced_sim_ms: 8.0,
                t_learn_real_ms: 0.25,
                satisfied: vec![true],
                ..CycleRecord::default()
            },
            CycleRecord {
                cycle: 1,
                approach: "ml2asr".into(),
                mode: Mode::Testing,
                realized: QualityVector(vec![1.5, 0.1]),
                reference: Some(QualityVector(vec![0.2, 0.3])),
                satisfied: vec![false],
                ..CycleRecord::default()
            },
        ];
        let mut buf = Vec::new();
        write_cycles(&mut buf, &recs, &names, &labels).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(
            "cycle,approach,seed,mode,n_total,n_filtered,n_explored,n_verified,chosen_id,q_a,q_b,q_o_a,q_o_b,t_total_sim_ms,t_reduced_sim_ms,t_learn_real_ms,sat_a_lt_1\n"
        ));
        let (n, back) = read_cycles(&buf[..]).unwrap();
        assert_eq!(n, names);
        assert_eq!(back, recs);
    }
}
