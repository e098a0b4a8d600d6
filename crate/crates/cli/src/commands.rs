//! The four subcommands as library functions.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use asr_core::features::LabeledDataset;
use asr_core::{Error, Result};

use crate::artifacts::{self, create};
use crate::config::ScenarioConfig;
use crate::design::{collect, default_catalog, design, DesignOutcome};
use crate::scenario::{RunResult, Scenario};
use crate::summary::{summarize, Summary};

pub const BUILTIN: [(&str, &str); 4] = [
    ("deltaiot-s1", include_str!("../scenarios/deltaiot-s1.toml")),
    ("deltaiot-s2", include_str!("../scenarios/deltaiot-s2.toml")),
    ("sbs-s1", include_str!("../scenarios/sbs-s1.toml")),
    ("sbs-s2", include_str!("../scenarios/sbs-s2.toml")),
];

/// Command-line values that take precedence over the scenario file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub approaches: Option<Vec<String>>,
    pub granularity: Option<usize>,
    pub cycles: Option<usize>,
}

/// Loads a scenario from a file or by built-in name. Precedence: flags,
/// then `ASR_SEED`/`ASR_OUT`, then the file.
pub fn load_scenario(config: &str, ov: &Overrides) -> anyhow::Result<Scenario> {
    let path = Path::new(config);
    let mut cfg = if path.exists() {
        ScenarioConfig::load(path)?
    } else if let Some((_, text)) = BUILTIN.iter().find(|(n, _)| *n == config) {
        ScenarioConfig::parse(text, false).with_context(|| format!("built-in scenario {config}"))?
    } else {
        let names: Vec<&str> = BUILTIN.iter().map(|(n, _)| *n).collect();
        return Err(Error::Config(format!(
            "no scenario file '{config}' and no built-in of that name ({names:?})"
        ))
        .into());
    };
    cfg.apply_env()?;
    if let Some(s) = ov.seed {
        cfg.seed = s;
    }
    if let Some(o) = &ov.out {
        cfg.output = o.clone();
    }
    if let Some(a) = &ov.approaches {
        cfg.approaches = a.clone();
    }
    if let Some(g) = ov.granularity {
        cfg.reducer.granularity = g;
    }
    if let Some(c) = ov.cycles {
        cfg.cycles = c;
    }
    Ok(Scenario::new(cfg)?)
}

pub fn dataset_path(out: &Path) -> PathBuf {
    out.join("dataset.csv")
}

pub fn cmd_collect(sc: &Scenario, cycles: usize) -> Result<(PathBuf, LabeledDataset)> {
    let ds = collect(sc, cycles)?;
    let p = dataset_path(&sc.cfg.output);
    if let Some(d) = p.parent() {
        std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    ds.save(&p)?;
    Ok((p, ds))
}

/// Writes `design.json`, `evaluation.csv`, `importance.csv` and `grid.csv`.
pub fn cmd_design(sc: &Scenario, dataset: &Path) -> Result<DesignOutcome> {
    let ds = LabeledDataset::load(dataset)?;
    let catalog = sc
        .cfg
        .design
        .catalog
        .clone()
        .unwrap_or_else(default_catalog);
    let o = design(sc, &ds, &catalog)?;
    let out = &sc.cfg.output;

    let p = out.join("design.json");
    let mut f = create(&p)?;
    serde_json::to_writer_pretty(&mut f, &o.reducer)?;
    f.flush().map_err(|e| Error::io(&p, e))?;

    o.report.write_csv(create(&out.join("evaluation.csv"))?)?;

    let mut w = csv::Writer::from_writer(create(&out.join("importance.csv"))?);
    for r in &o.importance {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("importance.csv", e))?;

    let mut w = csv::Writer::from_writer(create(&out.join("grid.csv"))?);
    for r in &o.grid {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("grid.csv", e))?;
    Ok(o)
}

pub struct RunOutput {
    pub runs: Vec<RunResult>,
    pub summary: Summary,
}

/// Runs every approach, then writes one cycles CSV per run plus the
/// summaries. On failure an `error.txt` marks the directory as partial.
pub fn cmd_run(sc: &Scenario) -> Result<RunOutput> {
    let out = sc.cfg.output.clone();
    let res = run_and_write(sc, &out);
    if let Err(e) = &res {
        if std::fs::create_dir_all(&out).is_ok() {
            let _ = std::fs::write(out.join("error.txt"), format!("{e}\n"));
        }
    }
    res
}

fn run_and_write(sc: &Scenario, out: &Path) -> Result<RunOutput> {
    let runs = sc.run_all()?;
    let labels = artifacts::goal_labels(&sc.goals, &sc.quality_names);
    for r in &runs {
        let p = artifacts::cycles_path(out, &r.spec.id);
        artifacts::write_cycles(create(&p)?, &r.records, &sc.quality_names, &labels)?;
    }
    let summary = summarize(
        &sc.cfg.name,
        &sc.quality_names,
        &sc.goals,
        &runs,
        sc.evaluation_start(),
    )?;
    artifacts::write_summary(out, &summary)?;
    Ok(RunOutput { runs, summary })
}

/// Recomputes the summaries from the cycles CSVs in `dir`.
pub fn cmd_summarize(sc: &Scenario, dir: &Path) -> Result<Summary> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.to_string_lossy().ends_with(artifacts::CYCLES_SUFFIX))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Config(format!(
            "no cycles files in {}",
            dir.display()
        )));
    }
    let mut runs = Vec::new();
    for p in files {
        let f = std::fs::File::open(&p).map_err(|e| Error::io(&p, e))?;
        let (_, records) = artifacts::read_cycles(std::io::BufReader::new(f))?;
        let name = p.file_name().expect("file").to_string_lossy();
        let id = name.trim_end_matches(artifacts::CYCLES_SUFFIX).to_string();
        let first = records
            .first()
            .ok_or_else(|| Error::Contract(format!("{} is empty", p.display())))?;
        let spec = crate::scenario::RunSpec {
            id,
            approach: first.approach.parse()?,
            seed: first.seed,
        };
        runs.push(RunResult { spec, records });
    }
    let summary = summarize(
        &sc.cfg.name,
        &sc.quality_names,
        &sc.goals,
        &runs,
        sc.evaluation_start(),
    )?;
    artifacts::write_summary(dir, &summary)?;
    Ok(summary)
}
