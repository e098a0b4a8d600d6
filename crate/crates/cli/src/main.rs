use std::path::PathBuf;
use std::process::ExitCode;

use asr_cli::{cmd_collect, cmd_design, cmd_run, cmd_summarize, load_scenario, Overrides};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "asr",
    version,
    about = "Adaptation space reduction for self-adaptive systems"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Scenario file, or one of the built-in names (deltaiot-s1, deltaiot-s2, sbs-s1, sbs-s2).
    #[arg(long)]
    config: String,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated approaches: ml2asr, reference, random.
    #[arg(long, value_delimiter = ',')]
    approach: Option<Vec<String>>,
    #[arg(long)]
    granularity: Option<usize>,
    #[arg(long)]
    cycles: Option<usize>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            out: self.out.clone(),
            approaches: self.approach.clone(),
            granularity: self.granularity,
            cycles: self.cycles,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Verify every option for a number of cycles and write dataset.csv.
    Collect(Common),
    /// Select features, models and reducer parameters from a dataset.
    Design {
        #[command(flatten)]
        common: Common,
        /// Dataset written by `collect`; defaults to <out>/dataset.csv.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Run the configured approaches and write cycles and summary files.
    Run(Common),
    /// Recompute summaries from existing cycles files.
    Summarize {
        #[command(flatten)]
        common: Common,
        /// Directory holding the cycles files; defaults to the output directory.
        #[arg(long)]
        dir: Option<PathBuf>,
    },
}

fn exec(cli: Cli) -> anyhow::Result<()> {
    match cli.cmd {
        Cmd::Collect(c) => {
            let sc = load_scenario(&c.config, &c.overrides())?;
            let (p, ds) = cmd_collect(&sc, sc.cfg.cycles)?;
            println!("{} rows -> {}", ds.len(), p.display());
        }
        Cmd::Design { common, dataset } => {
            let sc = load_scenario(&common.config, &common.overrides())?;
            let ds = dataset.unwrap_or_else(|| asr_cli::commands::dataset_path(&sc.cfg.output));
            let o = cmd_design(&sc, &ds)?;
            println!(
                "features {}/{}, e = {}, w = {}",
                o.reducer.mask.len(),
                sc.feature_names.len(),
                o.reducer.exploration_rate,
                o.reducer.warmup_cycles
            );
            for c in &o.chosen {
                println!("{c}");
            }
        }
        Cmd::Run(c) => {
            let sc = load_scenario(&c.config, &c.overrides())?;
            let out = cmd_run(&sc)?;
            print_summary(&out.summary);
            println!("-> {}", sc.cfg.output.display());
        }
        Cmd::Summarize { common, dir } => {
            let sc = load_scenario(&common.config, &common.overrides())?;
            let dir = dir.unwrap_or_else(|| sc.cfg.output.clone());
            print_summary(&cmd_summarize(&sc, &dir)?);
        }
    }
    Ok(())
}

fn print_summary(s: &asr_cli::summary::Summary) {
    println!(
        "{:<14} {:>8} {:>9} {:>9} {:>10}",
        "run", "aasr", "overhead", "violation", "verified"
    );
    for r in &s.runs {
        println!(
            "{:<14} {:>8.2} {:>9.3} {:>9.3} {:>10.1}",
            r.run, r.quant.aasr, r.quant.overhead, r.violation_rate, r.quant.mean_verified
        );
    }
    if let Some(c) = &s.comparison {
        println!(
            "{}: ml2asr {:.3} vs random {:.3}, p = {:.4} ({} cycles)",
            c.quality, c.ml2asr_mean, c.random_mean, c.wilcoxon.p_value, c.n_cycles
        );
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match exec(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let mut msg = e.to_string();
            for cause in e.chain().skip(1) {
                let c = cause.to_string();
                if !msg.ends_with(&c) {
                    msg = format!("{msg}: {c}");
                }
            }
            eprintln!("error: {msg}");
            let config = match e.downcast_ref::<asr_core::Error>() {
                Some(err) => err.is_config(),
                None => true,
            };
            ExitCode::from(if config { 2 } else { 3 })
        }
    }
}
