//! Command-line front end: run experiments against a configuration, or
//! validate documents without running anything.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use socsim::{emit_csv, load_config_file, load_experiment_file, run_experiment, SocConfig};

#[derive(Parser)]
#[command(name = "sim", about = "SoC memory-hierarchy simulator", version)]
struct Cli {
    /// Configuration document; defaults to the built-in configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Experiment document to run.
    #[arg(long)]
    experiment: Option<PathBuf>,

    /// Output directory for CSV results.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Override the experiment's PRNG seed.
    #[arg(long)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Check config (and experiment, if given) without running.
    Validate {
        /// Experiment document to check alongside the config.
        #[arg(long)]
        experiment: Option<PathBuf>,
    },
}

fn load_cfg(path: &Option<PathBuf>) -> Result<SocConfig> {
    match path {
        Some(p) => load_config_file(p).with_context(|| format!("loading config {}", p.display())),
        None => Ok(SocConfig::default()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Some(Command::Validate { experiment }) => {
            let cfg = load_cfg(&cli.config)?;
            println!("config ok");
            println!(
                "  llc: {} B ({} sets x {} ways x {} B lines)",
                cfg.llc.size_bytes(),
                cfg.llc.n_lines,
                cfg.llc.n_ways,
                cfg.llc.line_bytes()
            );
            println!(
                "  hyperram: {} MiB over {} bus(es) x {} CS, {} pins/bus ({} total)",
                cfg.hyper.total_capacity_bytes() >> 20,
                cfg.hyper.n_buses,
                cfg.hyper.n_cs,
                cfg.hyper.pins_per_bus(),
                cfg.hyper.total_pins()
            );
            if let Some(path) = experiment.or(cli.experiment) {
                load_experiment_file(&path)
                    .with_context(|| format!("loading experiment {}", path.display()))?;
                println!("experiment ok");
            }
            Ok(())
        }
        None => {
            let cfg = load_cfg(&cli.config)?;
            let Some(exp_path) = cli.experiment else {
                bail!("--experiment is required (or use the `validate` subcommand)");
            };
            let Some(out_dir) = cli.out else {
                bail!("--out is required");
            };
            let mut experiment = load_experiment_file(&exp_path)
                .with_context(|| format!("loading experiment {}", exp_path.display()))?;
            if let Some(seed) = cli.seed {
                experiment.seed = seed;
            }
            let table = run_experiment(&cfg, &experiment)?;
            let path = emit_csv(&table, &out_dir)?;
            println!("wrote {} ({} rows)", path.display(), table.rows.len());
            Ok(())
        }
    }
}
