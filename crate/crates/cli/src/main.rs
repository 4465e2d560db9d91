//! `otfs-sim`: command-line front end for the OTFS channel-estimation
//! experiment harness.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context as _;
use clap::{Parser, Subcommand};
use otfs_core::harness::{
    render_csv, run_experiment_with_threads, write_outputs, ExperimentConfig, Mode,
};

/// Exit status for unreadable or invalid configuration.
const EXIT_CONFIG: u8 = 2;
/// Exit status for failures while running or writing results.
const EXIT_RUN: u8 = 1;

#[derive(Debug, Parser)]
#[command(
    name = "otfs-sim",
    version,
    about = "OTFS fractional delay-Doppler channel estimation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        /// Experiment configuration file.
        #[arg(short, long)]
        config: PathBuf,
        /// Output directory (overrides `output` in the config).
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Master seed (overrides `seed`).
        #[arg(long)]
        seed: Option<u64>,
        /// Trials per sweep point (overrides `trials`).
        #[arg(long)]
        trials: Option<usize>,
        /// Experiment mode (overrides `mode`): nmse, param-mse, ser or oracle-check.
        #[arg(long)]
        mode: Option<Mode>,
        /// Disable the subtraction of estimated paths.
        #[arg(long)]
        no_ipi: bool,
        /// Worker threads (defaults to all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Print the reference configuration as TOML.
    PrintDefaultConfig {
        #[arg(long, default_value = "nmse")]
        mode: Mode,
    },
}

enum Failure {
    Config(anyhow::Error),
    Run(anyhow::Error),
}

fn load_config(
    path: &PathBuf,
    seed: Option<u64>,
    trials: Option<usize>,
    mode: Option<Mode>,
    no_ipi: bool,
) -> anyhow::Result<ExperimentConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut cfg =
        ExperimentConfig::from_toml(&text).with_context(|| format!("in {}", path.display()))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(t) = trials {
        cfg.trials = t;
    }
    if let Some(m) = mode {
        cfg.mode = m;
    }
    if no_ipi {
        cfg.ipi_elimination = false;
    }
    cfg.validate().context("after command-line overrides")?;
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::PrintDefaultConfig { mode } => {
            print!("{}", ExperimentConfig::default_for(mode).to_toml());
            Ok(())
        }
        Command::Run {
            config,
            output,
            seed,
            trials,
            mode,
            no_ipi,
            threads,
        } => {
            let cfg = load_config(&config, seed, trials, mode, no_ipi).map_err(Failure::Config)?;
            if threads == Some(0) {
                return Err(Failure::Config(anyhow::anyhow!(
                    "--threads must be at least 1"
                )));
            }
            let dir = output.unwrap_or_else(|| PathBuf::from(&cfg.output));
            log::info!(
                "running {} with {} trials at {} sweep points",
                cfg.mode,
                cfg.trials,
                cfg.sweep_db.len()
            );
            let result =
                run_experiment_with_threads(&cfg, threads).map_err(|e| Failure::Run(e.into()))?;
            write_outputs(&result, &dir)
                .with_context(|| format!("writing results to {}", dir.display()))
                .map_err(Failure::Run)?;
            print!("{}", render_csv(&result));
            let failed: usize = result.rows.iter().map(|r| r.trials_failed).sum();
            if failed > 0 {
                log::warn!("{failed} trials failed");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_RUN)
        }
    }
}
