//! `simulate`: run a market config several times and write CSV results.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 I/O error.
//! Log verbosity is read from `DATAMARKET_LOG` (e.g. `DATAMARKET_LOG=info`).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use datamarket::config::load_config;
use datamarket::experiment::{emit_csv, run_experiment, ExperimentError};
use log::{error, info};

#[derive(Debug, Parser)]
#[command(name = "simulate", version, about = "Run a data-market simulation experiment")]
struct Cli {
    /// Market configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Number of independent runs.
    #[arg(long, default_value_t = 1)]
    runs: u64,
    /// Base seed; defaults to the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for runs.csv, aggregate.csv and ledger.csv.
    #[arg(long)]
    out: PathBuf,
    /// Override the config's horizon.
    #[arg(long)]
    horizon: Option<u64>,
    /// Keep accrued valuation out of buyer budgets.
    #[arg(long)]
    no_accrual: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DATAMARKET_LOG", "warn")).init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };

    let mut config = match load_config(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Some(h) = cli.horizon {
        config.horizon = h;
    }
    if cli.no_accrual {
        config.accrual_to_budget = false;
    }
    let seed = cli.seed.unwrap_or(config.seed);
    info!(
        "running {} run(s), horizon {}, base seed {seed}",
        cli.runs, config.horizon
    );

    let result = run_experiment(&config, cli.runs, seed).and_then(|exp| emit_csv(&exp, &cli.out));
    match result {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                ExperimentError::Io { .. } => ExitCode::from(2),
                ExperimentError::Config(_) | ExperimentError::NoRuns => ExitCode::from(1),
            }
        }
    }
}
