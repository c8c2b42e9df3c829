//! `ssp`: ingest profile data, generate synthetic oceans, train and run
//! depth-layered forecast banks, and evaluate them.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Experiment;
use config::{merge, Overrides, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "ssp", version, about = "Sound speed profile forecasting with per-depth LSTMs")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Flat `key = value` configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate a profile CSV, summarize it and write a canonical copy.
    Ingest { csv: PathBuf },
    /// Write a synthetic monthly profile series as CSV.
    Synth,
    /// Train a model bank and write its checkpoint.
    Train,
    /// Roll a checkpoint forward `k` months.
    Predict,
    /// Run an experiment and write its CSV and SVG reports.
    Evaluate {
        #[arg(value_enum)]
        experiment: Experiment,
        /// Exit with status 4 if the experiment's assertions fail.
        #[arg(long)]
        assert: bool,
    },
}

const EXIT_VALIDATION: u8 = 2;
const EXIT_DIVERGENCE: u8 = 3;
const EXIT_ASSERTION: u8 = 4;

fn fail(e: ssp_hlstm::Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(if e.is_divergence() { EXIT_DIVERGENCE } else { EXIT_VALIDATION })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();

    let (kv, user) = match merge(cli.config.as_deref(), &cli.overrides.to_kv()) {
        Ok(v) => v,
        Err(e) => return fail(e),
    };
    let cfg = match RunConfig::from_kv(&kv) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };

    let result = match &cli.command {
        Command::Ingest { csv } => commands::ingest(csv, &cfg),
        Command::Synth => commands::synth(&cfg),
        Command::Train => commands::train(&cfg),
        Command::Predict => commands::predict(&cfg, user.contains("schedule")),
        Command::Evaluate { experiment, assert } => match commands::evaluate(&cfg, *experiment, *assert) {
            Ok(v) if v.is_empty() => Ok(()),
            Ok(v) => {
                eprintln!("{} assertion(s) failed", v.len());
                return ExitCode::from(EXIT_ASSERTION);
            }
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}
