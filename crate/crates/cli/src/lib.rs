//! Command-line pipelines for simulation, estimation and limit-theorem checks.
//!
//! Every subcommand reads a TOML [`config::RunConfig`], runs on a worker pool
//! of the requested size and writes CSV (bulk data) and JSON (reports) into
//! the output directory. Results depend only on the config and the seed,
//! never on the worker count.
//!
//! Exit codes: 0 pass, 1 config or usage error, 2 statistical failure,
//! 3 I/O failure.

pub mod commands;
pub mod config;
pub mod io;
pub mod pipeline;
pub mod verify;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use thiserror::Error;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_STATISTICAL: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("statistical failure: {0}")]
    Statistical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Statistical(_) => EXIT_STATISTICAL,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "nlhawkes", version, about = "Nonlinear Hawkes simulation and limit-theorem verification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate stationary replications; writes events.csv and compensator.csv.
    Simulate(CommonArgs),
    /// Estimate μ and σ²; writes counts.csv and stats.json.
    Estimate(CommonArgs),
    /// Rescaled and compensated paths with Gaussian-limit tests; writes fclt.csv and report.json.
    Fclt(CommonArgs),
    /// Strassen paths against a calibrated band; writes lil.csv and lil_report.json.
    Lil(CommonArgs),
    /// Full acceptance pipeline for a canned scenario; writes verify.json.
    Verify(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; falls back to `output` in the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, env = "NLHAWKES_SEED")]
    pub seed: Option<u64>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, env = "NLHAWKES_WORKERS")]
    pub workers: Option<usize>,
}

/// Parses arguments and runs the command, returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    match commands::run(&cli.command) {
        Ok(true) => EXIT_PASS,
        Ok(false) => EXIT_STATISTICAL,
        Err(e) => {
            eprintln!("nlhawkes: {e}");
            e.exit_code()
        }
    }
}
