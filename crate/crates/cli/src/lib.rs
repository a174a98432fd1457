//! Command-line driver: `qgc rates | simulate | verify --config <file>`.
//!
//! Exit codes: 0 success, 1 other failure, 2 config error, 3 unsupported
//! scheme/group combination, 4 enumeration budget exceeded, 5 failed exact
//! verification.

pub mod config;
pub mod error;
pub mod output;
pub mod rates;
pub mod simulate;
pub mod verify;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{Overrides, RunConfig};
use crate::error::{CliError, CliResult};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "QGC_THREADS";

#[derive(Debug, Parser)]
#[command(name = "qgc", version, about = "Quasi group code rates, simulations and checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form symmetric rates for every configured scheme.
    Rates(CommonArgs),
    /// Monte-Carlo encode/decode runs.
    Simulate(CommonArgs),
    /// Exact identity and bound checks.
    Verify(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the simulation, optimizer and sumset seeds.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides output.path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the table1 δ and disables any sweep.
    #[arg(long)]
    pub delta: Option<f64>,
}

impl CommonArgs {
    pub fn load(&self) -> CliResult<RunConfig> {
        let mut cfg = RunConfig::load(&self.config)?;
        cfg.apply(&Overrides {
            seed: self.seed,
            out: self.out.clone(),
            delta: self.delta,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Sizes the global rayon pool from `QGC_THREADS`, if set.
pub fn configure_threads() -> CliResult<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got '{value}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Other(e.to_string()))
}

/// Runs one command; the summary goes to stdout when data goes to a file.
pub fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Rates(args) => {
            let cfg = args.load()?;
            let table = rates::compute(&cfg)?;
            output::emit(&table, &cfg.output)?;
            if cfg.output.path.is_some() {
                print!("{}", rates::summary(&table));
            }
        }
        Command::Simulate(args) => {
            let cfg = args.load()?;
            let table = simulate::compute(&cfg)?;
            output::emit(&table, &cfg.output)?;
            if cfg.output.path.is_some() {
                print!("{}", simulate::summary(&table));
            }
        }
        Command::Verify(args) => {
            let cfg = args.load()?;
            let report = verify::compute(&cfg)?;
            output::emit(&report, &cfg.output)?;
            if cfg.output.path.is_some() {
                print!("{}", verify::summary(&report));
            }
            if !report.passed() {
                return Err(CliError::Verify(report.failures.join("; ")));
            }
        }
    }
    Ok(())
}
