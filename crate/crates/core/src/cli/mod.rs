//! Command-line front end: configuration, CSV formats and subcommands.
//!
//! Exit codes are a stable contract: 0 success, 1 verification failure,
//! 2 usage, configuration, IO or parse error.

pub mod commands;
pub mod config;
pub mod csvio;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{RawConfig, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{origin}: {msg}")]
    Config { origin: String, msg: String },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}:{line}: {msg}", path.display())]
    Parse { path: PathBuf, line: u64, msg: String },
    #[error(transparent)]
    Nav(#[from] crate::Error),
    #[error("verification failed: {failed} of {total} checks")]
    VerifyFailed { failed: usize, total: usize },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::VerifyFailed { .. } => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "eqnav", version, about = "Invariant and equivariant filtering for inertial/GNSS navigation")]
pub struct Cli {
    /// Flat key = value configuration file
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory (must exist)
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Input directory for `run` (defaults to --out)
    #[arg(long, global = true, value_name = "DIR")]
    pub input: Option<PathBuf>,
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_name = "left|right")]
    pub convention: Option<String>,
    #[arg(long, global = true, value_name = "NAME")]
    pub scenario: Option<String>,
    /// Override any configuration key; repeatable, applied after --config
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write imu.csv, gnss.csv and truth.csv for a scenario
    Simulate,
    /// Run the filter on CSV input, or a Monte Carlo set when mc.runs > 0
    Run,
    /// Run the property suite and print a JSON report
    Verify,
    /// Rank and null space of the stacked observability matrix
    Observability,
}

impl Cli {
    /// Config file first, then `--set`, then the dedicated flags.
    pub fn raw_config(&self) -> Result<RawConfig, CliError> {
        let mut raw = RawConfig::default();
        if let Some(p) = &self.config {
            raw.load_file(p)?;
        }
        for kv in &self.overrides {
            raw.set_override(kv)?;
        }
        let flags = [
            ("out", self.out.as_ref().map(|p| p.display().to_string())),
            ("input", self.input.as_ref().map(|p| p.display().to_string())),
            ("seed", self.seed.map(|s| s.to_string())),
            ("convention", self.convention.clone()),
            ("scenario", self.scenario.clone()),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                raw.set(k, &v, config::Origin::CommandLine);
            }
        }
        Ok(raw)
    }
}

/// Parses the configuration and dispatches the subcommand.
pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let raw = cli.raw_config()?;
    let cfg = RunConfig::resolve(&raw)?;
    match cli.command {
        Command::Simulate => commands::simulate(&cfg),
        Command::Run => commands::run(&cfg),
        Command::Verify => commands::verify(&cfg),
        Command::Observability => commands::observability(&cfg),
    }
}
