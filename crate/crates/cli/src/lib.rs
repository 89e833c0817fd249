//! Command-line front end: runs the analysis, the cellular simulator and the
//! Monte Carlo oracles from a scenario file and writes CSV tables.
//!
//! Exit codes: 0 success, 1 input error, 2 model error or non-convergence,
//! 3 comparison thresholds not met.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

pub mod commands;
pub mod output;

pub use commands::{DEFAULT_LAMBDA_ON, ORACLE_LEVELS};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Model(String),
}

impl CliError {
    pub fn io(path: &Path, detail: impl std::fmt::Display) -> Self {
        CliError::Input(format!("{}: {detail}", path.display()))
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Model(_) => 2,
        }
    }
}

impl From<mobfluid::Error> for CliError {
    fn from(e: mobfluid::Error) -> Self {
        match e {
            mobfluid::Error::Scenario { .. } | mobfluid::Error::InvalidParams(_) => CliError::Input(e.to_string()),
            other => CliError::Model(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "mobfluid",
    version,
    about = "Buffer-fill analysis for mobile constant-bit-rate sources"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the handoff fixed point, the channel equilibrium and the buffer distributions.
    Analyze {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// New-call rate reading: per-cell | paper-literal.
        #[arg(long, default_value = "per-cell")]
        mode: String,
        /// Peak-to-silence rate ratio of one on-off source.
        #[arg(long, default_value_t = DEFAULT_LAMBDA_ON)]
        lambda_on: f64,
        /// Buffer drain rate; defaults to floor(C / 2) + 0.5.
        #[arg(long)]
        service_rate: Option<f64>,
    },
    /// Run the cellular simulator.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Mobile heading: compass | straight.
        #[arg(long, default_value = "compass")]
        mode: String,
    },
    /// Run a Monte Carlo oracle.
    Oracle {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// fixed | mobile | birth-death.
        #[arg(long)]
        mode: String,
        /// Events (birth-death) or time steps (fluid modes).
        #[arg(long)]
        samples: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = DEFAULT_LAMBDA_ON)]
        lambda_on: f64,
        #[arg(long)]
        service_rate: Option<f64>,
    },
    /// Compare an analysis directory with a simulation directory.
    Compare {
        #[arg(long)]
        analysis: PathBuf,
        #[arg(long)]
        sim: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Runs one command and returns its exit code; errors are reported on stderr.
pub fn run(cli: Cli) -> u8 {
    let result = match cli.command {
        Command::Analyze {
            scenario,
            out,
            mode,
            lambda_on,
            service_rate,
        } => commands::analyze(&scenario, &out, &mode, lambda_on, service_rate),
        Command::Simulate {
            scenario,
            out,
            seed,
            mode,
        } => commands::simulate(&scenario, &out, seed, &mode),
        Command::Oracle {
            scenario,
            out,
            mode,
            samples,
            seed,
            lambda_on,
            service_rate,
        } => commands::oracle(&scenario, &out, &mode, samples, seed, lambda_on, service_rate),
        Command::Compare { analysis, sim, out } => commands::compare(&analysis, &sim, &out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
