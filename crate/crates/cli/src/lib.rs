//! Command-line pipeline: `check` the hypotheses of a model, `certify` an
//! entropy decay rate, `simulate` the one-dimensional equation and `report`
//! the collected results.
//!
//! Exit codes are 0 on success, 1 when a mathematical check fails
//! (assumption, certificate or decay) and 2 for usage or configuration
//! errors.

pub mod commands;
pub mod config;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use thiserror::Error;

pub use commands::{cmd_certify, cmd_check, cmd_report, cmd_simulate, SimulationSummary};
pub use config::{Overrides, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Failure(_) => 1,
            CliError::Config(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "kfp",
    version,
    about = "Hypothesis checks, decay certificates and simulation for kinetic Fokker-Planck equations"
)]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub args: Args,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the hypotheses on a scan grid; writes report.txt and report.toml.
    Check,
    /// Build and validate a decay certificate; writes certificate.toml.
    Certify,
    /// Run the 1D x 1D solver; writes series.csv and summary files.
    Simulate {
        /// Append the entropy-production identity residuals to the summary.
        #[arg(long)]
        diagnostics: bool,
    },
    /// Collate report, certificate and summary into bundle.txt.
    Report,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    /// classical, relativistic or a model file.
    #[arg(long, global = true)]
    pub model: Option<String>,
    #[arg(long, global = true)]
    pub theta: Option<f64>,
    /// Momentum dimension of built-in models for `check`.
    #[arg(long, global = true)]
    pub dim: Option<usize>,
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub nx: Option<usize>,
    #[arg(long, global = true)]
    pub np: Option<usize>,
    #[arg(long, global = true)]
    pub p_max: Option<f64>,
    #[arg(long, global = true)]
    pub radius: Option<f64>,
    #[arg(long, global = true)]
    pub resolution: Option<usize>,
    #[arg(long, global = true)]
    pub quasi_random: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Skip the log-Sobolev criteria.
    #[arg(long, global = true)]
    pub no_logsob: bool,
    #[arg(long, global = true)]
    pub tmax: Option<f64>,
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    #[arg(long, global = true)]
    pub sample_dt: Option<f64>,
    /// upwind or limited.
    #[arg(long, global = true)]
    pub scheme: Option<String>,
    /// Initial data as an expression in x and p.
    #[arg(long, global = true)]
    pub initial: Option<String>,
    #[arg(long, global = true)]
    pub margin: Option<f64>,
    /// Log-Sobolev constant to use when no criterion verifies one.
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Precomputed certificate file.
    #[arg(long, global = true)]
    pub certificate: Option<PathBuf>,
    /// Precomputed assumption report (report.toml).
    #[arg(long, global = true)]
    pub report: Option<PathBuf>,
}

impl From<Args> for Overrides {
    fn from(a: Args) -> Self {
        Overrides {
            model: a.model,
            theta: a.theta,
            dim: a.dim,
            output_dir: a.output_dir,
            nx: a.nx,
            np: a.np,
            p_max: a.p_max,
            radius: a.radius,
            resolution: a.resolution,
            quasi_random_count: a.quasi_random,
            seed: a.seed,
            no_logsob: a.no_logsob,
            tmax: a.tmax,
            dt: a.dt,
            sample_dt: a.sample_dt,
            scheme: a.scheme,
            initial: a.initial,
            margin: a.margin,
            alpha: a.alpha,
            certificate: a.certificate,
            report: a.report,
        }
    }
}

/// Runs one command and returns the process exit code.
pub fn run_cli(cli: Cli) -> i32 {
    let overrides = Overrides::from(cli.args);
    let cfg = match RunConfig::load(cli.config.as_deref(), &overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let result = match cli.command {
        Command::Check => cmd_check(&cfg).map(|_| ()),
        Command::Certify => cmd_certify(&cfg).map(|_| ()),
        Command::Simulate { diagnostics } => cmd_simulate(&cfg, diagnostics).map(|_| ()),
        Command::Report => cmd_report(&cfg).map(|_| ()),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
