//! Command-line front end for `symvol`.
//!
//! Every command reads one JSON config (`--config`), writes its artifacts
//! into `--out`, prints a short summary and exits with 0 on success, 2 on
//! config errors, 3 on integration failures, 4 on invariant violations and
//! 5 when an input STM is not symplectic.

pub mod commands;
pub mod config;
pub mod error;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "symvol", version, about = "STM propagation and symplectic volume diagnostics")]
pub struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Directory for output files (created if missing).
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,

    /// Replace the integrator relative tolerance (absolute = relative / 100).
    #[arg(long, global = true)]
    pub tol_override: Option<f64>,

    /// Seed for randomized inputs.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Format for bulk numeric output.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate a trajectory and its STM.
    Propagate,
    /// Check subdeterminant sums, brackets, expansion factors and collapse angles.
    Invariants,
    /// Compute the symplectic eigenskeleton of an STM.
    Skeleton,
    /// Area factors and density maps for a flat lamina.
    Surface,
    /// Run one of the control case studies.
    Example {
        #[arg(value_enum)]
        name: ExampleName,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExampleName {
    Heisenberg,
    Disc,
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    std::fs::create_dir_all(&cli.out)?;
    match &cli.command {
        Command::Propagate => commands::propagate(cli),
        Command::Invariants => commands::invariants(cli),
        Command::Skeleton => commands::skeleton(cli),
        Command::Surface => commands::surface(cli),
        Command::Example { name } => commands::example(cli, *name),
    }
}
