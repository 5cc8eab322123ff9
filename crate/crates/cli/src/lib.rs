//! Command-line front end for `sbdp-core`: configuration parsing, trajectory and kernel
//! files, and the subcommands behind the `sbdp` binary.

pub mod commands;
pub mod config;
pub mod io;

use std::path::PathBuf;

use clap::Parser;

pub use commands::{execute, sha256_hex, Command, Outcome, Overrides};
pub use config::{parse_config, ConfigErrors, ExperimentSpec};

#[derive(Debug, Parser)]
#[command(
    name = "sbdp",
    version,
    about = "Spatial birth-and-death process experiments"
)]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// Experiment configuration (see docs/config.md).
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub runs: Option<u64>,
    /// Worker threads. Results do not depend on this.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Directory for report.txt and data files; the report is always printed.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
