//! `semibayes` command-line tool: fit the sparse regression model, run
//! design and posterior diagnostics, and drive simulation experiments.

mod diagnose;
mod error;
mod experiment;
mod fit;
mod io;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(
    name = "semibayes",
    version,
    about = "Sparse linear regression with symmetric mixture errors"
)]
struct Cli {
    /// Worker threads (default: all logical cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the posterior sampler on a dataset.
    Fit(fit::FitArgs),
    /// Design and posterior diagnostics.
    #[command(subcommand)]
    Diagnose(diagnose::DiagnoseCommand),
    /// Run a simulation experiment over a grid.
    Experiment(experiment::ExperimentArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Output directory shared by every command.
#[derive(Debug, Args)]
pub struct OutArgs {
    /// Directory for outputs and the run manifest.
    #[arg(long)]
    out: PathBuf,
}

fn init_logging() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SEMIBAYES_LOG", "error"))
        .format_timestamp(None)
        .init();
}

fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    match cli.command {
        Command::Fit(args) => fit::run(args),
        Command::Diagnose(cmd) => diagnose::run(cmd),
        Command::Experiment(args) => experiment::run(args),
    }
}

fn main() -> ExitCode {
    init_logging();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
