use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;

use commands::CliError;
use config::{load_config_file, RunArgs, RunConfig};

/// Coherent information of qubit-field-qubit transfer channels.
#[derive(Debug, Parser)]
#[command(name = "udw", version)]
struct Cli {
    /// Flat `key = value` file; flags given on the command line win
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Coherent information over a γ_φ grid
    Sweep(RunArgs),
    /// Cross-talk overlap curves
    Overlaps(RunArgs),
    /// Cross-check the exact, Fock, quadrature and Monte Carlo paths
    Verify(RunArgs),
}

type Action = fn(&RunConfig) -> Result<(), CliError>;

fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(path) => load_config_file(path)?,
        None => Default::default(),
    };
    let (args, action): (RunArgs, Action) = match cli.command {
        Command::Sweep(a) => (a, commands::sweep),
        Command::Overlaps(a) => (a, commands::overlaps),
        Command::Verify(a) => (a, commands::verify),
    };
    let cfg = RunConfig::resolve(args, &file)?;
    action(&cfg)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Config(m) => eprintln!("error: {m}"),
                CliError::Numeric(m) => eprintln!("numeric error: {m}"),
                CliError::Verify => eprintln!("verification failed"),
            }
            ExitCode::from(e.exit_code())
        }
    }
}
