//! Command-line front end: run one experiment mode on a config file.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rdseed::config::parse_config;
use rdseed::experiment::{max_threads, run_experiment, Mode};

#[derive(Parser)]
#[command(
    name = "rdseed",
    version,
    about = "Optimal initial seeding for reaction-diffusion population models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the forward equation and dump the final state
    Forward { config: PathBuf },
    /// Fixed-point maximization of the final-time population
    Optimize { config: PathBuf },
    /// Simulated-annealing baseline
    Anneal { config: PathBuf },
    /// Adjoint gradient vs central differences, CSV over epsilons
    GradCheck { config: PathBuf },
    /// Two-scale remainder sweep certificate
    Twoscale { config: PathBuf },
    /// Convex-case block-optimality and torus-comparison suites
    ConvexCheck { config: PathBuf },
    /// Run optimize and anneal on one config and tabulate both
    Compare { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, config) = match &cli.command {
        Command::Forward { config } => (Mode::Forward, config),
        Command::Optimize { config } => (Mode::Optimize, config),
        Command::Anneal { config } => (Mode::Anneal, config),
        Command::GradCheck { config } => (Mode::GradCheck, config),
        Command::Twoscale { config } => (Mode::Twoscale, config),
        Command::ConvexCheck { config } => (Mode::ConvexCheck, config),
        Command::Compare { config } => (Mode::Compare, config),
    };
    match run(mode, config) {
        Ok(dir) => {
            println!("artifacts written to {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("rdseed: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(mode: Mode, config: &PathBuf) -> rdseed::Result<PathBuf> {
    let text = std::fs::read_to_string(config)?;
    let cfg = parse_config(&text)?;
    let _ = max_threads(); // validated once so a bad value fails fast
    run_experiment(&cfg, mode)
}
