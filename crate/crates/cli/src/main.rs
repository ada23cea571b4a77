mod commands;
mod config;
mod exit;
mod format;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dblab_core::SweepVariable;

use crate::exit::Failure;

#[derive(Parser, Debug)]
#[command(name = "dblab", version, about = "Thinking/doing schedules under a deadline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve for the optimal schedule and write schedule.json.
    Solve(Common),
    /// Compare the solver against the dynamic-programming oracle; writes verify.json.
    Verify(Common),
    /// Solve and score a grid of horizons or priors; writes sweep.csv.
    Sweep(Common),
    /// Monte Carlo estimates for the schedule; writes simulate.csv.
    Simulate(Common),
    /// Outcome probabilities over time; writes trajectory.csv.
    Trajectory(Common),
    /// Print the configuration in canonical form, with overrides and defaults applied.
    Config(Common),
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Oracle time step.
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub reps: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Sweep grid as a:b:step.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long, value_parser = parse_variable)]
    pub variable: Option<SweepVariable>,
}

fn parse_variable(s: &str) -> Result<SweepVariable, String> {
    s.parse().map_err(|e: dblab_core::Error| e.to_string())
}

fn init_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("DBLAB_THREADS") else { return Ok(()) };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| Failure::validation(format!("DBLAB_THREADS must be a positive integer, got {raw:?}")))?;
    // A second initialization only happens in tests; the first pool stands.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    init_threads()?;
    match cli.command {
        Command::Solve(c) => commands::solve(&c),
        Command::Verify(c) => commands::verify(&c),
        Command::Sweep(c) => commands::sweep(&c),
        Command::Simulate(c) => commands::simulate(&c),
        Command::Trajectory(c) => commands::trajectory(&c),
        Command::Config(c) => commands::show_config(&c),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("dblab: {f}");
            f.code()
        }
    }
}
