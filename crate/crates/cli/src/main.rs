//! `nheavy` command-line driver.

mod commands;
mod manifest;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{BacktestArgs, EstimateArgs, ForecastArgs, GenNetworkArgs, RmseTableArgs, SimulateArgs};

/// Exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const INTERNAL: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const DATA: u8 = 3;
    pub const CONVERGENCE: u8 = 4;
}

#[derive(Debug, Parser)]
#[command(name = "nheavy", version, about = "Network HEAVY volatility model experiments")]
struct Cli {
    /// Worker threads for replication and origin parallelism (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Exit with a distinct code when an estimation does not converge.
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a random network and write it as an edge list.
    GenNetwork(GenNetworkArgs),
    /// Simulate a daily panel (and optionally intraday prices).
    Simulate(SimulateArgs),
    /// Fit the model to a panel.
    Estimate(EstimateArgs),
    /// Multistep variance forecasts from a fitted model.
    Forecast(ForecastArgs),
    /// Out-of-sample QLIKE backtest.
    Backtest(BacktestArgs),
    /// Monte Carlo parameter-recovery table.
    RmseTable(RmseTableArgs),
}

/// Errors that map to the usage exit code.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Raised under `--strict` when a fit did not converge.
#[derive(Debug)]
pub struct ConvergenceError(pub String);

impl std::fmt::Display for ConvergenceError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConvergenceError {}

fn broken_pipe(err: &anyhow::Error) -> bool {
    let is_pipe = |e: &std::io::Error| e.kind() == std::io::ErrorKind::BrokenPipe;
    err.chain().any(|e| {
        e.downcast_ref::<std::io::Error>().is_some_and(is_pipe)
            || matches!(e.downcast_ref::<nheavy::Error>(), Some(nheavy::Error::Io(io)) if is_pipe(io))
            || matches!(e.downcast_ref::<csv::Error>().map(csv::Error::kind), Some(csv::ErrorKind::Io(io)) if is_pipe(io))
    })
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return exit::USAGE;
    }
    if err.downcast_ref::<ConvergenceError>().is_some() {
        return exit::CONVERGENCE;
    }
    if err.downcast_ref::<std::io::Error>().is_some() {
        return exit::DATA;
    }
    match err.downcast_ref::<nheavy::Error>() {
        Some(nheavy::Error::Evaluation(_)) => exit::INTERNAL,
        Some(_) => exit::DATA,
        None => exit::INTERNAL,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::USAGE } else { exit::OK });
        }
    };
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(exit::USAGE);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(exit::INTERNAL);
        }
    }
    let result = match &cli.command {
        Command::GenNetwork(a) => commands::gen_network(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Estimate(a) => commands::estimate(a, cli.strict),
        Command::Forecast(a) => commands::forecast(a),
        Command::Backtest(a) => commands::backtest(a, cli.strict),
        Command::RmseTable(a) => commands::rmse_table(a, cli.strict),
    };
    match result {
        Ok(()) => ExitCode::from(exit::OK),
        // A reader such as `head` closed stdout; not an error of ours.
        Err(e) if broken_pipe(&e) => ExitCode::from(exit::OK),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
