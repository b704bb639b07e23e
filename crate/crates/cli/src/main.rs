//! Batch command-line interface for bipartite-network-interference
//! analysis: exposure derivation, effect estimation with bootstrap
//! intervals, Monte Carlo simulation sweeps, and subgroup discovery.
//!
//! Exit codes: 0 success, 2 input/format error, 3 numerical or degeneracy
//! error, 4 configuration error.

mod config;
mod derive;
mod discover;
mod estimate;
mod plot;
mod simulate;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use bni_core::error::Error;

#[derive(Parser)]
#[command(name = "bni", version, about = "Causal effect estimation under bipartite network interference")]
struct Cli {
    /// Cap worker threads (1 gives serial execution with identical output).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Derive key-associated/upwind structure and exposure assignments.
    Derive(derive::DeriveArgs),
    /// Estimate direct and spillover effects, optionally with bootstrap CIs.
    Estimate(estimate::EstimateArgs),
    /// Run Monte Carlo simulation scenarios and report percent absolute bias.
    Simulate(simulate::SimulateArgs),
    /// Discover heterogeneous subgroups from per-unit effect estimates.
    Discover(discover::DiscoverArgs),
}

fn exit_code_for(err: &Error) -> u8 {
    if err.is_input_error() {
        2
    } else if err.is_config_error() {
        4
    } else {
        3
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(4);
        }
    };

    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(4);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: could not configure thread pool: {}", e);
            return ExitCode::from(4);
        }
    }

    let result = match cli.command {
        Command::Derive(args) => derive::run(args),
        Command::Estimate(args) => estimate::run(args),
        Command::Simulate(args) => simulate::run(args),
        Command::Discover(args) => discover::run(args),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e);
            ExitCode::from(exit_code_for(&e))
        }
    }
}
