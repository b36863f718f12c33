//! Command-line driver: configs, run artifacts, evaluation and reports.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod error;
pub mod stats;

use clap::{Parser, Subcommand};

pub use error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "qdql", version, about = "Model-free quantum gate design and calibration with deep Q-learning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train an agent and write the run artifacts.
    Train(commands::TrainArgs),
    /// Infidelity statistics of a protocol or checkpoint on a state set.
    Evaluate(commands::EvaluateArgs),
    /// Exhaustively search every protocol of a small task.
    Oracle(commands::OracleArgs),
    /// Generate a training or testing state set.
    GenStates(commands::GenStatesArgs),
    /// Windowed infidelity curve from a training log.
    Report(commands::ReportArgs),
}

/// Runs one subcommand, printing a short result to stdout.
pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Train(args) => {
            let out = commands::train(args)?;
            println!(
                "{} episodes, best infidelity {:e}, artifacts in {}",
                out.summary.episodes_completed,
                out.summary.best_infidelity,
                out.paths.dir.display()
            );
        }
        Command::Evaluate(args) => {
            let stats = commands::evaluate(args)?;
            println!("{}", serde_json::to_string_pretty(&stats).expect("plain numbers"));
        }
        Command::Oracle(args) => {
            let best = commands::oracle(args)?;
            println!(
                "evaluated {} protocols, best fidelity {} (infidelity {:e}), protocol {:?}",
                best.evaluated.unwrap_or(0),
                best.fidelity,
                1.0 - best.fidelity,
                best.protocol
            );
        }
        Command::GenStates(args) => {
            let set = commands::gen_states(args)?;
            println!("wrote {} states to {}", set.len(), args.out.display());
        }
        Command::Report(args) => {
            let curve = commands::report(args)?;
            if let Some(out) = &args.out {
                println!("wrote {} points to {}", curve.len(), out.display());
            }
        }
    }
    Ok(())
}
