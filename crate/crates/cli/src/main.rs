//! `dqtsc` — train, evaluate and compare the intersection control agents.

mod commands;
mod config;
mod plot;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Usage and validation problems exit with 2, runtime failures with 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
}

impl CliError {
    fn usage(msg: impl Into<String>) -> CliError {
        CliError::Usage(msg.into())
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

#[derive(Parser)]
#[command(
    name = "dqtsc",
    about = "Deep Q-learning traffic signal control on a simulated intersection",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one agent and write metrics, traces and a checkpoint.
    Train(commands::TrainArgs),
    /// Run greedy evaluation episodes from a checkpoint.
    Eval(commands::EvalArgs),
    /// Train both agents under matched seeds and tabulate the comparison.
    Compare(commands::CompareArgs),
    /// Render line charts (SVG) from metrics or reward-trace CSV files.
    Plot(commands::PlotArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(args) => commands::run_train(args),
        Command::Eval(args) => commands::run_eval(args),
        Command::Compare(args) => commands::run_compare(args),
        Command::Plot(args) => commands::run_plot(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
