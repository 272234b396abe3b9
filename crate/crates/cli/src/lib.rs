//! The `fallwatch` command line.
//!
//! Every subcommand resolves its settings as built-in defaults, then an
//! optional `--config` file of `key = value` lines, then flags, and prints
//! the result before doing anything else.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

/// Process exit status. Stable for scripts and CI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(i32)]
pub enum ExitCode {
    Ok = 0,
    CheckFailed = 1,
    Usage = 2,
    Io = 3,
    Diverged = 4,
}

#[derive(Debug, Error)]
#[error("{message}")]
pub struct CliError {
    pub code: ExitCode,
    pub message: String,
}

impl CliError {
    pub fn new(code: ExitCode, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(ExitCode::Usage, message)
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self::new(ExitCode::Io, message)
    }

    pub fn check(message: impl Into<String>) -> Self {
        Self::new(ExitCode::CheckFailed, message)
    }
}

#[derive(Debug, Parser)]
#[command(name = "fallwatch", version, about = "Drone-based fall detection toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a classifier on a labeled image folder.
    Train(commands::train::TrainArgs),
    /// Score a labeled folder with a checkpoint, or report metrics from counts.
    Eval(commands::eval::EvalArgs),
    /// Print the fall probability of individual images.
    Predict(commands::predict::PredictArgs),
    /// Watch a frame source and raise alarms on falls.
    Monitor(commands::monitor::MonitorArgs),
    /// Run the mock drone until interrupted.
    Simulate(commands::simulate::SimulateArgs),
    /// Compare analytic and finite-difference gradients.
    Gradcheck(commands::gradcheck::GradcheckArgs),
    /// Resize NetPBM images into a P6 dataset tree.
    Convert(commands::convert::ConvertArgs),
    /// Write a synthetic dataset or a scripted replay.
    Synth(commands::synth::SynthArgs),
}

/// Common to every subcommand.
#[derive(Debug, Clone, clap::Args)]
pub struct ConfigArg {
    /// `key = value` settings file; flags override it.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(a) => commands::train::run(&a),
        Command::Eval(a) => commands::eval::run(&a),
        Command::Predict(a) => commands::predict::run(&a),
        Command::Monitor(a) => commands::monitor::run(&a),
        Command::Simulate(a) => commands::simulate::run(&a),
        Command::Gradcheck(a) => commands::gradcheck::run(&a),
        Command::Convert(a) => commands::convert::run(&a),
        Command::Synth(a) => commands::synth::run(&a),
    }
}
