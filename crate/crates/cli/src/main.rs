use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;

use commands::{BoundsArgs, GateArgs, StateArgs, SweepArgs};

/// Active-learning shot allocation experiments on simulated Pauli measurements.
#[derive(Debug, Parser)]
#[command(name = "activeshots", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Convergence of state-fidelity estimates.
    StateFidelity {
        #[command(flatten)]
        args: StateArgs,
        /// JSON file with flag names as keys; explicit flags take precedence.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Convergence of gate-fidelity estimates.
    GateFidelity {
        #[command(flatten)]
        args: GateArgs,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Improvement distribution over random states for a range of qubit counts.
    ImprovementSweep {
        #[command(flatten)]
        args: SweepArgs,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Concentration radii over a grid of sample counts, variances and deltas.
    BoundsTable {
        #[command(flatten)]
        args: BoundsArgs,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Debug)]
pub struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Self {
            code: 3,
            message: message.into(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::StateFidelity { args, config } => commands::state_fidelity(args, config),
        Command::GateFidelity { args, config } => commands::gate_fidelity(args, config),
        Command::ImprovementSweep { args, config } => commands::improvement_sweep(args, config),
        Command::BoundsTable { args, config } => commands::bounds_table(args, config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
