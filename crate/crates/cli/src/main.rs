//! `rlmp`: generate data, diagnose conditioning, build preconditioners, run
//! solvers and sweep comparisons.

mod args;
mod cmd;
mod config;
mod exit;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::exit::CliError;

#[derive(Debug, Parser)]
#[command(name = "rlmp", version, about = "Data preconditioning experiments for regularized loss minimization")]
#[command(args_override_self = true)]
pub struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset with a prescribed covariance spectrum.
    Gen(cmd::gen::GenArgs),
    /// Report condition numbers, numerical rank and coherence.
    Diagnose(cmd::diagnose::DiagnoseArgs),
    /// Build a preconditioner and write the transformed dataset.
    Precond(cmd::precond::PrecondArgs),
    /// Run one solver on one formulation and write its trace.
    Solve(cmd::solve::SolveArgs),
    /// Run a grid of formulations, algorithms and seeds into one long CSV.
    Compare(cmd::compare::CompareArgs),
    /// Check CSV outputs for schema errors.
    Validate(cmd::validate::ValidateArgs),
}

fn main() -> ExitCode {
    let raw: Vec<String> = std::env::args().collect();
    let argv = match config::expand(raw) {
        Ok(a) => a,
        Err(e) => return report(e),
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(exit::USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match cli.command {
        Command::Gen(a) => cmd::gen::run(a),
        Command::Diagnose(a) => cmd::diagnose::run(a),
        Command::Precond(a) => cmd::precond::run(a),
        Command::Solve(a) => cmd::solve::run(a),
        Command::Compare(a) => cmd::compare::run(a),
        Command::Validate(a) => cmd::validate::run(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => report(e),
    }
}

fn report(e: CliError) -> ExitCode {
    eprintln!("error: {}", e.message);
    ExitCode::from(e.code)
}
