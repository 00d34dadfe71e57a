//! Command-line front end: `check`, `solve`, `continuity` and `oracle`.
//!
//! Exit codes: 0 success, 1 hypothesis or bound failure, 2 input error,
//! 3 non-convergence.

pub mod commands;
pub mod file;
pub mod report;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use commands::{Outcome, SolveArgs};
use report::Status;

#[derive(Debug, Parser)]
#[command(
    name = "qie",
    version,
    about = "Certify and solve systems of quadratic integral equations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate assumptions, compute constants and the contraction verdict.
    Check {
        file: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check, then run Picard iteration.
    Solve {
        file: PathBuf,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long, default_value_t = qie_core::solver::DEFAULT_MAX_ITER)]
        max_iter: usize,
        /// Write the iteration trace as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Iterate even when the problem is not certified.
        #[arg(long)]
        best_effort: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Solve with the file's g and with the g of a second file, and compare
    /// the distance of the solutions with the continuity bound.
    Continuity {
        file: PathBuf,
        #[arg(long)]
        g2: PathBuf,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rerun the brute-force oracles on a reduced grid.
    Oracle {
        file: PathBuf,
        /// Points per axis (default: the oracle budget).
        #[arg(long)]
        size: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
}

fn emit(outcome: Outcome, out: Option<PathBuf>) -> i32 {
    if let Some(msg) = &outcome.message {
        eprintln!("error: {msg}");
    }
    if let Some(report) = &outcome.report {
        let json = report.to_json();
        match out {
            Some(path) => {
                if let Err(e) = std::fs::write(&path, json) {
                    eprintln!("error: writing {}: {e}", path.display());
                    return Status::InputError.code();
                }
            }
            None => {
                let _ = std::io::stdout().lock().write_all(json.as_bytes());
            }
        }
        if let Some(err) = &report.error {
            eprintln!("{err}");
        }
    }
    outcome.status.code()
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match cli.command {
        Command::Check { file, seed, out } => emit(commands::cmd_check(&file, seed), out),
        Command::Solve {
            file,
            tol,
            max_iter,
            trace,
            out,
            best_effort,
            seed,
        } => {
            let args = SolveArgs {
                tol,
                max_iter,
                trace,
                best_effort,
                seed,
            };
            emit(commands::cmd_solve(&file, &args), out)
        }
        Command::Continuity {
            file,
            g2,
            tol,
            seed,
            out,
        } => emit(commands::cmd_continuity(&file, &g2, tol, seed), out),
        Command::Oracle {
            file,
            size,
            seed,
            out,
            inject_fault,
        } => emit(commands::cmd_oracle(&file, size, seed, inject_fault), out),
    }
}
