//! `evcsl` command line: generate or import instances, evaluate layouts,
//! run the solvers, and produce benchmark reports.
//!
//! Exit codes: 0 success, 1 error, 2 the outcome is infeasible (an
//! evaluated or solved layout violates constraints). Logs go to stderr,
//! machine-readable data to stdout or files.

mod commands;
mod config;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use commands::Cli;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };

    match commands::run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
