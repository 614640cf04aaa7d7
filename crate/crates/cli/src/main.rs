//! `hammerflow` command-line front end.
//!
//! Exit codes: 0 success, 1 config or I/O error, 2 numerical failure,
//! 3 optimizer failure, 4 gradient check failure.

mod args;
mod commands;
mod failure;
mod manifest;
mod output;

use std::process::ExitCode;

use clap::Parser;

use crate::args::Cli;
use crate::failure::{EXIT_CONFIG, EXIT_OK};
use crate::manifest::RunManifest;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK });
        }
    };
    let manifest = RunManifest::from(cli);
    match commands::run(&manifest) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
