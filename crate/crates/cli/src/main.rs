mod args;
mod commands;
mod config;
mod failure;

use std::process::ExitCode;

use clap::Parser;

use crate::args::Cli;
use crate::commands::Status;
use crate::failure::{Failure, EXIT_CHECK_FAILED, EXIT_USAGE};

fn fail(f: Failure) -> ExitCode {
    eprintln!("error: {f}");
    ExitCode::from(f.code)
}

fn main() -> ExitCode {
    let argv = match config::expand(std::env::args_os().collect()) {
        Ok(argv) => argv,
        Err(f) => return fail(f),
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::dispatch(&cli) {
        Ok(Status::Pass) => ExitCode::SUCCESS,
        Ok(Status::CheckFailed) => ExitCode::from(EXIT_CHECK_FAILED),
        Err(f) => fail(f),
    }
}
