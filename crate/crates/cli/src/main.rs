//! `werner`: batch front end for simulation, tomography and analysis of
//! two-photon Werner states.
//!
//! Exit codes: 0 success, 2 input or parameter error, 3 numerical failure.

mod cli;
mod commands;
mod io;

use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let args = match cli::Cli::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(args.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("werner: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
