use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    match hssc::cli::run(hssc::cli::Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
