use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    match blockcalc::cli::run(blockcalc::cli::Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
