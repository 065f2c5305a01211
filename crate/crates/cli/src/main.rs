mod cli;
mod commands;
mod estimator;
mod plot;
mod provenance;

use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let args = cli::Cli::parse();
    match commands::run(args.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qprune: error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
