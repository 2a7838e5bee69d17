use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use mrf_cli::{exit_code, run, Cli};

fn main() -> ExitCode {
    let started = Instant::now();
    let cli = Cli::parse();
    match run(cli, started) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mrfgan: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
