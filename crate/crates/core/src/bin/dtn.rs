use std::process::ExitCode;

use clap::Parser;
use dtn_core::cli::{configure_threads, run, Args};

fn main() -> ExitCode {
    let args = Args::parse();
    match configure_threads().and_then(|_| run(&args)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
