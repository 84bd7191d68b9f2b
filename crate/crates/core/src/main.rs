use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let args = cxg_core::cli::Cli::parse();
    match cxg_core::cli::run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {:#}", failure.error);
            ExitCode::from(failure.code)
        }
    }
}
