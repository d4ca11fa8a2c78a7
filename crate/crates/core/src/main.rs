use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = bdcl::cli::Cli::parse();
    match bdcl::cli::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
