use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = catlift::Cli::parse();
    match catlift::execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
