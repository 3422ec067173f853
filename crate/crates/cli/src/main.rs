use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = loopgrade_cli::Cli::parse();
    match loopgrade_cli::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
