use std::process::ExitCode;

use clap::Parser;
use flowfactor_cli::{run, Cli};

fn main() -> ExitCode {
    // Configured in code only: the tool reads no environment variables.
    env_logger::Builder::new()
        .filter_level(log::LevelFilter::Info)
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
