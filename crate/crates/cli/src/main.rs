use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    hapass_cli::cli::run(hapass_cli::cli::Cli::parse())
}
