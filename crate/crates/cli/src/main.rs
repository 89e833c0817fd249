use std::process::ExitCode;

use clap::Parser;
use mobfluid_cli::{run, Cli};

fn main() -> ExitCode {
    ExitCode::from(run(Cli::parse()))
}
