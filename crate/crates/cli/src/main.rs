use std::process::ExitCode;

use clap::Parser;
use genmeter_cli::{error_line, run, Cli, Outcome};

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().filter_level(cli.global.log_level).format_timestamp(None).init();
    match run(&cli) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::RunsFailed(n)) => {
            eprintln!("genmeter-error: runs_failed: {n} run(s) failed; see the store for details");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("{}", error_line(&e));
            ExitCode::FAILURE
        }
    }
}
