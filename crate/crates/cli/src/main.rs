use std::process::ExitCode;

use clap::Parser;

mod args;
mod commands;

use args::Cli;

/// Exit status for a core error: 1 usage/config, 2 data validation,
/// 3 numerical failure.
fn exit_code(err: &taep_core::Error) -> u8 {
    use taep_core::Error::*;
    match err {
        Config(_) | Io { .. } => 1,
        Argument(_) | Validation(_) | Similarity(_) | Parse { .. } => 2,
        Numerical(_) | QpNotConverged { .. } => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(cli.log_level())).init();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
