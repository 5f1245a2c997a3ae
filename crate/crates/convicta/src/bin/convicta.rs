use std::process::ExitCode;

use clap::Parser;
use convicta::catalog::ScenarioCatalog;
use convicta::cli::{execute, render_error, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let catalog = ScenarioCatalog::from_env();
    match execute(cli, &catalog, &mut std::io::stdout().lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", render_error(&e));
            ExitCode::FAILURE
        }
    }
}
