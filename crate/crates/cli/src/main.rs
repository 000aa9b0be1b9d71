use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = driftshear_cli::Cli::parse();
    match driftshear_cli::run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
