use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use berry_core::reproduce::{self, ReproduceOptions};
use berry_core::scenario::{exit_code, list_models, models_text, run_scenario};

#[derive(Parser)]
#[command(
    name = "berry",
    version,
    about = "Berry phases and eigenbundle topology for parameter-dependent Hamiltonians"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a scenario file and print the report as JSON.
    Run {
        scenario: PathBuf,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the built-in model zoo.
    Models {
        #[arg(long)]
        json: bool,
    },
    /// Run the named reproduction checks and print a pass/fail table.
    Reproduce {
        /// Only run checks whose name contains this string.
        #[arg(long)]
        only: Option<String>,
        /// Override the ODE step count used by the holonomy checks.
        #[arg(long)]
        steps: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { scenario, out } => {
            let report = match run_scenario(&scenario) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(exit_code(&e) as u8);
                }
            };
            let json = report.to_json();
            match out {
                Some(path) => {
                    if let Err(e) = std::fs::write(&path, json + "\n") {
                        eprintln!("error: cannot write {}: {e}", path.display());
                        return ExitCode::from(2);
                    }
                }
                None => println!("{json}"),
            }
            ExitCode::SUCCESS
        }
        Command::Models { json } => {
            if json {
                println!("{}", serde_json::to_string_pretty(&list_models()).expect("zoo serializes"));
            } else {
                print!("{}", models_text());
            }
            ExitCode::SUCCESS
        }
        Command::Reproduce { only, steps } => {
            let outcomes = reproduce::run(&ReproduceOptions { only, steps });
            print!("{}", reproduce::table(&outcomes));
            if outcomes.is_empty() {
                eprintln!("error: no check matches the selection");
                return ExitCode::from(2);
            }
            if outcomes.iter().all(|o| o.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
    }
}
