//! Command-line front end: run experiment configs, validate them, list
//! experiments.
//!
//! Exit codes: 0 on success, 1 on config parse/validation errors, 2 on
//! runtime errors.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use noma_link::harness::{parse_scenario, run, Scenario};

#[derive(Parser)]
#[command(
    name = "noma-link",
    version,
    about = "Link-level Monte Carlo simulator for two-user downlink NOMA"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write the result table as CSV.
    Run {
        /// Path to the JSON experiment config.
        config: PathBuf,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Override the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (defaults to the available parallelism).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Parse and validate a config, printing the resolved scenario.
    Validate {
        /// Path to the JSON experiment config.
        config: PathBuf,
    },
    /// List the experiment names accepted in configs.
    ListExperiments,
}

const EXIT_VALIDATION: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

fn load_scenario(path: &PathBuf, seed: Option<u64>) -> Result<Scenario, u8> {
    let text = fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        EXIT_VALIDATION
    })?;
    let scenario = parse_scenario(&text).map_err(|e| {
        eprintln!("error: {e}");
        EXIT_VALIDATION
    })?;
    Ok(match seed {
        Some(s) => scenario.with_seed(s),
        None => scenario,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            out,
            seed,
            workers,
        } => {
            let scenario = match load_scenario(&config, seed) {
                Ok(s) => s,
                Err(code) => return ExitCode::from(code),
            };
            let workers = workers.unwrap_or_else(|| {
                std::thread::available_parallelism()
                    .map(|n| n.get())
                    .unwrap_or(1)
            });
            let table = match run(&scenario, workers) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_RUNTIME);
                }
            };
            match table.write_csv(&out) {
                Ok(bytes) => {
                    println!(
                        "wrote {bytes} bytes to {} ({} rows, scenario {})",
                        out.display(),
                        table.rows().len(),
                        scenario.hash_hex()
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_RUNTIME)
                }
            }
        }
        Command::Validate { config } => match load_scenario(&config, None) {
            Ok(scenario) => {
                println!("ok: experiment {}", scenario.experiment().name());
                println!("scenario_hash: {}", scenario.hash_hex());
                println!("trials: {}", scenario.trials());
                println!("seed: {}", scenario.seed());
                if !scenario.applied_defaults().is_empty() {
                    println!("applied defaults:");
                    for d in scenario.applied_defaults() {
                        println!("  - {d}");
                    }
                }
                ExitCode::SUCCESS
            }
            Err(code) => ExitCode::from(code),
        },
        Command::ListExperiments => {
            for e in noma_link::harness::Experiment::ALL {
                println!("{}", e.name());
            }
            ExitCode::SUCCESS
        }
    }
}
