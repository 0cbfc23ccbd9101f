// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use centralspin_cli::invariants::run_suite;
use centralspin_cli::{parse_config, run_experiment, RunOptions};
use clap::{Parser, Subcommand};

const EXIT_CONFIG: u8 = 1;
const EXIT_INVARIANT: u8 = 2;

#[derive(Parser)]
#[command(name = "simulate", version, about = "Seeded central-spin experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to the config's `output` key, then `results`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
        /// Overwrite existing outputs.
        #[arg(long)]
        force: bool,
    },
    /// Run the invariant suite and report each property.
    Validate {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config, out, threads, force } => {
            let text = match fs::read_to_string(&config) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: {}: {e}", config.display());
                    return ExitCode::from(EXIT_CONFIG);
                }
            };
            let cfg = match parse_config(&text) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {}: {e}", config.display());
                    return ExitCode::from(EXIT_CONFIG);
                }
            };
            let base_dir = config.parent().map(PathBuf::from).unwrap_or_default();
            let out_dir = out
                .or_else(|| cfg.output.as_ref().map(|o| base_dir.join(o)))
                .unwrap_or_else(|| PathBuf::from("results"));
            let opts = RunOptions { out_dir, threads, force, base_dir };
            match run_experiment(&cfg, &opts) {
                Ok(outcome) => {
                    for (name, sum) in &outcome.checksums {
                        println!("{}  {}", sum, opts.out_dir.join(name).display());
                    }
                    println!("manifest: {}", outcome.manifest_path.display());
                    if outcome.outputs.suite_failed {
                        eprintln!("invariant suite reported failures");
                        return ExitCode::from(EXIT_INVARIANT);
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_CONFIG)
                }
            }
        }
        Command::Validate { seed } => {
            let checks = run_suite(seed);
            for c in &checks {
                println!("{:<4} {:<36} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if checks.iter().all(|c| c.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_INVARIANT)
            }
        }
    }
}
