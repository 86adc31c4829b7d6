//! Config-driven experiment runner for the nonlocal-forms library.
//!
//! Exit codes: 0 all assertions pass, 1 assertion failure, 2 config error,
//! 3 numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nonlocal_forms::config::ExperimentConfig;
use nonlocal_forms::experiment::run_to_dir;
use nonlocal_forms::Error;

#[derive(Parser)]
#[command(name = "nlforms", version, about = "Nonlocal quadratic forms experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a TOML config.
    Run {
        /// Path to the experiment config.
        config: PathBuf,
        /// Output directory for the CSV and summary artifacts.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Override the config's random seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Cap the number of parallel workers.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// List the kernel and mollifier catalog with parameter schemas.
    Catalog,
    /// Parse and validate a config without running it.
    Validate {
        /// Path to the experiment config.
        config: PathBuf,
    },
}

fn load_config(path: &PathBuf) -> Result<ExperimentConfig, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    ExperimentConfig::from_toml(&text)
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::InvalidParameter(_) => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Catalog => {
            print_catalog();
            ExitCode::SUCCESS
        }
        Command::Validate { config } => match load_config(&config) {
            Ok(cfg) => {
                println!("ok: {} experiment '{}'", cfg.kind.id(), cfg.name());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
        Command::Run {
            config,
            out,
            seed,
            jobs,
        } => {
            if let Some(n) = jobs {
                // ignore failure if a pool already exists (tests)
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            let mut cfg = match load_config(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            match run_to_dir(&cfg, &out) {
                Ok(outcome) => {
                    for a in &outcome.assertions {
                        println!(
                            "[{}] {} (value {:.6e}, threshold {:.6e})",
                            if a.passed { "pass" } else { "FAIL" },
                            a.id,
                            a.value,
                            a.threshold
                        );
                    }
                    if outcome.passed() {
                        println!("{}: all assertions passed", outcome.name);
                        ExitCode::SUCCESS
                    } else {
                        eprintln!("{}: assertion failure", outcome.name);
                        ExitCode::from(1)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(exit_code_for(&e))
                }
            }
        }
    }
}

fn print_catalog() {
    // stable sorted output for doc generation
    let mollifiers = [
        ("bounded_poly", "params {d, beta in (-d, 2]}: polynomial profile on the ball of radius eps"),
        ("log_annulus", "params {d, eps0}: critical profile on the annulus eps < |x| < eps0"),
        ("power_law", "params {d}: fractional-generator profile on the unit ball"),
        ("profile", "params {d, profile in {indicator, triangle}}: scaled radial profile"),
        ("shifted_critical", "params {d, eps0}: shifted critical-exponent profile"),
        ("shifted_power", "params {d, beta in (-d, 2], eps0}: shifted polynomial profile"),
        ("shifted_ratio", "params {d, beta in (0, 2], eps0}: ratio profile"),
    ];
    let kernels = [
        ("j1", "params {d}: fractional kernel, full support"),
        ("j2", "params {d, beta > 0}: fractional near field with a power tail"),
        ("j3", "params {d}: fractional near field with a Gaussian tail"),
        ("j4", "params {d}: rescaled indicator (bounded kernel family)"),
        ("nu", "params {d, base}: the jump kernel of the base mollifier"),
        ("perturbed", "params {d, base, lambda >= 1}: seeded symmetric spatial modulation"),
        ("violator", "params {d, base}: deliberate comparison-bound violator (tests)"),
    ];
    println!("mollifier families:");
    for (id, doc) in mollifiers {
        println!("  {id:<17} {doc}");
    }
    println!("kernel kinds:");
    for (id, doc) in kernels {
        println!("  {id:<17} {doc}");
    }
}
