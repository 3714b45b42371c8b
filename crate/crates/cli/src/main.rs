//! `ballistic` — experiment driver for the random-environment diffusion
//! laboratory. Runs declarative experiment configs and writes reproducible
//! reports.
//!
//! Exit status: 0 on success (or a passing verdict), 2 when the experiment
//! ran but its verdict-bearing check failed, 1 on errors.

mod config;
mod runner;

use clap::{Parser, Subcommand, ValueEnum};
use config::ExperimentConfig;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "ballistic", version, about = "Monte Carlo experiments for diffusions in random environments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OutputFormat {
    /// manifest.json and report.json only.
    Json,
    /// Additionally emit the kind-specific CSV files (default).
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML or JSON config.
    Run {
        config: PathBuf,
        /// Master seed (overrides the config).
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (overrides the config; default: all cores).
        #[arg(long)]
        workers: Option<usize>,
        /// Output directory (overrides the config; default "out").
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: OutputFormat,
    },
    /// Parse and validate a config without running it.
    Validate { config: PathBuf },
    /// Print the regularity report of the configured environment.
    DescribeEnv {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
    },
}

fn with_pool<T>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> anyhow::Result<T>
where
    T: Send,
{
    match workers {
        Some(n) if n > 0 => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build()?;
            Ok(pool.install(f))
        }
        _ => Ok(f()),
    }
}

fn main() -> ExitCode {
    match try_main() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn try_main() -> anyhow::Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, seed, workers, out, format } => {
            let parsed = ExperimentConfig::from_path(&config)?;
            let master_seed = seed.unwrap_or_else(|| parsed.master_seed());
            let workers = workers.or(parsed.workers);
            let out_dir = out
                .or_else(|| parsed.out.clone())
                .unwrap_or_else(|| PathBuf::from("out"));
            let write_csv = matches!(format, OutputFormat::Csv);
            let outcome =
                with_pool(workers, || runner::run(&parsed, master_seed, &out_dir, write_csv))??;
            println!("report: {}", outcome.report_path.display());
            match outcome.verdict {
                Some(false) => {
                    println!("verdict: FAIL");
                    Ok(ExitCode::from(2))
                }
                Some(true) => {
                    println!("verdict: PASS");
                    Ok(ExitCode::SUCCESS)
                }
                None => Ok(ExitCode::SUCCESS),
            }
        }
        Command::Validate { config } => {
            let parsed = ExperimentConfig::from_path(&config)?;
            println!("ok: kind = {}", parsed.kind()?.name());
            Ok(ExitCode::SUCCESS)
        }
        Command::DescribeEnv { config, seed, workers } => {
            let parsed = ExperimentConfig::from_path(&config)?;
            let master_seed = seed.unwrap_or_else(|| parsed.master_seed());
            let params = parsed.regularity.clone().unwrap_or_default();
            let report = with_pool(workers, || {
                runner::describe_environment(&parsed, master_seed, &params)
            })??;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(ExitCode::SUCCESS)
        }
    }
}
