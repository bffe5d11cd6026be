//! Command-line front end for the experiment harness.
//!
//! Exit codes: 0 success, 1 config error, 2 runtime/training error,
//! 3 benchmark completed with partial failures.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pite::harness::{
    cmd_benchmark, cmd_generate, cmd_report, cmd_sweep, cmd_train, BenchmarkConfig,
    GenerateConfig, SweepConfig, TrainJobConfig,
};
use pite::Error;

#[derive(Parser)]
#[command(
    name = "pite",
    about = "Prototype-aligned treatment effect estimation: data generation, training, benchmarks, sweeps, reports",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON config file; omit to run with built-in defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the config's base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Parallel replication workers (benchmark and sweep only).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic benchmark replications plus a manifest.
    Generate(ConfigArgs),
    /// Train one model; writes checkpoint, JSON-lines log, and metadata.
    Train(ConfigArgs),
    /// Replicated comparison of estimators with mean(std) tables.
    Benchmark(ConfigArgs),
    /// Grid search over prototype hyperparameters.
    Sweep(ConfigArgs),
    /// Regenerate tables and representation dumps from a results directory.
    Report {
        /// Directory containing results_raw.json (and optionally repr/).
        #[arg(long)]
        results: PathBuf,
        /// Write regenerated outputs here instead of into --results.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config<T: serde::de::DeserializeOwned + Default>(
    path: &Option<PathBuf>,
) -> Result<T, Error> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text =
                std::fs::read_to_string(p).map_err(|e| Error::io(p.display().to_string(), e))?;
            serde_json::from_str(&text).map_err(|e| Error::Parse {
                path: p.display().to_string(),
                line: e.line(),
                column: e.column().to_string(),
                msg: e.to_string(),
            })
        }
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Generate(args) => {
            let mut cfg: GenerateConfig = load_config(&args.config)?;
            if let Some(seed) = args.seed {
                cfg.seed_base = seed;
            }
            if let Some(out) = args.out {
                cfg.out_dir = out;
            }
            let manifest = cmd_generate(&cfg)?;
            println!(
                "generated {} datasets under {} (manifest.json written)",
                manifest.entries.len(),
                cfg.out_dir.display()
            );
            Ok(0)
        }
        Command::Train(args) => {
            let mut cfg: TrainJobConfig = load_config(&args.config)?;
            if let Some(seed) = args.seed {
                cfg.train.seed = seed;
            }
            if let Some(out) = args.out {
                cfg.out_dir = out;
            }
            let summary = cmd_train(&cfg)?;
            println!(
                "trained {} epochs; best epoch {} (valid loss {:.6}); checkpoint at {}",
                summary.epochs_run, summary.best_epoch, summary.best_valid_loss, summary.checkpoint
            );
            Ok(0)
        }
        Command::Benchmark(args) => {
            let mut cfg: BenchmarkConfig = load_config(&args.config)?;
            if let Some(seed) = args.seed {
                cfg.seed_base = seed;
            }
            if let Some(out) = args.out {
                cfg.out_dir = out;
            }
            if let Some(jobs) = args.jobs {
                cfg.jobs = jobs;
            }
            let out = cmd_benchmark(&cfg)?;
            println!(
                "benchmark finished: {} records, {} aggregate cells, {} failures; tables under {}",
                out.records.len(),
                out.aggregates.len(),
                out.partial_failures,
                cfg.out_dir.display()
            );
            Ok(if out.partial_failures > 0 { 3 } else { 0 })
        }
        Command::Sweep(args) => {
            let mut cfg: SweepConfig = load_config(&args.config)?;
            if let Some(seed) = args.seed {
                cfg.benchmark.seed_base = seed;
            }
            if let Some(out) = args.out {
                cfg.benchmark.out_dir = out;
            }
            if let Some(jobs) = args.jobs {
                cfg.benchmark.jobs = jobs;
            }
            let out = cmd_sweep(&cfg)?;
            println!(
                "sweep finished: {} runs, {} aggregate rows, {} failures; argmin per metric in sweep.json under {}",
                out.runs,
                out.rows.len(),
                out.partial_failures,
                cfg.benchmark.out_dir.display()
            );
            Ok(if out.partial_failures > 0 { 3 } else { 0 })
        }
        Command::Report { results, out } => {
            let summary = cmd_report(&results, out.as_deref())?;
            println!(
                "report over {} runs: {} aggregate cells, {} uniformity rows, written to {}",
                summary.runs, summary.aggregate_cells, summary.uniformity_rows, summary.out_dir
            );
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 1 } else { 2 })
        }
    }
}
