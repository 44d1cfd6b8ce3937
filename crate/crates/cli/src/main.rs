//! Command-line harness: configure, run, replicate, and export
//! multi-objective trust-region optimization experiments.
//!
//! Exit codes: 0 success, 1 aborted run (partial outputs written),
//! 2 configuration or argument errors.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Default output directory when neither `--out-dir` nor the config file
/// sets one.
pub const OUT_DIR_ENV: &str = "MORBO_OUT_DIR";

#[derive(Parser)]
#[command(name = "morbo", version, about = "Multi-objective trust-region Bayesian optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one optimization and write its record.
    Run(RunArgs),
    /// Run the same configuration over several seeds and aggregate.
    Replicate(ReplicateArgs),
    /// Summarize records: per-method median and interquartile hypervolume
    /// at each batch boundary, as delimited text.
    Report(ReportArgs),
    /// Export a record's final Pareto front as delimited text.
    ExportPareto(ExportArgs),
}

#[derive(Args)]
struct Overrides {
    /// RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Total evaluation budget (nf).
    #[arg(long)]
    budget: Option<usize>,
    /// Batch size (q).
    #[arg(long)]
    batch: Option<usize>,
    /// Problem name (dtlz2-<d>, mw7, welded-beam, vehicle-safety, subprocess).
    #[arg(long)]
    problem: Option<String>,
    /// Posterior sampler: `exact` or `rff:<num_features>`.
    #[arg(long)]
    sampler: Option<String>,
    /// Number of trust regions.
    #[arg(long)]
    n_tr: Option<usize>,
    /// Failure-streak tolerance before a trust region halves.
    #[arg(long)]
    tau_fail: Option<u32>,
    /// Output directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Optimizer: `morbo` or the `sobol` quasi-random baseline.
    #[arg(long, default_value = "morbo")]
    method: String,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct ReplicateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seeds, either `a..b` (inclusive) or a comma list (`1,2,3`).
    #[arg(long)]
    seeds: String,
    #[arg(long, default_value = "morbo")]
    method: String,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct ReportArgs {
    /// Record directories produced by `run` or `replicate`.
    #[arg(required = true)]
    records: Vec<PathBuf>,
    /// Write the table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    /// Record directory.
    record: PathBuf,
    /// Write the front here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => commands::run(args),
        Command::Replicate(args) => commands::replicate(args),
        Command::Report(args) => commands::report(args),
        Command::ExportPareto(args) => commands::export_pareto(args),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}
