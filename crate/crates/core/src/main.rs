use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use diffnet::harness::{run_experiment, ExperimentConfig, InputFile, Mode, Overrides};
use diffnet::Error;

/// Differential dependency networks with the joint graphical lasso.
#[derive(Parser)]
#[command(name = "diffnet", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand)]
enum Command {
    /// Synthetic benchmark: precision-recall curves along the lambda2 grid.
    SynthSweep,
    /// Learn networks at one (lambda1, lambda2) setting and export them.
    Fit,
    /// Bootstrap baseline with independent learning.
    Bootstrap,
    /// Permutation-split FDR estimates along the lambda2 grid.
    Fdr,
    /// Precompute every (lambda1, lambda2) cell for interactive browsing.
    Grid,
    /// Serve a grid artifact over HTTP.
    Serve,
}

#[derive(Args)]
struct Common {
    /// TOML experiment config; flags below override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seeds, comma separated or repeated.
    #[arg(long = "seed", global = true, value_delimiter = ',')]
    seeds: Vec<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// lambda1 grid, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    lambda1: Vec<f64>,
    /// lambda2 grid, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    lambda2: Vec<f64>,
    /// Address for `serve`.
    #[arg(long, global = true)]
    bind: Option<String>,
    /// Condition data as `label=path.csv`; repeat once per condition.
    #[arg(long = "input", global = true)]
    inputs: Vec<String>,
    /// Grid artifact for `serve`.
    #[arg(long, global = true)]
    artifact: Option<PathBuf>,
    /// Static web client directory for `serve`.
    #[arg(long, global = true)]
    static_dir: Option<PathBuf>,
}

fn non_empty<T>(v: Vec<T>) -> Option<Vec<T>> {
    (!v.is_empty()).then_some(v)
}

fn build_config(cli: Cli) -> Result<ExperimentConfig, Error> {
    let mode = match cli.command {
        Command::SynthSweep => Mode::SynthSweep,
        Command::Fit => Mode::Fit,
        Command::Bootstrap => Mode::Bootstrap,
        Command::Fdr => Mode::Fdr,
        Command::Grid => Mode::Grid,
        Command::Serve => Mode::Serve,
    };
    let c = cli.common;
    let mut config = match &c.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let inputs = c.inputs.iter().map(|s| InputFile::parse(s)).collect::<Result<Vec<_>, _>>()?;
    config.apply(Overrides {
        mode: Some(mode),
        seeds: non_empty(c.seeds),
        output_dir: c.out,
        lambda1_grid: non_empty(c.lambda1),
        lambda2_grid: non_empty(c.lambda2),
        bind: c.bind,
        inputs: non_empty(inputs),
        artifact: c.artifact,
        static_dir: c.static_dir,
    });
    Ok(config)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DIFFNET_LOG", "info")).init();
    let result = build_config(Cli::parse()).and_then(|config| run_experiment(&config));
    match result {
        Ok(report) => {
            for name in &report.artifacts {
                println!("{}", report.output_dir.join(name).display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let report = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{report}");
            ExitCode::from(if matches!(e, Error::Config(_) | Error::Parse { .. }) { 2 } else { 1 })
        }
    }
}
