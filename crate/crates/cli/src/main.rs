//! `msmtfl`: runs the synthetic and real-data experiments and writes
//! plot-ready CSV.
//!
//! Exit status is 0 on success, 1 for usage and configuration errors and 2
//! for runtime failures (I/O, malformed data, numerical breakdown).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use msmtfl::harness::{emit_results, run_experiment, ExperimentConfig, ExperimentKind};
use msmtfl::Error;

#[derive(Parser, Debug)]
#[command(name = "msmtfl", version, about = "Multi-stage multi-task feature learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimation error at every stage of the multi-stage estimator.
    SynthStage(Common),
    /// Estimation error over the lambda grid for every algorithm.
    SynthLambda(Common),
    /// Cross-validated test nMSE / aMSE on a long-format CSV data set.
    RealCv(Common),
    /// Error-bound conditions and measured error on synthetic instances.
    Diagnose(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Synthetic size preset: small or tiny.
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    /// Seeds, e.g. `0..10` or `1,4,9`.
    #[arg(long, value_name = "LIST")]
    seeds: Option<String>,
    /// Output CSV path; standard output when omitted.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Comma list of msmtfl, lasso, l12, dirty.
    #[arg(long, value_name = "LIST")]
    algorithms: Option<String>,
    /// Maximum number of stages.
    #[arg(long, value_name = "N")]
    stages: Option<String>,
    /// Training fraction(s) for real-cv, comma separated.
    #[arg(long = "train-ratio", value_name = "R")]
    train_ratio: Option<String>,
    /// Input CSV for real-cv.
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,
    /// Any configuration key, e.g. `--set alphas=0.01,0.1`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Contract(_) => Failure::Usage(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn build_config(kind: ExperimentKind, args: &Common) -> Result<ExperimentConfig, Failure> {
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::from_file(kind, path).map_err(|e| match e {
            Error::Io { .. } => Failure::Runtime(e.to_string()),
            other => Failure::Usage(other.to_string()),
        })?,
        None => ExperimentConfig::new(kind),
    };
    let flags = [
        ("preset", args.preset.clone()),
        ("seeds", args.seeds.clone()),
        ("algorithms", args.algorithms.clone()),
        ("stages", args.stages.clone()),
        ("train_ratios", args.train_ratio.clone()),
        ("csv", args.csv.as_ref().map(|p| p.display().to_string())),
        ("out", args.out.as_ref().map(|p| p.display().to_string())),
    ];
    for (key, value) in flags {
        if let Some(value) = value {
            config.set(key, &value)?;
        }
    }
    for assignment in &args.set {
        config.apply_override(assignment)?;
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let (kind, args) = match &cli.command {
        Command::SynthStage(a) => (ExperimentKind::ErrorVsStage, a),
        Command::SynthLambda(a) => (ExperimentKind::ErrorVsLambda, a),
        Command::RealCv(a) => (ExperimentKind::RealDataCv, a),
        Command::Diagnose(a) => (ExperimentKind::Diagnose, a),
    };
    let config = build_config(kind, args)?;
    let table = run_experiment(&config).map_err(|e| Failure::Runtime(e.to_string()))?;
    match &config.out {
        Some(path) => emit_results(&table, path).map_err(|e| Failure::Runtime(e.to_string()))?,
        None => print!("{}", table.to_csv_string()),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
