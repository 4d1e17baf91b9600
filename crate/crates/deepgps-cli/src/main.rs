use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use deepgps_cli::commands::{self, model_artifact_name, DATASET_FILE};
use deepgps_cli::config::ExperimentConfig;
use deepgps_cli::error::CliError;
use deepgps_cli::presets;

/// Weakly-supervised positioning workbench.
#[derive(Parser)]
#[command(name = "deepgps", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an environment and collect a trajectory dataset.
    Collect(CommonArgs),
    /// Train the configured method on a collected dataset.
    Train(TrainArgs),
    /// Evaluate a trained artifact against the configured targets.
    Eval(EvalArgs),
    /// Run the configured noise or sample-count sweep.
    Sweep(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment configuration file (TOML).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Built-in preset name (see --preset help).
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    /// Output directory for artifacts.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Override a named seed, e.g. --seed-override init=7 (repeatable).
    #[arg(long = "seed-override", value_name = "NAME=VALUE")]
    seed_override: Vec<String>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Dataset file (defaults to <out>/dataset.jsonl).
    #[arg(long, value_name = "PATH")]
    dataset: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Trained model artifact (defaults to <out>/checkpoint.bin or
    /// <out>/baseline.json per the configured method).
    #[arg(long, value_name = "PATH")]
    model: Option<PathBuf>,
    /// Dataset file (defaults to <out>/dataset.jsonl).
    #[arg(long, value_name = "PATH")]
    dataset: Option<PathBuf>,
}

fn resolve_config(common: &CommonArgs) -> Result<ExperimentConfig, CliError> {
    let mut config = match (&common.config, &common.preset) {
        (Some(path), None) => ExperimentConfig::load(path)?,
        (None, Some(name)) => presets::load(name)?,
        (Some(_), Some(_)) => {
            return Err(CliError::InvalidConfig(
                "config: pass either --config or --preset, not both".into(),
            ))
        }
        (None, None) => {
            return Err(CliError::InvalidConfig(format!(
                "config: pass --config <path> or --preset <name> (presets: {})",
                presets::names().join(", ")
            )))
        }
    };
    for pair in &common.seed_override {
        let (name, value) = pair.split_once('=').ok_or_else(|| {
            CliError::InvalidConfig(format!("seed-override: expected NAME=VALUE, got {pair:?}"))
        })?;
        let value: u64 = value.parse().map_err(|_| {
            CliError::InvalidConfig(format!("seed-override: {value:?} is not a u64"))
        })?;
        config.override_seed(name, value)?;
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Collect(args) => {
            let config = resolve_config(&args)?;
            commands::cmd_collect(&config, &args.out)?;
        }
        Command::Train(args) => {
            let config = resolve_config(&args.common)?;
            let dataset =
                args.dataset.unwrap_or_else(|| args.common.out.join(DATASET_FILE));
            commands::cmd_train(&config, &dataset, &args.common.out)?;
        }
        Command::Eval(args) => {
            let config = resolve_config(&args.common)?;
            let dataset =
                args.dataset.clone().unwrap_or_else(|| args.common.out.join(DATASET_FILE));
            let model = args.model.clone().unwrap_or_else(|| {
                args.common.out.join(model_artifact_name(config.method.name))
            });
            commands::cmd_eval(&config, &model, &dataset, &args.common.out)?;
        }
        Command::Sweep(args) => {
            let config = resolve_config(&args)?;
            commands::cmd_sweep(&config, &args.out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.record());
            ExitCode::FAILURE
        }
    }
}
