//! The `retrain` command line: one subcommand per pipeline stage plus
//! `pipeline`, which runs them all in order.
//!
//! Exit status is 0 on success, 1 for usage/validation problems (including a
//! missing upstream artifact) and 2 for runtime failures.

mod config;
mod report;
mod stages;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

pub use config::{
    DatasetSource, ExtractorChoice, PipelineConfig, RawConfig, Stage, KNOWN_KEYS,
};
pub use report::{emit_report, read_predictions, write_predictions, Prediction, PREDICTIONS_HEADER};
pub use stages::{
    augment, evaluate, extract, ingest, pipeline, synth, train, Artifacts, EvaluateOutcome,
    ExtractOutcome,
};

use crate::error::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),

    #[error("missing artifact {}: run `{stage}` first", path.display())]
    MissingArtifact { path: PathBuf, stage: &'static str },

    #[error(transparent)]
    Runtime(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(m) => CliError::Validation(m),
            other => CliError::Runtime(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::MissingArtifact { .. } => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "retrain", version, about = "Final-layer retraining pipeline")]
struct Cli {
    /// Pipeline config file (INI-style `key = value` with [sections]).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override a config value, e.g. `--set train.steps=1000`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Run seed; stage seeds are derived from it.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory for all artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, Subcommand)]
enum Command {
    /// Scan a directory-per-class dataset into manifest.tsv.
    Ingest,
    /// Generate a synthetic dataset and its manifest.tsv.
    Synth,
    /// Expand and resize every core image, then split into train/validation/test.
    Augment,
    /// Compute or import bottleneck vectors into the cache.
    Extract,
    /// Train the softmax layer on cached bottlenecks.
    Train,
    /// Build the confusion matrix and metric reports.
    Evaluate,
    /// Run every stage in order.
    Pipeline,
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, CliError> {
    let mut raw = match &cli.config {
        Some(path) => RawConfig::load(path).map_err(CliError::Validation)?,
        None => RawConfig::default(),
    };
    for o in &cli.overrides {
        raw.apply_override(o).map_err(CliError::Validation)?;
    }
    if let Some(seed) = cli.seed {
        raw.insert("run.seed", &seed.to_string())
            .map_err(CliError::Validation)?;
    }
    let mut config = raw.resolve().map_err(CliError::Validation)?;
    if let Some(out) = &cli.out {
        config.out_dir = out.clone();
    }
    Ok(config)
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let config = load_config(cli)?;
    match cli.command {
        Command::Ingest => ingest(&config).map(drop),
        Command::Synth => synth(&config).map(drop),
        Command::Augment => augment(&config).map(drop),
        Command::Extract => extract(&config).map(drop),
        Command::Train => train(&config).map(drop),
        Command::Evaluate => evaluate(&config).map(drop),
        Command::Pipeline => pipeline(&config),
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
