//! `dfkit` command line: each subcommand reads one YAML config, derives all
//! randomness from a single `--seed`, and leaves a `run_manifest.json` plus a
//! timestamped log beside its outputs. Worker count changes wall time only,
//! never output bytes.

mod cmd_arrange;
mod cmd_augment;
mod cmd_eval;
mod cmd_preprocess;
mod cmd_spectrum;
mod cmd_synthesize;
mod runlog;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use chrono::{DateTime, SecondsFormat, Utc};
use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;

#[derive(Parser)]
#[command(
    name = "dfkit",
    version,
    about = "Deepfake dataset tooling: arrange, preprocess, synthesize, augment, evaluate, and spectrum analysis"
)]
struct Cli {
    /// YAML configuration for the chosen command
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Master seed; every random stream is derived from it
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Worker threads; 0 means one per logical CPU
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    /// Run log file (default: run.log beside the command's outputs)
    #[arg(long, global = true, value_name = "FILE")]
    log: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Scan a raw dataset tree and write the unified manifest
    Arrange,
    /// Sample, align, and crop faces (and masks) across a dataset
    Preprocess,
    /// Blend forgeries from a preprocessed tree
    Synthesize,
    /// Run the augmentation pipeline over images and record what fired
    AugmentPreview,
    /// Score a prediction dump into a metric table and curve files
    Eval,
    /// Average frequency spectra of real and fake sets, plus their difference
    Spectrum,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Arrange => "arrange",
            Command::Preprocess => "preprocess",
            Command::Synthesize => "synthesize",
            Command::AugmentPreview => "augment-preview",
            Command::Eval => "eval",
            Command::Spectrum => "spectrum",
        }
    }
}

/// A finished run: everything worked, or some work units failed while others
/// succeeded (exit 2, failures enumerated in the log).
pub enum Outcome {
    Done,
    Partial,
}

#[derive(Debug)]
pub enum CliError {
    Core(dfkit::Error),
    MissingConfig,
    /// Every work unit failed; distinct from partial failure.
    AllFailed { attempted: usize, first: String },
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => e.fmt(f),
            CliError::MissingConfig => write!(f, "missing --config <FILE> for this command"),
            CliError::AllFailed { attempted, first } => {
                write!(f, "all {attempted} work units failed; first error: {first}")
            }
        }
    }
}

impl From<dfkit::Error> for CliError {
    fn from(e: dfkit::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    /// Stable machine-readable tag for the stderr error report.
    fn kind(&self) -> &'static str {
        use dfkit::Error::*;
        match self {
            CliError::MissingConfig => "config_schema",
            CliError::AllFailed { .. } => "total_failure",
            CliError::Core(e) => match e {
                UnknownDataset { .. } => "unknown_dataset",
                MissingRoot(_) => "missing_root",
                EmptyDataset(_) => "empty_dataset",
                SplitListMissing(_) => "split_list_missing",
                Config { .. } => "config_schema",
                InvalidPlan(_) => "invalid_plan",
                DegenerateLandmarks(_) => "degenerate_landmarks",
                DimensionMismatch { .. } => "dimension_mismatch",
                DecodeFailure { .. } => "decode_failure",
                UnsupportedImageDepth(_) => "unsupported_image_depth",
                SingleClass => "single_class",
                NoPositives => "no_positives",
                EmptySeries => "empty_series",
                EmptySet => "empty_set",
                Parse { .. } => "parse",
                LandmarkFormat { .. } => "landmark_format",
                SingularTransform => "singular_transform",
                Io(_) => "io",
                Csv(_) => "csv",
                Json(_) => "json",
                Yaml(_) => "config_schema",
                Image(_) => "image",
            },
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Per-run state shared by every command.
pub struct Ctx {
    command_name: &'static str,
    config_path: PathBuf,
    pub seed: u64,
    pub workers: usize,
    log_override: Option<PathBuf>,
    started_at: DateTime<Utc>,
    clock: Instant,
}

impl Ctx {
    /// Parse the YAML config twice: once typed, once raw for the
    /// run-manifest snapshot.
    pub fn load_config<T: DeserializeOwned>(&self) -> CliResult<(T, serde_json::Value)> {
        let text = std::fs::read_to_string(&self.config_path)
            .map_err(|e| CliError::Core(e.into()))?;
        let typed: T = serde_yaml::from_str(&text).map_err(|e| CliError::Core(e.into()))?;
        let raw: serde_yaml::Value =
            serde_yaml::from_str(&text).map_err(|e| CliError::Core(e.into()))?;
        let snapshot = serde_json::to_value(&raw).map_err(|e| CliError::Core(e.into()))?;
        Ok((typed, snapshot))
    }

    pub fn open_log(&self, default_dir: &Path) -> CliResult<runlog::FileLog> {
        let path = self
            .log_override
            .clone()
            .unwrap_or_else(|| default_dir.join("run.log"));
        runlog::FileLog::create(&path).map_err(CliError::Core)
    }

    /// Write `run_manifest.json` into `out_dir`. Reruns with the same config
    /// and seed differ only in `started_at` and `wall_time_ms`.
    pub fn write_run_manifest(
        &self,
        out_dir: &Path,
        config_snapshot: serde_json::Value,
    ) -> CliResult<()> {
        runlog::write_run_manifest(
            out_dir,
            &runlog::RunManifest {
                command: self.command_name,
                tool_version: env!("CARGO_PKG_VERSION"),
                seed: self.seed,
                workers: self.workers,
                config_path: self.config_path.display().to_string(),
                config: config_snapshot,
                started_at: self
                    .started_at
                    .to_rfc3339_opts(SecondsFormat::Millis, true),
                wall_time_ms: self.clock.elapsed().as_millis(),
            },
        )
        .map_err(CliError::Core)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let workers = if cli.workers == 0 {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    } else {
        cli.workers
    };
    let Some(config_path) = cli.config else {
        report_error(&CliError::MissingConfig);
        return ExitCode::from(1);
    };
    let ctx = Ctx {
        command_name: cli.command.name(),
        config_path,
        seed: cli.seed,
        workers,
        log_override: cli.log,
        started_at: Utc::now(),
        clock: Instant::now(),
    };
    let result = match cli.command {
        Command::Arrange => cmd_arrange::run(&ctx),
        Command::Preprocess => cmd_preprocess::run(&ctx),
        Command::Synthesize => cmd_synthesize::run(&ctx),
        Command::AugmentPreview => cmd_augment::run(&ctx),
        Command::Eval => cmd_eval::run(&ctx),
        Command::Spectrum => cmd_spectrum::run(&ctx),
    };
    match result {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Partial) => ExitCode::from(2),
        Err(err) => {
            report_error(&err);
            ExitCode::from(1)
        }
    }
}

fn report_error(err: &CliError) {
    eprintln!(
        "{}",
        serde_json::json!({ "error": err.to_string(), "kind": err.kind() })
    );
}
