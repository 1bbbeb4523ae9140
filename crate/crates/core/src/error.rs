//! Crate-wide error type.

use std::path::PathBuf;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown dataset `{name}` (supported: {supported})")]
    UnknownDataset { name: String, supported: String },

    #[error("dataset root does not exist: {0}")]
    MissingRoot(PathBuf),

    #[error("no videos found under {0}")]
    EmptyDataset(PathBuf),

    #[error("split list not found: {0}")]
    SplitListMissing(PathBuf),

    #[error("invalid config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("invalid sampling plan: {0}")]
    InvalidPlan(String),

    #[error("degenerate landmarks: {0}")]
    DegenerateLandmarks(String),

    #[error("dimension mismatch: expected {expected_w}x{expected_h}, got {got_w}x{got_h}")]
    DimensionMismatch {
        expected_w: u32,
        expected_h: u32,
        got_w: u32,
        got_h: u32,
    },

    #[error("failed to decode {path}: {message}")]
    DecodeFailure { path: PathBuf, message: String },

    #[error("unsupported image depth: {0}")]
    UnsupportedImageDepth(String),

    #[error("records contain a single class; need both positives and negatives")]
    SingleClass,

    #[error("records contain no positive labels")]
    NoPositives,

    #[error("empty metric series")]
    EmptySeries,

    #[error("empty image set")]
    EmptySet,

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("landmark file {path}: {message}")]
    LandmarkFormat { path: PathBuf, message: String },

    #[error("non-invertible transform")]
    SingularTransform,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Yaml(#[from] serde_yaml::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}
