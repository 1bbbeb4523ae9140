//! dfkit — deterministic data tooling for face-forgery detection benchmarks.
//!
//! The crate covers everything around the training loop: arranging raw
//! dataset trees into a unified manifest, preprocessing videos into aligned
//! face crops, synthesizing blended forgeries, applying the standard
//! augmentation suite, scoring stored predictions, and averaging frequency
//! spectra. All randomized stages draw from keyed counter-based streams so
//! results are byte-identical across runs and worker counts.

pub mod augment;
pub mod error;
pub mod geometry;
pub mod imageops;
pub mod landmarks;
pub mod manifest;
pub mod metrics;
pub mod preprocess;
pub mod rng;
pub mod spectrum;
pub mod synthesis;

pub use error::{Error, Result};
