//! `dfkit preprocess`: scan the dataset, then sample/align/crop every video
//! in parallel. Failed videos are logged and counted; a mix of successes and
//! failures exits with the partial code.

use dfkit::manifest::{scan_dataset, ArrangeConfig};
use dfkit::preprocess::{preprocess_dataset, LogSink, ManifestLandmarks, PreprocessConfig};

use crate::{CliError, CliResult, Ctx, Outcome};

pub fn run(ctx: &Ctx) -> CliResult<Outcome> {
    let (config, snapshot) = ctx.load_config::<PreprocessConfig>()?;
    let plan = config.sampling_plan()?;
    let spec = config.crop_spec();
    spec.validate()?;

    let manifest = scan_dataset(&ArrangeConfig {
        dataset_name: config.dataset_name.clone(),
        dataset_root_path: config.dataset_root_path.clone(),
        output_file_path: config.output_root_path.join("manifest.json"),
        comp: config.comp.clone(),
        perturbation: config.perturbation.clone(),
    })?;

    let log = ctx.open_log(&config.output_root_path)?;
    log.log(&format!(
        "preprocess {}: {} records, workers={}, seed={}",
        config.dataset_name,
        manifest.videos.len(),
        ctx.workers,
        ctx.seed
    ));

    let source = ManifestLandmarks {
        root: config.dataset_root_path.clone(),
    };
    let summary = preprocess_dataset(
        &config.dataset_root_path,
        &manifest.videos,
        &config.output_root_path,
        &plan,
        &spec,
        &source,
        ctx.workers,
        &log,
    )?;

    for (video_id, message) in &summary.failures {
        log.log(&format!("FAILED {video_id}: {message}"));
    }
    log.log(&format!(
        "preprocess done: {} videos ok, {} failed",
        summary.processed.len(),
        summary.failures.len()
    ));
    println!(
        "{} videos processed, {} failed",
        summary.processed.len(),
        summary.failures.len()
    );
    ctx.write_run_manifest(&config.output_root_path, snapshot)?;

    if summary.processed.is_empty() && !summary.failures.is_empty() {
        return Err(CliError::AllFailed {
            attempted: summary.failures.len(),
            first: summary.failures[0].1.clone(),
        });
    }
    Ok(if summary.failures.is_empty() {
        Outcome::Done
    } else {
        Outcome::Partial
    })
}
