//! `dfkit augment-preview`: run the configured augmentation pipeline over a
//! list of images, writing each variant plus a JSONL record of which ops
//! fired with which drawn parameters.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use dfkit::augment::{apply_pipeline, to_rgb8_checked, AugmentSettings};
use dfkit::preprocess::LogSink;
use dfkit::Error;
use serde::Deserialize;

use crate::{CliError, CliResult, Ctx, Outcome};

fn one() -> usize {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentPreviewConfig {
    pub input_paths: Vec<PathBuf>,
    pub output_root_path: PathBuf,
    /// Augmented copies per input image.
    #[serde(default = "one")]
    pub variants: usize,
    /// Pipeline knobs; omitted keys keep the training defaults.
    #[serde(default)]
    pub augment: AugmentSettings,
}

pub fn run(ctx: &Ctx) -> CliResult<Outcome> {
    let (config, snapshot) = ctx.load_config::<AugmentPreviewConfig>()?;
    if config.input_paths.is_empty() {
        return Err(CliError::Core(Error::Config {
            key: "input_paths".into(),
            message: "no input images listed".into(),
        }));
    }
    if config.variants == 0 {
        return Err(CliError::Core(Error::Config {
            key: "variants".into(),
            message: "variants must be at least 1".into(),
        }));
    }
    let pipeline = config.augment.pipeline(ctx.seed);
    pipeline.validate()?;

    fs::create_dir_all(&config.output_root_path).map_err(Error::from)?;
    let log = ctx.open_log(&config.output_root_path)?;
    log.log(&format!(
        "augment-preview: {} images x {} variants, seed={}",
        config.input_paths.len(),
        config.variants,
        ctx.seed
    ));

    let mut records = Vec::new();
    let (mut produced, mut failures) = (0usize, 0usize);
    for (i, input) in config.input_paths.iter().enumerate() {
        let loaded = image::open(input)
            .map_err(|e| Error::DecodeFailure {
                path: input.clone(),
                message: e.to_string(),
            })
            .and_then(|dynamic| to_rgb8_checked(&dynamic));
        let image = match loaded {
            Ok(img) => img,
            Err(e) => {
                failures += 1;
                log.log(&format!("FAILED {}: {e}", input.display()));
                continue;
            }
        };
        let stem = input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| format!("input{i}"));
        for variant in 0..config.variants {
            let image_index = (i * config.variants + variant) as u64;
            let (augmented, applied) = apply_pipeline(&pipeline, &image, image_index)?;
            let name = format!("{i:03}_{stem}_v{variant}.png");
            augmented
                .save(config.output_root_path.join(&name))
                .map_err(Error::from)?;
            records.push(serde_json::json!({
                "input": input.display().to_string(),
                "output": name,
                "image_index": image_index,
                "ops": applied,
            }));
            produced += 1;
        }
    }

    let mut file =
        fs::File::create(config.output_root_path.join("applied.jsonl")).map_err(Error::from)?;
    for record in &records {
        writeln!(file, "{record}").map_err(Error::from)?;
    }

    log.log(&format!("augment-preview done: {produced} variants, {failures} failures"));
    println!("{produced} variants written, {failures} failures");
    ctx.write_run_manifest(&config.output_root_path, snapshot)?;

    if produced == 0 && failures > 0 {
        return Err(CliError::AllFailed {
            attempted: failures,
            first: "all inputs failed; see run.log".into(),
        });
    }
    Ok(if failures == 0 { Outcome::Done } else { Outcome::Partial })
}
