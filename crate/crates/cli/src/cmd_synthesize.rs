//! `dfkit synthesize`: blended-forgery generation from a preprocessed tree.
//!
//! Input layout is the preprocess output: `<video>/frames/NNNN.png` with
//! sibling `landmarks/NNNN.json`. `fwa` degrades and re-blends each face into
//! itself; `xray` composites each sampled face into its nearest-landmark
//! neighbor from the whole pool.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use dfkit::landmarks::LandmarkSet;
use dfkit::preprocess::LogSink;
use dfkit::synthesis::{fwa_generate, BlendRecipe, XrayStream};
use dfkit::Error;
use image::RgbImage;
use serde::Deserialize;

use crate::{CliError, CliResult, Ctx, Outcome};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesizeConfig {
    pub input_root_path: PathBuf,
    pub output_root_path: PathBuf,
    /// "fwa" or "xray".
    pub method: String,
    /// Cap on generated samples; defaults to one per input face.
    #[serde(default)]
    pub max_samples: Option<usize>,
}

/// Frame image plus its landmark file, sorted by path for determinism.
fn collect_faces(root: &Path) -> Vec<(PathBuf, PathBuf)> {
    let mut out = Vec::new();
    for entry in walkdir::WalkDir::new(root)
        .sort_by_file_name()
        .into_iter()
        .filter_map(|e| e.ok())
    {
        if !entry.file_type().is_file() {
            continue;
        }
        let path = entry.path();
        let is_image = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
            .unwrap_or(false);
        if !is_image {
            continue;
        }
        let Some(parent) = path.parent() else { continue };
        if parent.file_name().and_then(|n| n.to_str()) != Some("frames") {
            continue;
        }
        let Some(video_dir) = parent.parent() else { continue };
        let Some(stem) = path.file_stem() else { continue };
        let landmark = video_dir.join("landmarks").join(stem).with_extension("json");
        if landmark.is_file() {
            out.push((path.to_path_buf(), landmark));
        }
    }
    out
}

fn load_face(image_path: &Path, landmark_path: &Path) -> dfkit::Result<(RgbImage, LandmarkSet)> {
    let image = image::open(image_path)
        .map_err(|e| Error::DecodeFailure {
            path: image_path.to_path_buf(),
            message: e.to_string(),
        })?
        .to_rgb8();
    let landmarks = LandmarkSet::read_json(landmark_path)?;
    Ok((image, landmarks))
}

fn rel_str(root: &Path, path: &Path) -> String {
    path.strip_prefix(root)
        .unwrap_or(path)
        .to_string_lossy()
        .replace('\\', "/")
}

pub fn run(ctx: &Ctx) -> CliResult<Outcome> {
    let (config, snapshot) = ctx.load_config::<SynthesizeConfig>()?;
    let faces = collect_faces(&config.input_root_path);
    if faces.is_empty() {
        return Err(CliError::Core(Error::EmptyDataset(
            config.input_root_path.clone(),
        )));
    }
    let log = ctx.open_log(&config.output_root_path)?;
    log.log(&format!(
        "synthesize {} over {} faces, seed={}",
        config.method,
        faces.len(),
        ctx.seed
    ));

    let (produced, failures) = match config.method.as_str() {
        "fwa" => run_fwa(ctx, &config, &faces, &log)?,
        "xray" => run_xray(ctx, &config, &faces, &log)?,
        other => {
            return Err(CliError::Core(Error::Config {
                key: "method".into(),
                message: format!("unknown method {other:?} (use fwa or xray)"),
            }))
        }
    };

    log.log(&format!("synthesize done: {produced} samples, {failures} failures"));
    println!("{produced} samples written, {failures} failures");
    ctx.write_run_manifest(&config.output_root_path, snapshot)?;

    if produced == 0 && failures > 0 {
        return Err(CliError::AllFailed {
            attempted: failures,
            first: "all faces failed; see run.log".into(),
        });
    }
    Ok(if failures == 0 { Outcome::Done } else { Outcome::Partial })
}

/// Degrade-and-reblend each face into itself, mirroring the input layout.
fn run_fwa(
    ctx: &Ctx,
    config: &SynthesizeConfig,
    faces: &[(PathBuf, PathBuf)],
    log: &dyn LogSink,
) -> CliResult<(usize, usize)> {
    let limit = config.max_samples.unwrap_or(faces.len());
    let mut provenance = Vec::new();
    let (mut produced, mut failures) = (0usize, 0usize);
    for (k, (image_path, landmark_path)) in faces.iter().take(limit).enumerate() {
        let recipe = BlendRecipe::new(ctx.seed, k as u64);
        let result = load_face(image_path, landmark_path)
            .and_then(|(face, landmarks)| fwa_generate(&face, &landmarks, &recipe));
        let (forged, mask) = match result {
            Ok(pair) => pair,
            Err(e) => {
                failures += 1;
                log.log(&format!("FAILED {}: {e}", image_path.display()));
                continue;
            }
        };
        let rel = rel_str(&config.input_root_path, image_path);
        let video_rel = Path::new(&rel)
            .parent()
            .and_then(|p| p.parent())
            .unwrap_or(Path::new(""));
        let stem = Path::new(&rel).file_stem().unwrap().to_string_lossy();
        let video_out = config.output_root_path.join(video_rel);
        fs::create_dir_all(video_out.join("frames")).map_err(Error::from)?;
        fs::create_dir_all(video_out.join("masks")).map_err(Error::from)?;
        forged
            .save(video_out.join("frames").join(format!("{stem}.png")))
            .map_err(Error::from)?;
        mask.to_gray_image()
            .save(video_out.join("masks").join(format!("{stem}.png")))
            .map_err(Error::from)?;
        provenance.push(serde_json::json!({
            "index": k,
            "source": rel,
            "scale": recipe.resolve_scale(),
        }));
        produced += 1;
    }
    write_jsonl(&config.output_root_path.join("samples.jsonl"), &provenance)?;
    Ok((produced, failures))
}

/// Composite sampled faces into their nearest-landmark neighbors.
fn run_xray(
    ctx: &Ctx,
    config: &SynthesizeConfig,
    face_files: &[(PathBuf, PathBuf)],
    log: &dyn LogSink,
) -> CliResult<(usize, usize)> {
    let mut faces = Vec::new();
    let mut rels = Vec::new();
    let mut failures = 0usize;
    for (image_path, landmark_path) in face_files {
        match load_face(image_path, landmark_path) {
            Ok(pair) => {
                faces.push(pair);
                rels.push(rel_str(&config.input_root_path, image_path));
            }
            Err(e) => {
                failures += 1;
                log.log(&format!("FAILED {}: {e}", image_path.display()));
            }
        }
    }
    if faces.len() < 2 {
        return Err(CliError::Core(Error::Config {
            key: "input_root_path".into(),
            message: format!(
                "xray needs at least two readable faces with landmarks, found {}",
                faces.len()
            ),
        }));
    }

    for sub in ["forged", "masks", "boundaries"] {
        fs::create_dir_all(config.output_root_path.join(sub)).map_err(Error::from)?;
    }
    let limit = config.max_samples.unwrap_or(faces.len());
    let mut provenance = Vec::new();
    let mut produced = 0usize;
    for (k, sample) in XrayStream::new(&faces, ctx.seed).take(limit).enumerate() {
        let sample = match sample {
            Ok(s) => s,
            Err(e) => {
                failures += 1;
                log.log(&format!("FAILED sample {k}: {e}"));
                continue;
            }
        };
        let name = format!("{k:06}.png");
        sample
            .forged
            .save(config.output_root_path.join("forged").join(&name))
            .map_err(Error::from)?;
        sample
            .mask
            .to_gray_image()
            .save(config.output_root_path.join("masks").join(&name))
            .map_err(Error::from)?;
        sample
            .boundary
            .to_gray_image()
            .save(config.output_root_path.join("boundaries").join(&name))
            .map_err(Error::from)?;
        provenance.push(serde_json::json!({
            "index": k,
            "foreground": rels[sample.fg_index],
            "background": rels[sample.bg_index],
        }));
        produced += 1;
    }
    write_jsonl(&config.output_root_path.join("samples.jsonl"), &provenance)?;
    Ok((produced, failures))
}

fn write_jsonl(path: &Path, lines: &[serde_json::Value]) -> CliResult<()> {
    let mut file = fs::File::create(path).map_err(Error::from)?;
    for line in lines {
        writeln!(file, "{line}").map_err(Error::from)?;
    }
    Ok(())
}
