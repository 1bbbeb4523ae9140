//! `dfkit spectrum`: average frequency spectra of a real and a fake image
//! set, exported as grayscale heatmaps and CSV grids plus their difference.

use std::fs;
use std::path::{Path, PathBuf};

use dfkit::preprocess::LogSink;
use dfkit::spectrum::{grid_to_csv, grid_to_gray, spectrum_difference, SpectrumConfig};
use dfkit::Error;
use image::RgbImage;
use serde::Deserialize;
use walkdir::WalkDir;

use crate::{CliResult, Ctx, Outcome};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumCliConfig {
    pub real_root_path: PathBuf,
    pub fake_root_path: PathBuf,
    pub output_dir_path: PathBuf,
    // Optional overrides of the analysis defaults.
    #[serde(default)]
    pub side: Option<u32>,
    #[serde(default)]
    pub sample_count: Option<usize>,
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub log_magnitude: Option<bool>,
}

impl SpectrumCliConfig {
    fn spectrum_config(&self) -> SpectrumConfig {
        let mut config = SpectrumConfig::default();
        if let Some(side) = self.side {
            config.side = side;
        }
        if let Some(count) = self.sample_count {
            config.sample_count = count;
        }
        if self.sigma.is_some() {
            config.sigma = self.sigma;
        }
        if let Some(log_magnitude) = self.log_magnitude {
            config.log_magnitude = log_magnitude;
        }
        config
    }
}

fn collect_images(root: &Path) -> CliResult<Vec<RgbImage>> {
    let mut images = Vec::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| Error::Io(e.into()))?;
        if !entry.file_type().is_file() {
            continue;
        }
        let is_image = entry
            .path()
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg" | "bmp"))
            .unwrap_or(false);
        if !is_image {
            continue;
        }
        let image = image::open(entry.path())
            .map_err(|e| Error::DecodeFailure {
                path: entry.path().to_path_buf(),
                message: e.to_string(),
            })?
            .to_rgb8();
        images.push(image);
    }
    if images.is_empty() {
        return Err(Error::EmptyDataset(root.to_path_buf()).into());
    }
    Ok(images)
}

fn export_grid(dir: &Path, stem: &str, grid: &[f64], side: u32) -> CliResult<()> {
    grid_to_gray(grid, side).save(dir.join(format!("{stem}.png"))).map_err(|e| {
        Error::DecodeFailure {
            path: dir.join(format!("{stem}.png")),
            message: e.to_string(),
        }
    })?;
    fs::write(dir.join(format!("{stem}.csv")), grid_to_csv(grid, side)).map_err(Error::from)?;
    Ok(())
}

pub fn run(ctx: &Ctx) -> CliResult<Outcome> {
    let (config, snapshot) = ctx.load_config::<SpectrumCliConfig>()?;
    let spectrum_config = config.spectrum_config();

    let reals = collect_images(&config.real_root_path)?;
    let fakes = collect_images(&config.fake_root_path)?;
    let result = spectrum_difference(&reals, &fakes, &spectrum_config, ctx.seed)?;

    fs::create_dir_all(&config.output_dir_path).map_err(Error::from)?;
    export_grid(&config.output_dir_path, "real_average", &result.real_avg, result.side)?;
    export_grid(&config.output_dir_path, "fake_average", &result.fake_avg, result.side)?;
    export_grid(&config.output_dir_path, "difference", &result.difference, result.side)?;

    let log = ctx.open_log(&config.output_dir_path)?;
    log.log(&format!(
        "spectrum: {} real + {} fake images, side {}, seed {}",
        result.n_real, result.n_fake, result.side, ctx.seed
    ));
    println!(
        "wrote spectra for {} real / {} fake images to {}",
        result.n_real,
        result.n_fake,
        config.output_dir_path.display()
    );
    ctx.write_run_manifest(&config.output_dir_path, snapshot)?;
    Ok(Outcome::Done)
}
