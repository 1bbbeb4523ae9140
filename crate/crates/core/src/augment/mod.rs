//! The training-time augmentation pipeline: horizontal flip, rotation,
//! isotropic resize, brightness/contrast, FancyPCA, HSV shift, JPEG
//! round-trip, and Gaussian blur, all driven by a counter-based RNG so the
//! result depends only on `(seed, image_index)`.

use image::{DynamicImage, RgbImage};
use nalgebra::Matrix3;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Affine;
use crate::imageops::{
    gaussian_blur_rgb_ksize, resize_area_rgb, resize_bicubic_rgb, resize_bilinear_rgb,
    warp_bilinear_rgb,
};
use crate::rng::keyed_rng;

/// One augmentation transform plus its parameter ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AugmentKind {
    Hflip,
    Rotate {
        /// Angle range in degrees, inclusive.
        limit_deg: [f64; 2],
    },
    IsotropicResize {
        /// The longest output side; aspect ratio is preserved. Interpolation
        /// is drawn per application from {area, linear, cubic}.
        max_side: u32,
    },
    BrightnessContrast {
        brightness_limit: [f64; 2],
        contrast_limit: [f64; 2],
    },
    FancyPca {
        /// Standard deviation of the per-component normal draws.
        alpha_std: f64,
    },
    Hsv {
        hue_shift_deg: f64,
        sat_shift: f64,
        val_shift: f64,
    },
    JpegCompress {
        quality_lower: u8,
        quality_upper: u8,
    },
    GaussianBlur {
        /// Kernel size range; only odd sizes inside it are drawn.
        blur_limit: [u32; 2],
    },
}

impl AugmentKind {
    fn name(&self) -> &'static str {
        match self {
            AugmentKind::Hflip => "hflip",
            AugmentKind::Rotate { .. } => "rotate",
            AugmentKind::IsotropicResize { .. } => "isotropic_resize",
            AugmentKind::BrightnessContrast { .. } => "brightness_contrast",
            AugmentKind::FancyPca { .. } => "fancy_pca",
            AugmentKind::Hsv { .. } => "hsv",
            AugmentKind::JpegCompress { .. } => "jpeg_compress",
            AugmentKind::GaussianBlur { .. } => "gaussian_blur",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentOp {
    #[serde(flatten)]
    pub kind: AugmentKind,
    pub probability: f64,
}

impl AugmentOp {
    pub fn new(kind: AugmentKind, probability: f64) -> Self {
        AugmentOp { kind, probability }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.probability) {
            return Err(Error::Config {
                key: self.kind.name().into(),
                message: format!("probability {} outside [0, 1]", self.probability),
            });
        }
        let range_err = |message: String| Error::Config {
            key: self.kind.name().into(),
            message,
        };
        match &self.kind {
            AugmentKind::Rotate { limit_deg } if limit_deg[0] > limit_deg[1] => {
                Err(range_err(format!("empty angle range {:?}", limit_deg)))
            }
            AugmentKind::IsotropicResize { max_side: 0 } => {
                Err(range_err("max_side must be positive".into()))
            }
            AugmentKind::BrightnessContrast {
                brightness_limit,
                contrast_limit,
            } if brightness_limit[0] > brightness_limit[1]
                || contrast_limit[0] > contrast_limit[1] =>
            {
                Err(range_err("empty brightness/contrast range".into()))
            }
            AugmentKind::FancyPca { alpha_std } if *alpha_std < 0.0 => {
                Err(range_err("alpha_std must be non-negative".into()))
            }
            AugmentKind::JpegCompress {
                quality_lower,
                quality_upper,
            } if quality_lower > quality_upper
                || *quality_lower == 0
                || *quality_upper > 100 =>
            {
                Err(range_err(format!(
                    "quality range [{}, {}] invalid",
                    quality_lower, quality_upper
                )))
            }
            AugmentKind::GaussianBlur { blur_limit }
                if odd_values(blur_limit).is_empty() =>
            {
                Err(range_err(format!(
                    "no odd kernel sizes >= 3 in {:?}",
                    blur_limit
                )))
            }
            _ => Ok(()),
        }
    }
}

fn odd_values(limit: &[u32; 2]) -> Vec<u32> {
    (limit[0].max(3)..=limit[1]).filter(|k| k % 2 == 1).collect()
}

/// What one op did to one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppliedOp {
    pub op: String,
    pub fired: bool,
    /// Drawn parameters, empty when the op did not fire.
    pub params: Vec<(String, f64)>,
}

pub type AppliedLog = Vec<AppliedOp>;

/// Reject non-8-bit inputs up front; everything downstream assumes RGB8.
pub fn to_rgb8_checked(image: &DynamicImage) -> Result<RgbImage> {
    match image {
        DynamicImage::ImageRgb8(img) => Ok(img.clone()),
        DynamicImage::ImageRgba8(_) | DynamicImage::ImageLuma8(_) | DynamicImage::ImageLumaA8(_) => {
            Ok(image.to_rgb8())
        }
        other => Err(Error::UnsupportedImageDepth(format!("{:?}", other.color()))),
    }
}

/// Apply one op, drawing the fire decision and any parameters from `rng`.
pub fn apply(op: &AugmentOp, image: &RgbImage, rng: &mut impl Rng) -> Result<(RgbImage, AppliedOp)> {
    op.validate()?;
    let fired = rng.gen::<f64>() < op.probability;
    if !fired {
        return Ok((
            image.clone(),
            AppliedOp {
                op: op.kind.name().into(),
                fired: false,
                params: vec![],
            },
        ));
    }
    let mut params = Vec::new();
    let out = match &op.kind {
        AugmentKind::Hflip => image::imageops::flip_horizontal(image),
        AugmentKind::Rotate { limit_deg } => {
            let theta = draw_range(rng, limit_deg[0], limit_deg[1]);
            params.push(("angle_deg".into(), theta));
            rotate_about_center(image, theta)
        }
        AugmentKind::IsotropicResize { max_side } => {
            let interp = rng.gen_range(0u32..3);
            params.push(("interp".into(), interp as f64));
            let longest = image.width().max(image.height());
            let scale = *max_side as f64 / longest as f64;
            params.push(("scale".into(), scale));
            let w = ((image.width() as f64 * scale).round() as u32).max(1);
            let h = ((image.height() as f64 * scale).round() as u32).max(1);
            if (w, h) == image.dimensions() {
                image.clone()
            } else {
                match interp {
                    0 => resize_area_rgb(image, w, h),
                    1 => resize_bilinear_rgb(image, w, h),
                    _ => resize_bicubic_rgb(image, w, h),
                }
            }
        }
        AugmentKind::BrightnessContrast {
            brightness_limit,
            contrast_limit,
        } => {
            let brightness = draw_range(rng, brightness_limit[0], brightness_limit[1]);
            let contrast = draw_range(rng, contrast_limit[0], contrast_limit[1]);
            params.push(("brightness".into(), brightness));
            params.push(("contrast".into(), contrast));
            map_channels(image, |v| v * (1.0 + contrast) + brightness * 255.0)
        }
        AugmentKind::FancyPca { alpha_std } => {
            let alphas = [
                normal_draw(rng, *alpha_std),
                normal_draw(rng, *alpha_std),
                normal_draw(rng, *alpha_std),
            ];
            for (i, a) in alphas.iter().enumerate() {
                params.push((format!("alpha_{}", i), *a));
            }
            fancy_pca(image, &alphas)
        }
        AugmentKind::Hsv {
            hue_shift_deg,
            sat_shift,
            val_shift,
        } => {
            let dh = draw_range(rng, -hue_shift_deg, *hue_shift_deg);
            let ds = draw_range(rng, -sat_shift, *sat_shift);
            let dv = draw_range(rng, -val_shift, *val_shift);
            params.push(("hue_deg".into(), dh));
            params.push(("sat".into(), ds));
            params.push(("val".into(), dv));
            if dh == 0.0 && ds == 0.0 && dv == 0.0 {
                image.clone()
            } else {
                hsv_shift(image, dh, ds, dv)
            }
        }
        AugmentKind::JpegCompress {
            quality_lower,
            quality_upper,
        } => {
            let quality = rng.gen_range(*quality_lower..=*quality_upper);
            params.push(("quality".into(), quality as f64));
            jpeg_roundtrip(image, quality)?
        }
        AugmentKind::GaussianBlur { blur_limit } => {
            let choices = odd_values(blur_limit);
            let ksize = choices[rng.gen_range(0..choices.len())];
            params.push(("ksize".into(), ksize as f64));
            gaussian_blur_rgb_ksize(image, ksize)
        }
    };
    Ok((
        out,
        AppliedOp {
            op: op.kind.name().into(),
            fired: true,
            params,
        },
    ))
}

fn draw_range(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..hi)
    }
}

/// Box-Muller normal draw.
fn normal_draw(rng: &mut impl Rng, std: f64) -> f64 {
    if std == 0.0 {
        return 0.0;
    }
    let u1: f64 = rng.gen_range(1e-12..1.0);
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos() * std
}

/// Rotate about the pixel-grid center with black fill. `theta_deg == 0`
/// returns an exact copy.
fn rotate_about_center(image: &RgbImage, theta_deg: f64) -> RgbImage {
    if theta_deg == 0.0 {
        return image.clone();
    }
    let theta = theta_deg.to_radians();
    let cx = (image.width() as f64 - 1.0) / 2.0;
    let cy = (image.height() as f64 - 1.0) / 2.0;
    let (s, c) = theta.sin_cos();
    // p_out = R(p_src - c) + c
    let tx = cx - (c * cx - s * cy);
    let ty = cy - (s * cx + c * cy);
    let map = Affine::similarity(theta, 1.0, tx, ty);
    warp_bilinear_rgb(image, &map, image.width(), image.height())
}

fn map_channels(image: &RgbImage, f: impl Fn(f64) -> f64) -> RgbImage {
    let mut out = image.clone();
    for p in out.pixels_mut() {
        for c in 0..3 {
            p[c] = f(p[c] as f64).round().clamp(0.0, 255.0) as u8;
        }
    }
    out
}

/// AlexNet-style PCA color jitter: shift every pixel along the principal
/// axes of the image's channel covariance, weighted by `alpha_i * lambda_i`.
fn fancy_pca(image: &RgbImage, alphas: &[f64; 3]) -> RgbImage {
    let n = (image.width() * image.height()) as f64;
    if n == 0.0 {
        return image.clone();
    }
    let mut mean = [0.0f64; 3];
    for p in image.pixels() {
        for c in 0..3 {
            mean[c] += p[c] as f64 / 255.0;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut cov = Matrix3::zeros();
    for p in image.pixels() {
        let d = [
            p[0] as f64 / 255.0 - mean[0],
            p[1] as f64 / 255.0 - mean[1],
            p[2] as f64 / 255.0 - mean[2],
        ];
        for r in 0..3 {
            for c in 0..3 {
                cov[(r, c)] += d[r] * d[c];
            }
        }
    }
    cov /= n;
    if cov.iter().all(|v| v.abs() < 1e-15) {
        return image.clone();
    }
    let eig = cov.symmetric_eigen();
    let mut delta = [0.0f64; 3];
    for (i, alpha) in alphas.iter().enumerate() {
        let w = alpha * eig.eigenvalues[i];
        for (c, d) in delta.iter_mut().enumerate() {
            *d += eig.eigenvectors[(c, i)] * w;
        }
    }
    let mut out = image.clone();
    for p in out.pixels_mut() {
        for c in 0..3 {
            p[c] = (p[c] as f64 + delta[c] * 255.0).round().clamp(0.0, 255.0) as u8;
        }
    }
    out
}

fn rgb_to_hsv(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        60.0 * (((g - b) / delta).rem_euclid(6.0))
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    let s = if max == 0.0 { 0.0 } else { delta / max };
    (h, s, max)
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> (f64, f64, f64) {
    let c = v * s;
    let hp = (h.rem_euclid(360.0)) / 60.0;
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    (r + m, g + m, b + m)
}

fn hsv_shift(image: &RgbImage, dh: f64, ds: f64, dv: f64) -> RgbImage {
    let mut out = image.clone();
    for p in out.pixels_mut() {
        let (h, s, v) = rgb_to_hsv(
            p[0] as f64 / 255.0,
            p[1] as f64 / 255.0,
            p[2] as f64 / 255.0,
        );
        let (r, g, b) = hsv_to_rgb(
            (h + dh).rem_euclid(360.0),
            (s * (1.0 + ds)).clamp(0.0, 1.0),
            (v * (1.0 + dv)).clamp(0.0, 1.0),
        );
        *p = image::Rgb([
            (r * 255.0).round().clamp(0.0, 255.0) as u8,
            (g * 255.0).round().clamp(0.0, 255.0) as u8,
            (b * 255.0).round().clamp(0.0, 255.0) as u8,
        ]);
    }
    out
}

fn jpeg_roundtrip(image: &RgbImage, quality: u8) -> Result<RgbImage> {
    let mut buf = Vec::new();
    let encoder = image::codecs::jpeg::JpegEncoder::new_with_quality(&mut buf, quality);
    image.write_with_encoder(encoder)?;
    Ok(image::load_from_memory(&buf)?.to_rgb8())
}

/// Ordered op list plus the run seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentPipeline {
    pub ops: Vec<AugmentOp>,
    pub seed: u64,
}

impl AugmentPipeline {
    pub fn new(ops: Vec<AugmentOp>, seed: u64) -> Self {
        AugmentPipeline { ops, seed }
    }

    pub fn validate(&self) -> Result<()> {
        self.ops.iter().try_for_each(|op| op.validate())
    }
}

/// Run the pipeline on one image. Each op gets a fresh stream keyed by
/// `(seed, image_index, op_index)`, so the output is independent of how
/// images are distributed across workers.
pub fn apply_pipeline(
    pipeline: &AugmentPipeline,
    image: &RgbImage,
    image_index: u64,
) -> Result<(RgbImage, AppliedLog)> {
    let mut current = image.clone();
    let mut log = Vec::with_capacity(pipeline.ops.len());
    for (op_index, op) in pipeline.ops.iter().enumerate() {
        let mut rng = keyed_rng(pipeline.seed, &[image_index, op_index as u64]);
        let (next, entry) = apply(op, &current, &mut rng)?;
        current = next;
        log.push(entry);
    }
    Ok((current, log))
}

/// The training-config knobs, YAML keys matching the training table
/// (`flip_probability`, `rotate_limit`, `blur_limit`, `quality_lower`, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentSettings {
    pub flip_probability: f64,
    pub rotate_probability: f64,
    pub rotate_limit: [f64; 2],
    pub resize_probability: f64,
    pub resize_size: u32,
    pub brightness_probability: f64,
    pub brightness_limit: [f64; 2],
    pub contrast_limit: [f64; 2],
    pub fancy_pca_probability: f64,
    pub fancy_pca_alpha: f64,
    pub hsv_probability: f64,
    pub hue_shift_limit: f64,
    pub sat_shift_limit: f64,
    pub val_shift_limit: f64,
    pub compression_probability: f64,
    pub quality_lower: u8,
    pub quality_upper: u8,
    pub blur_probability: f64,
    pub blur_limit: [u32; 2],
}

impl Default for AugmentSettings {
    fn default() -> Self {
        AugmentSettings {
            flip_probability: 0.5,
            rotate_probability: 0.5,
            rotate_limit: [-10.0, 10.0],
            resize_probability: 1.0,
            resize_size: 256,
            brightness_probability: 0.5,
            brightness_limit: [-0.1, 0.1],
            contrast_limit: [-0.1, 0.1],
            fancy_pca_probability: 0.5,
            fancy_pca_alpha: 0.1,
            hsv_probability: 0.5,
            hue_shift_limit: 10.0,
            sat_shift_limit: 0.1,
            val_shift_limit: 0.1,
            compression_probability: 0.5,
            quality_lower: 40,
            quality_upper: 100,
            blur_probability: 0.5,
            blur_limit: [3, 7],
        }
    }
}

impl AugmentSettings {
    pub fn from_yaml(text: &str) -> Result<Self> {
        Ok(serde_yaml::from_str(text)?)
    }

    /// Build the full pipeline in its fixed order.
    pub fn pipeline(&self, seed: u64) -> AugmentPipeline {
        let ops = vec![
            AugmentOp::new(AugmentKind::Hflip, self.flip_probability),
            AugmentOp::new(
                AugmentKind::Rotate {
                    limit_deg: self.rotate_limit,
                },
                self.rotate_probability,
            ),
            AugmentOp::new(
                AugmentKind::IsotropicResize {
                    max_side: self.resize_size,
                },
                self.resize_probability,
            ),
            AugmentOp::new(
                AugmentKind::BrightnessContrast {
                    brightness_limit: self.brightness_limit,
                    contrast_limit: self.contrast_limit,
                },
                self.brightness_probability,
            ),
            AugmentOp::new(
                AugmentKind::FancyPca {
                    alpha_std: self.fancy_pca_alpha,
                },
                self.fancy_pca_probability,
            ),
            AugmentOp::new(
                AugmentKind::Hsv {
                    hue_shift_deg: self.hue_shift_limit,
                    sat_shift: self.sat_shift_limit,
                    val_shift: self.val_shift_limit,
                },
                self.hsv_probability,
            ),
            AugmentOp::new(
                AugmentKind::JpegCompress {
                    quality_lower: self.quality_lower,
                    quality_upper: self.quality_upper,
                },
                self.compression_probability,
            ),
            AugmentOp::new(
                AugmentKind::GaussianBlur {
                    blur_limit: self.blur_limit,
                },
                self.blur_probability,
            ),
        ];
        AugmentPipeline::new(ops, seed)
    }
}
