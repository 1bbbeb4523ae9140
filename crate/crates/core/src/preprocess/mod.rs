//! Frame sampling, landmark-driven face alignment, margin cropping, and mask
//! co-transformation.
//!
//! The geometric chain is: fit a similarity transform from detected landmarks
//! onto the template, take the warped landmarks' bounding box, expand it about
//! its center by the margin, and map that box onto the output square. Faces
//! are resampled bilinearly; masks ride through the identical composite
//! mapping with nearest-neighbor sampling.

mod video;

pub use video::{
    preprocess_dataset, process_video, LandmarkSource, LogSink, ManifestLandmarks, NullLog,
    PreprocessConfig, PreprocessSummary, ProcessedVideo, VecLog,
};

use image::{GrayImage, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{fit_similarity, Affine};
use crate::imageops::{warp_bilinear_rgb, warp_nearest_gray};
use crate::landmarks::LandmarkSet;

pub type AlignmentTransform = Affine;

/// Margin-expanded crop geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CropSpec {
    /// Multiplicative bounding-box expansion about the box center.
    pub margin: f64,
    /// Side of the square output crop, in pixels.
    pub output_size: u32,
}

impl Default for CropSpec {
    fn default() -> Self {
        CropSpec {
            margin: 1.3,
            output_size: 256,
        }
    }
}

impl CropSpec {
    pub fn validate(&self) -> Result<()> {
        if self.margin.is_nan() || self.margin < 1.0 {
            return Err(Error::Config {
                key: "margin".into(),
                message: format!("margin {} must be >= 1.0", self.margin),
            });
        }
        if self.output_size == 0 {
            return Err(Error::Config {
                key: "output_size".into(),
                message: "output_size must be positive".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    FixedNumFrames,
    FixedStride,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameSamplingPlan {
    pub mode: SamplingMode,
    pub num_frames: Option<usize>,
    pub stride: Option<usize>,
}

impl FrameSamplingPlan {
    pub fn fixed_num(num_frames: usize) -> Self {
        FrameSamplingPlan {
            mode: SamplingMode::FixedNumFrames,
            num_frames: Some(num_frames),
            stride: None,
        }
    }

    pub fn fixed_stride(stride: usize) -> Self {
        FrameSamplingPlan {
            mode: SamplingMode::FixedStride,
            num_frames: None,
            stride: Some(stride),
        }
    }
}

/// Pick frame indices per the plan. `fixed_stride` keeps every stride-th
/// frame from 0; `fixed_num_frames` spreads `min(N, T)` indices evenly with
/// `index_i = floor(i * (T - 1) / (N - 1))`, covering both endpoints.
pub fn sample_frames(total_frames: usize, plan: &FrameSamplingPlan) -> Result<Vec<usize>> {
    assert!(total_frames >= 1, "sample_frames needs at least one frame");
    match plan.mode {
        SamplingMode::FixedStride => {
            let stride = plan.stride.filter(|&s| s >= 1).ok_or_else(|| {
                Error::InvalidPlan("fixed_stride mode needs stride >= 1".into())
            })?;
            Ok((0..total_frames).step_by(stride).collect())
        }
        SamplingMode::FixedNumFrames => {
            let requested = plan.num_frames.filter(|&n| n >= 1).ok_or_else(|| {
                Error::InvalidPlan("fixed_num_frames mode needs num_frames >= 1".into())
            })?;
            let n = requested.min(total_frames);
            if n == 1 {
                return Ok(vec![0]);
            }
            Ok((0..n)
                .map(|i| i * (total_frames - 1) / (n - 1))
                .collect())
        }
    }
}

/// Least-squares similarity transform mapping `landmarks` onto `template`.
///
/// The fit uses the 5-point anchor subset (eye centers, nose tip, mouth
/// corners); the choice is recorded in output metadata.
pub fn estimate_alignment(
    landmarks: &LandmarkSet,
    template: &LandmarkSet,
) -> Result<AlignmentTransform> {
    fit_similarity(&landmarks.anchor_points(), &template.anchor_points())
}

/// Composite source-image → output-crop affine, plus the source dimensions it
/// was derived for. Masks must reuse this exact mapping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CropMapping {
    pub affine: Affine,
    pub source_w: u32,
    pub source_h: u32,
}

/// Build the composite mapping: alignment, then margin-expanded bounding box
/// of the aligned landmarks onto `[0, S-1]²` (pixel-coordinate corners).
pub fn crop_mapping(
    landmarks: &LandmarkSet,
    alignment: &AlignmentTransform,
    spec: &CropSpec,
    source_w: u32,
    source_h: u32,
) -> Result<CropMapping> {
    spec.validate()?;
    let aligned = landmarks.transformed(alignment);
    let (min_x, min_y, max_x, max_y) = aligned.bounding_box();
    let half_w = (max_x - min_x) / 2.0;
    let half_h = (max_y - min_y) / 2.0;
    if half_w < 1e-9 || half_h < 1e-9 {
        return Err(Error::DegenerateLandmarks(
            "aligned landmark bounding box has zero extent".into(),
        ));
    }
    let cx = (min_x + max_x) / 2.0;
    let cy = (min_y + max_y) / 2.0;
    let ext_x = half_w * spec.margin;
    let ext_y = half_h * spec.margin;
    let side = (spec.output_size - 1).max(1) as f64;
    let sx = side / (2.0 * ext_x);
    let sy = side / (2.0 * ext_y);
    let box_to_out = Affine::scale_translate(sx, sy, -(cx - ext_x) * sx, -(cy - ext_y) * sy);
    Ok(CropMapping {
        affine: box_to_out.compose(alignment),
        source_w,
        source_h,
    })
}

/// Align and crop one face. Returns the square crop, the landmarks expressed
/// in output pixel coordinates, and the mapping to reuse for the mask.
/// Samples falling outside the source fill with black.
pub fn warp_crop(
    image: &RgbImage,
    landmarks: &LandmarkSet,
    alignment: &AlignmentTransform,
    spec: &CropSpec,
) -> Result<(RgbImage, LandmarkSet, CropMapping)> {
    let mapping = crop_mapping(landmarks, alignment, spec, image.width(), image.height())?;
    let face = warp_bilinear_rgb(image, &mapping.affine, spec.output_size, spec.output_size);
    let warped = landmarks.transformed(&mapping.affine);
    Ok((face, warped, mapping))
}

/// Carry a mask through the identical geometric mapping as its frame:
/// nearest-neighbor resampling, then binarization at 0.5.
pub fn warp_mask(mask: &GrayImage, mapping: &CropMapping, spec: &CropSpec) -> Result<GrayImage> {
    if mask.width() != mapping.source_w || mask.height() != mapping.source_h {
        return Err(Error::DimensionMismatch {
            expected_w: mapping.source_w,
            expected_h: mapping.source_h,
            got_w: mask.width(),
            got_h: mask.height(),
        });
    }
    let mut out = warp_nearest_gray(mask, &mapping.affine, spec.output_size, spec.output_size);
    for px in out.pixels_mut() {
        px[0] = if px[0] >= 128 { 255 } else { 0 };
    }
    Ok(out)
}
