//! 68-point facial landmark sets and the alignment template.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Affine;

pub const LANDMARK_COUNT: usize = 68;

/// 68 (x, y) landmark coordinates in source-image pixels, in the standard
/// layout: jaw 0-16, brows 17-26, nose 27-35, eyes 36-47, mouth 48-67.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSet {
    points: [(f64, f64); LANDMARK_COUNT],
}

impl LandmarkSet {
    pub fn new(points: [(f64, f64); LANDMARK_COUNT]) -> Result<Self> {
        if points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
            return Err(Error::DegenerateLandmarks(
                "non-finite landmark coordinate".into(),
            ));
        }
        Ok(LandmarkSet { points })
    }

    pub fn from_vec(points: Vec<(f64, f64)>) -> Result<Self> {
        let arr: [(f64, f64); LANDMARK_COUNT] = points.try_into().map_err(|v: Vec<_>| {
            Error::DegenerateLandmarks(format!("expected 68 landmarks, got {}", v.len()))
        })?;
        Self::new(arr)
    }

    pub fn points(&self) -> &[(f64, f64); LANDMARK_COUNT] {
        &self.points
    }

    pub fn transformed(&self, t: &Affine) -> LandmarkSet {
        let mut points = self.points;
        for p in &mut points {
            *p = t.apply(p.0, p.1);
        }
        LandmarkSet { points }
    }

    /// Axis-aligned bounding box `(min_x, min_y, max_x, max_y)`.
    pub fn bounding_box(&self) -> (f64, f64, f64, f64) {
        let mut min_x = f64::INFINITY;
        let mut min_y = f64::INFINITY;
        let mut max_x = f64::NEG_INFINITY;
        let mut max_y = f64::NEG_INFINITY;
        for &(x, y) in &self.points {
            min_x = min_x.min(x);
            min_y = min_y.min(y);
            max_x = max_x.max(x);
            max_y = max_y.max(y);
        }
        (min_x, min_y, max_x, max_y)
    }

    /// The five alignment anchors: eye centers, nose tip, mouth corners.
    ///
    /// Eye centers are the means of points 36-41 and 42-47; the nose tip is
    /// point 30; mouth corners are points 48 and 54.
    pub fn anchor_points(&self) -> [(f64, f64); 5] {
        let mean = |range: std::ops::Range<usize>| {
            let n = range.len() as f64;
            let (sx, sy) = self.points[range]
                .iter()
                .fold((0.0, 0.0), |(ax, ay), &(x, y)| (ax + x, ay + y));
            (sx / n, sy / n)
        };
        [
            mean(36..42),
            mean(42..48),
            self.points[30],
            self.points[48],
            self.points[54],
        ]
    }

    /// Parse a per-frame landmark file: a JSON array of 68 `[x, y]` pairs.
    pub fn read_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_json(&text).map_err(|e| Error::LandmarkFormat {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn parse_json(text: &str) -> Result<Self> {
        let raw: Vec<[f64; 2]> = serde_json::from_str(text)?;
        Self::from_vec(raw.into_iter().map(|[x, y]| (x, y)).collect())
    }

    pub fn to_json(&self) -> String {
        let mut out = String::from("[");
        for (i, &(x, y)) in self.points.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&format!("[{:.4},{:.4}]", x, y));
        }
        out.push_str("]\n");
        out
    }
}

#[derive(Deserialize, Serialize)]
struct TemplateFile {
    version: u32,
    points: Vec<[f64; 2]>,
}

/// The canonical mean-face layout shipped with the crate, in unit coordinates.
const MEAN_FACE_JSON: &str = include_str!("../data/mean_face_68.json");

pub const TEMPLATE_VERSION: u32 = 1;

/// The alignment template: the mean-face layout scaled to an
/// `output_size` x `output_size` square.
pub fn alignment_template(output_size: u32) -> LandmarkSet {
    let tf: TemplateFile =
        serde_json::from_str(MEAN_FACE_JSON).expect("embedded template is valid");
    debug_assert_eq!(tf.version, TEMPLATE_VERSION);
    let s = output_size as f64;
    LandmarkSet::from_vec(tf.points.iter().map(|&[x, y]| (x * s, y * s)).collect())
        .expect("embedded template has 68 finite points")
}
