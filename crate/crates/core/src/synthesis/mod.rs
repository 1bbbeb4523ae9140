//! Blending-based forgery synthesis: multi-scale face-warping artifacts
//! (FWA) and boundary-supervised blended composites (the face-x-ray style).
//!
//! Everything is a pure function of its inputs and a seeded stream keyed by
//! `(seed, sample_index)`, so generation parallelizes without ordering
//! effects.

use image::{GrayImage, RgbImage};
use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::Affine;
use crate::imageops::{
    convolve_separable, gaussian_blur_rgb, gaussian_kernel, resize_area_rgb, resize_bilinear_rgb,
    warp_bilinear_f64, Border,
};
use crate::landmarks::LandmarkSet;
use crate::rng::keyed_rng;

/// The fixed multi-scale set for simulated face-warping artifacts.
pub const FWA_SCALES: [f64; 7] = [0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8];

// Stream tags keeping independent draws from one (seed, sample_index) key.
const STREAM_DEFORM: u64 = 1;
const STREAM_SCALE: u64 = 2;
const STREAM_PICK: u64 = 3;

/// Per-pixel blending weights in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlendMask {
    width: u32,
    height: u32,
    values: Vec<f64>,
}

impl BlendMask {
    pub fn new(width: u32, height: u32, values: Vec<f64>) -> Result<Self> {
        if values.len() != (width as usize) * (height as usize) {
            return Err(Error::DimensionMismatch {
                expected_w: width,
                expected_h: height,
                got_w: values.len() as u32,
                got_h: 1,
            });
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Config {
                key: "mask".into(),
                message: "mask values must lie in [0, 1]".into(),
            });
        }
        Ok(BlendMask {
            width,
            height,
            values,
        })
    }

    pub fn zeros(width: u32, height: u32) -> Self {
        BlendMask {
            width,
            height,
            values: vec![0.0; (width as usize) * (height as usize)],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.values[(y * self.width + x) as usize]
    }

    /// 8-bit rendering for export (255 = weight 1).
    pub fn to_gray_image(&self) -> GrayImage {
        GrayImage::from_fn(self.width, self.height, |x, y| {
            image::Luma([(self.get(x, y) * 255.0).round().clamp(0.0, 255.0) as u8])
        })
    }
}

/// Parameters of one synthetic-forgery generation. Randomness is keyed by
/// `(seed, sample_index)`; two recipes with the same key reproduce the same
/// bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct BlendRecipe {
    /// Gaussian feather radius (pixels) applied to the deformed hull mask.
    pub feather_sigma: f64,
    /// Maximum isotropic scale jitter of the mask (fraction, e.g. 0.05).
    pub jitter_scale: f64,
    /// Maximum mask translation jitter in pixels.
    pub jitter_translate: f64,
    /// Fixed warp scale; `None` draws one from [`FWA_SCALES`].
    pub fwa_scale: Option<f64>,
    pub seed: u64,
    pub sample_index: u64,
}

impl BlendRecipe {
    pub fn new(seed: u64, sample_index: u64) -> Self {
        BlendRecipe {
            feather_sigma: 7.0,
            jitter_scale: 0.05,
            jitter_translate: 3.0,
            fwa_scale: None,
            seed,
            sample_index,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.feather_sigma.is_nan() || self.feather_sigma <= 0.0 {
            return Err(Error::Config {
                key: "feather_sigma".into(),
                message: format!("feather_sigma {} must be positive", self.feather_sigma),
            });
        }
        if let Some(s) = self.fwa_scale {
            if !FWA_SCALES.contains(&s) {
                return Err(Error::Config {
                    key: "fwa_scale".into(),
                    message: format!("scale {s} is not one of {FWA_SCALES:?}"),
                });
            }
        }
        Ok(())
    }

    /// The warp scale this recipe uses: the pinned one, or a seeded draw
    /// from the fixed set.
    pub fn resolve_scale(&self) -> f64 {
        match self.fwa_scale {
            Some(s) => s,
            None => {
                let mut rng = keyed_rng(self.seed, &[self.sample_index, STREAM_SCALE]);
                FWA_SCALES[rng.gen_range(0..FWA_SCALES.len())]
            }
        }
    }
}

/// Binary mask of the filled convex hull of the 68 landmarks, rounded to the
/// integer grid. A pixel is set iff its grid point lies inside or on the
/// hull.
pub fn hull_mask(landmarks: &LandmarkSet, width: u32, height: u32) -> Result<BlendMask> {
    let points: Vec<(i64, i64)> = landmarks
        .points()
        .iter()
        .map(|&(x, y)| (x.round() as i64, y.round() as i64))
        .collect();
    let hull = convex_hull(&points);
    if hull.len() < 3 {
        return Err(Error::DegenerateLandmarks(
            "landmark hull is collinear".into(),
        ));
    }

    // Scanline fill: for each row, intersect the hull edges with the row and
    // fill the [min, max] span (convexity gives one span per row).
    let mut values = vec![0.0f64; (width as usize) * (height as usize)];
    for y in 0..height as i64 {
        let mut min_x = f64::INFINITY;
        let mut max_x = f64::NEG_INFINITY;
        let yf = y as f64;
        for i in 0..hull.len() {
            let (x0, y0) = hull[i];
            let (x1, y1) = hull[(i + 1) % hull.len()];
            let (lo, hi) = if y0 <= y1 { (y0, y1) } else { (y1, y0) };
            if yf < lo as f64 || yf > hi as f64 {
                continue;
            }
            if y0 == y1 {
                min_x = min_x.min(x0.min(x1) as f64);
                max_x = max_x.max(x0.max(x1) as f64);
            } else {
                let t = (yf - y0 as f64) / (y1 - y0) as f64;
                let x = x0 as f64 + t * (x1 - x0) as f64;
                min_x = min_x.min(x);
                max_x = max_x.max(x);
            }
        }
        if min_x > max_x {
            continue;
        }
        let start = (min_x - 1e-9).ceil().max(0.0) as i64;
        let end = (max_x + 1e-9).floor().min(width as f64 - 1.0) as i64;
        for x in start..=end {
            values[(y * width as i64 + x) as usize] = 1.0;
        }
    }
    BlendMask::new(width, height, values)
}

/// Andrew's monotone chain; returns hull vertices counter-clockwise, or
/// fewer than 3 points when the input is collinear.
fn convex_hull(points: &[(i64, i64)]) -> Vec<(i64, i64)> {
    let mut pts: Vec<(i64, i64)> = points.to_vec();
    pts.sort();
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: (i64, i64), a: (i64, i64), b: (i64, i64)| {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let mut lower: Vec<(i64, i64)> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(i64, i64)> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    if lower.len() < 3 {
        return Vec::new();
    }
    lower
}

/// Seeded affine jitter (isotropic scale about the mask center plus
/// translation) followed by Gaussian feathering. Zero jitter magnitudes skip
/// the warp exactly; feather sigma below 0.05 is treated as the identity
/// limit.
pub fn deform_feather(mask: &BlendMask, recipe: &BlendRecipe) -> BlendMask {
    let (w, h) = (mask.width, mask.height);
    let mut rng = keyed_rng(recipe.seed, &[recipe.sample_index, STREAM_DEFORM]);

    let jittered = if recipe.jitter_scale == 0.0 && recipe.jitter_translate == 0.0 {
        mask.values.clone()
    } else {
        let scale = 1.0 + rng.gen_range(-recipe.jitter_scale..=recipe.jitter_scale);
        let tx = rng.gen_range(-recipe.jitter_translate..=recipe.jitter_translate);
        let ty = rng.gen_range(-recipe.jitter_translate..=recipe.jitter_translate);
        let cx = (w - 1) as f64 / 2.0;
        let cy = (h - 1) as f64 / 2.0;
        // scale about the center, then translate
        let map = Affine::scale_translate(
            scale,
            scale,
            cx - scale * cx + tx,
            cy - scale * cy + ty,
        );
        warp_bilinear_f64(&mask.values, w, h, &map, w, h)
    };

    let feathered = if recipe.feather_sigma > 0.05 {
        let kernel = gaussian_kernel(recipe.feather_sigma);
        convolve_separable(&jittered, w as usize, h as usize, &kernel, Border::Zero)
    } else {
        jittered
    };
    // normalized kernels keep values in [0, 1] up to rounding noise
    let values = feathered
        .into_iter()
        .map(|v| v.clamp(0.0, 1.0))
        .collect();
    BlendMask {
        width: w,
        height: h,
        values,
    }
}

/// Per-pixel convex combination: `out = M * fg + (1 - M) * bg`. Weights of
/// exactly 0 or 1 copy the source byte unchanged.
pub fn blend(foreground: &RgbImage, background: &RgbImage, mask: &BlendMask) -> Result<RgbImage> {
    if foreground.dimensions() != background.dimensions()
        || mask.width != foreground.width()
        || mask.height != foreground.height()
    {
        return Err(Error::DimensionMismatch {
            expected_w: foreground.width(),
            expected_h: foreground.height(),
            got_w: mask.width,
            got_h: mask.height,
        });
    }
    let mut out = background.clone();
    for (x, y, px) in out.enumerate_pixels_mut() {
        let m = mask.get(x, y);
        if m == 0.0 {
            continue; // background byte kept bit-identical
        }
        let fg = foreground.get_pixel(x, y);
        if m == 1.0 {
            *px = *fg;
            continue;
        }
        for c in 0..3 {
            let v = m * fg[c] as f64 + (1.0 - m) * px[c] as f64;
            px[c] = v.round().clamp(0.0, 255.0) as u8;
        }
    }
    Ok(out)
}

/// Blending boundary `B = 4 * M * (1 - M)`: zero where the mask is pure
/// foreground or background, maximal on the 0.5 transition band.
pub fn boundary_map(mask: &BlendMask) -> BlendMask {
    BlendMask {
        width: mask.width,
        height: mask.height,
        values: mask.values.iter().map(|&m| 4.0 * m * (1.0 - m)).collect(),
    }
}

/// Simulate face-warping artifacts: the whole frame is squeezed through
/// `scale`, smoothed, brought back to full size, and pasted inside the
/// deformed, feathered hull. Pixels where the mask is exactly 0 stay
/// bit-identical to the input.
pub fn fwa_generate(
    face: &RgbImage,
    landmarks: &LandmarkSet,
    recipe: &BlendRecipe,
) -> Result<(RgbImage, BlendMask)> {
    recipe.validate()?;
    let hull = hull_mask(landmarks, face.width(), face.height())?;
    let mask = deform_feather(&hull, recipe);

    let scale = recipe.resolve_scale();
    let down_w = ((face.width() as f64 * scale).round() as u32).max(2);
    let down_h = ((face.height() as f64 * scale).round() as u32).max(2);
    let degraded = resize_bilinear_rgb(
        &gaussian_blur_rgb(&resize_area_rgb(face, down_w, down_h), 1.0, 2),
        face.width(),
        face.height(),
    );
    let forged = blend(&degraded, face, &mask)?;
    Ok((forged, mask))
}

/// Per-channel mean/std matching of the foreground to the background over
/// the mask's support (weights as soft membership). Degenerate spreads fall
/// back to a pure mean shift.
pub fn match_color(fg: &RgbImage, bg: &RgbImage, mask: &BlendMask) -> RgbImage {
    let mut weight_sum = 0.0;
    let mut fg_mean = [0.0f64; 3];
    let mut bg_mean = [0.0f64; 3];
    for (x, y, p) in fg.enumerate_pixels() {
        let m = mask.get(x, y);
        if m <= 0.0 {
            continue;
        }
        weight_sum += m;
        let q = bg.get_pixel(x, y);
        for c in 0..3 {
            fg_mean[c] += m * p[c] as f64;
            bg_mean[c] += m * q[c] as f64;
        }
    }
    if weight_sum <= 0.0 {
        return fg.clone();
    }
    for c in 0..3 {
        fg_mean[c] /= weight_sum;
        bg_mean[c] /= weight_sum;
    }
    let mut fg_var = [0.0f64; 3];
    let mut bg_var = [0.0f64; 3];
    for (x, y, p) in fg.enumerate_pixels() {
        let m = mask.get(x, y);
        if m <= 0.0 {
            continue;
        }
        let q = bg.get_pixel(x, y);
        for c in 0..3 {
            fg_var[c] += m * (p[c] as f64 - fg_mean[c]).powi(2);
            bg_var[c] += m * (q[c] as f64 - bg_mean[c]).powi(2);
        }
    }
    let mut gain = [1.0f64; 3];
    for c in 0..3 {
        let fg_std = (fg_var[c] / weight_sum).sqrt();
        let bg_std = (bg_var[c] / weight_sum).sqrt();
        if fg_std > 1e-6 {
            gain[c] = bg_std / fg_std;
        }
    }
    RgbImage::from_fn(fg.width(), fg.height(), |x, y| {
        let p = fg.get_pixel(x, y);
        let mut out = [0u8; 3];
        for c in 0..3 {
            let v = (p[c] as f64 - fg_mean[c]) * gain[c] + bg_mean[c];
            out[c] = v.round().clamp(0.0, 255.0) as u8;
        }
        image::Rgb(out)
    })
}

/// One blended composite: the foreground face region (its hull, deformed and
/// feathered) is color-matched and pasted into the background face. Returns
/// the composite, the mask, and its blending boundary.
pub fn xray_generate(
    foreground: &RgbImage,
    background: &RgbImage,
    fg_landmarks: &LandmarkSet,
    recipe: &BlendRecipe,
) -> Result<(RgbImage, BlendMask, BlendMask)> {
    recipe.validate()?;
    if foreground.dimensions() != background.dimensions() {
        return Err(Error::DimensionMismatch {
            expected_w: background.width(),
            expected_h: background.height(),
            got_w: foreground.width(),
            got_h: foreground.height(),
        });
    }
    let hull = hull_mask(fg_landmarks, foreground.width(), foreground.height())?;
    let mask = deform_feather(&hull, recipe);
    let matched = match_color(foreground, background, &mask);
    let blended = blend(&matched, background, &mask)?;
    let boundary = boundary_map(&mask);
    Ok((blended, mask, boundary))
}

/// Index of the candidate whose landmarks are closest (sum of squared
/// point distances) to `target`, skipping `exclude`. Ties resolve to the
/// lowest index.
pub fn nearest_landmark_index(
    target: &LandmarkSet,
    candidates: &[LandmarkSet],
    exclude: Option<usize>,
) -> Result<usize> {
    let mut best: Option<(f64, usize)> = None;
    for (i, cand) in candidates.iter().enumerate() {
        if exclude == Some(i) {
            continue;
        }
        let d: f64 = target
            .points()
            .iter()
            .zip(cand.points())
            .map(|(&(ax, ay), &(bx, by))| (ax - bx).powi(2) + (ay - by).powi(2))
            .sum();
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, i));
        }
    }
    best.map(|(_, i)| i).ok_or(Error::EmptySet)
}

/// One streamed composite and the pair of source indices it blended.
pub struct XraySample {
    pub forged: RgbImage,
    pub mask: BlendMask,
    pub boundary: BlendMask,
    pub fg_index: usize,
    pub bg_index: usize,
}

/// Seeded streaming generator over a pool of aligned faces, reproducing
/// dynamic per-iteration synthesis: sample k picks a foreground from the
/// pool via the `(seed, k)` stream and blends it into its nearest-landmark
/// neighbor.
pub struct XrayStream<'a> {
    faces: &'a [(RgbImage, LandmarkSet)],
    seed: u64,
    next_index: u64,
}

impl<'a> XrayStream<'a> {
    pub fn new(faces: &'a [(RgbImage, LandmarkSet)], seed: u64) -> Self {
        XrayStream {
            faces,
            seed,
            next_index: 0,
        }
    }
}

impl<'a> Iterator for XrayStream<'a> {
    type Item = Result<XraySample>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.faces.len() < 2 {
            return Some(Err(Error::EmptySet));
        }
        let sample_index = self.next_index;
        self.next_index += 1;
        let mut rng = keyed_rng(self.seed, &[sample_index, STREAM_PICK]);
        let fg_index = rng.gen_range(0..self.faces.len());
        let landmark_sets: Vec<LandmarkSet> =
            self.faces.iter().map(|(_, l)| l.clone()).collect();
        let bg_index = match nearest_landmark_index(
            &self.faces[fg_index].1,
            &landmark_sets,
            Some(fg_index),
        ) {
            Ok(i) => i,
            Err(e) => return Some(Err(e)),
        };
        let recipe = BlendRecipe::new(self.seed, sample_index);
        let result = xray_generate(
            &self.faces[fg_index].0,
            &self.faces[bg_index].0,
            &self.faces[fg_index].1,
            &recipe,
        )
        .map(|(forged, mask, boundary)| XraySample {
            forged,
            mask,
            boundary,
            fg_index,
            bg_index,
        });
        Some(result)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;

    fn ellipse_landmarks(cx: f64, cy: f64, rx: f64, ry: f64) -> LandmarkSet {
        LandmarkSet::from_vec(
            (0..68)
                .map(|i| {
                    let a = i as f64 / 68.0 * std::f64::consts::TAU;
                    (cx + rx * a.cos(), cy + ry * a.sin())
                })
                .collect(),
        )
        .unwrap()
    }

    fn square_landmarks() -> LandmarkSet {
        // 68 points tracing the axis-aligned square [20, 80]^2
        let mut pts = Vec::new();
        for i in 0..17 {
            pts.push((20.0 + 60.0 * i as f64 / 16.0, 20.0));
        }
        for i in 0..17 {
            pts.push((80.0, 20.0 + 60.0 * i as f64 / 16.0));
        }
        for i in 0..17 {
            pts.push((80.0 - 60.0 * i as f64 / 16.0, 80.0));
        }
        for i in 0..17 {
            pts.push((20.0, 80.0 - 60.0 * i as f64 / 16.0));
        }
        LandmarkSet::from_vec(pts).unwrap()
    }

    fn noise_image(size: u32, key: u64) -> RgbImage {
        let mut rng = keyed_rng(key, &[0]);
        RgbImage::from_fn(size, size, |_, _| {
            Rgb([rng.gen::<u8>(), rng.gen::<u8>(), rng.gen::<u8>()])
        })
    }

    /// Independent oracle: inside-or-on test against every hull edge.
    fn point_in_hull(hull: &[(i64, i64)], x: i64, y: i64) -> bool {
        hull.iter().enumerate().all(|(i, &(x0, y0))| {
            let (x1, y1) = hull[(i + 1) % hull.len()];
            (x1 - x0) * (y - y0) - (y1 - y0) * (x - x0) >= 0
        })
    }

    #[test]
    fn hull_of_square_landmarks_is_filled_square() {
        let mask = hull_mask(&square_landmarks(), 100, 100).unwrap();
        for y in 0..100 {
            for x in 0..100 {
                let inside = (20..=80).contains(&x) && (20..=80).contains(&y);
                assert_eq!(
                    mask.get(x, y),
                    if inside { 1.0 } else { 0.0 },
                    "pixel ({x}, {y})"
                );
            }
        }
    }

    #[test]
    fn hull_contains_every_landmark_pixel() {
        let lms = ellipse_landmarks(48.0, 52.0, 30.0, 22.0);
        let mask = hull_mask(&lms, 100, 100).unwrap();
        for &(x, y) in lms.points() {
            assert_eq!(mask.get(x.round() as u32, y.round() as u32), 1.0);
        }
    }

    #[test]
    fn fwa_accepts_non_square_frames() {
        let face = RgbImage::from_fn(120, 90, |x, y| {
            Rgb([(x * 2) as u8, (y * 2) as u8, ((x + y) % 256) as u8])
        });
        let lms = ellipse_landmarks(60.0, 45.0, 30.0, 25.0);
        let recipe = BlendRecipe::new(3, 0);
        let (forged, mask) = fwa_generate(&face, &lms, &recipe).unwrap();
        assert_eq!(forged.dimensions(), face.dimensions());
        assert_eq!((mask.width(), mask.height()), face.dimensions());
    }

    #[test]
    fn hull_area_matches_point_in_polygon_oracle() {
        let lms = ellipse_landmarks(60.0, 55.0, 35.0, 28.0);
        let mask = hull_mask(&lms, 128, 128).unwrap();
        let rounded: Vec<(i64, i64)> = lms
            .points()
            .iter()
            .map(|&(x, y)| (x.round() as i64, y.round() as i64))
            .collect();
        let hull = convex_hull(&rounded);
        for y in 0..128i64 {
            for x in 0..128i64 {
                let expect = point_in_hull(&hull, x, y);
                let got = mask.get(x as u32, y as u32) == 1.0;
                assert_eq!(got, expect, "pixel ({x}, {y})");
            }
        }
    }

    #[test]
    fn collinear_landmarks_rejected() {
        let lms =
            LandmarkSet::from_vec((0..68).map(|i| (i as f64, 2.0 * i as f64)).collect()).unwrap();
        assert!(matches!(
            hull_mask(&lms, 256, 256),
            Err(Error::DegenerateLandmarks(_))
        ));
    }

    #[test]
    fn deform_identity_limit() {
        let mask = hull_mask(&square_landmarks(), 100, 100).unwrap();
        let mut recipe = BlendRecipe::new(7, 0);
        recipe.jitter_scale = 0.0;
        recipe.jitter_translate = 0.0;
        recipe.feather_sigma = 0.01; // below the identity-limit threshold
        assert_eq!(deform_feather(&mask, &recipe), mask);
    }

    #[test]
    fn deform_zero_mask_stays_zero() {
        let mask = BlendMask::zeros(64, 64);
        let out = deform_feather(&mask, &BlendRecipe::new(3, 9));
        assert!(out.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn deform_is_seeded_and_smooth() {
        let mask = hull_mask(&square_landmarks(), 100, 100).unwrap();
        let recipe = BlendRecipe::new(11, 4);
        let a = deform_feather(&mask, &recipe);
        let b = deform_feather(&mask, &recipe);
        assert_eq!(a, b);
        let other = deform_feather(&mask, &BlendRecipe::new(11, 5));
        assert_ne!(a, other);
        // feathering creates a genuine transition band
        assert!(a.values().iter().any(|&v| v > 0.05 && v < 0.95));
        assert!(a.values().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn blend_identities() {
        let fg = noise_image(32, 1);
        let bg = noise_image(32, 2);
        let ones = BlendMask::new(32, 32, vec![1.0; 1024]).unwrap();
        assert_eq!(blend(&fg, &bg, &ones).unwrap(), fg);
        let zeros = BlendMask::zeros(32, 32);
        assert_eq!(blend(&fg, &bg, &zeros).unwrap(), bg);
        let halves = BlendMask::new(32, 32, vec![0.5; 1024]).unwrap();
        let mixed = blend(&fg, &bg, &halves).unwrap();
        for (x, y, px) in mixed.enumerate_pixels() {
            for c in 0..3 {
                let want = (fg.get_pixel(x, y)[c] as f64 + bg.get_pixel(x, y)[c] as f64) / 2.0;
                assert!((px[c] as f64 - want).abs() <= 0.5 + 1e-9);
            }
        }
    }

    #[test]
    fn blend_dimension_mismatch() {
        let fg = noise_image(32, 1);
        let bg = noise_image(16, 2);
        let mask = BlendMask::zeros(32, 32);
        assert!(matches!(
            blend(&fg, &bg, &mask),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn boundary_triple_and_symmetry() {
        let mask = BlendMask::new(2, 2, vec![0.0, 0.5, 1.0, 0.25]).unwrap();
        let b = boundary_map(&mask);
        assert_eq!(b.values(), &[0.0, 1.0, 0.0, 0.75]);

        let flipped =
            BlendMask::new(2, 2, mask.values().iter().map(|&m| 1.0 - m).collect()).unwrap();
        let b2 = boundary_map(&flipped);
        // bitwise symmetric, not just approximately
        assert_eq!(b.values(), b2.values());
    }

    #[test]
    fn fwa_mask_zero_pixels_bit_identical() {
        let face = noise_image(256, 5);
        let lms = ellipse_landmarks(128.0, 128.0, 60.0, 75.0);
        let (forged, mask) = fwa_generate(&face, &lms, &BlendRecipe::new(21, 0)).unwrap();
        let mut zero_pixels = 0;
        for (x, y, px) in forged.enumerate_pixels() {
            if mask.get(x, y) == 0.0 {
                assert_eq!(px, face.get_pixel(x, y), "pixel ({x}, {y})");
                zero_pixels += 1;
            }
        }
        assert!(zero_pixels > 1000, "mask must leave a real exterior");
    }

    #[test]
    fn fwa_scale_draws_stay_in_set() {
        for i in 0..1000u64 {
            let recipe = BlendRecipe::new(77, i);
            let s = recipe.resolve_scale();
            assert!(FWA_SCALES.contains(&s), "draw {s}");
        }
        // pinned scale passes validation only when it is in the set
        let mut r = BlendRecipe::new(1, 0);
        r.fwa_scale = Some(0.35);
        assert!(r.validate().is_err());
        r.fwa_scale = Some(0.4);
        assert!(r.validate().is_ok());
    }

    #[test]
    fn fwa_low_scale_reduces_laplacian_energy_inside_hull() {
        // high-frequency checkerboard texture
        let face = RgbImage::from_fn(256, 256, |x, y| {
            let v = if (x + y) % 2 == 0 { 230 } else { 25 };
            Rgb([v, v, v])
        });
        let lms = ellipse_landmarks(128.0, 128.0, 70.0, 80.0);
        let mut recipe = BlendRecipe::new(13, 2);
        recipe.fwa_scale = Some(0.2);
        let (forged, mask) = fwa_generate(&face, &lms, &recipe).unwrap();

        // independent Laplacian energy over safely-interior pixels
        let energy = |img: &RgbImage| -> f64 {
            let gray: Vec<f64> = img
                .pixels()
                .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
                .collect();
            let mut total = 0.0;
            for y in 1..255u32 {
                for x in 1..255u32 {
                    if mask.get(x, y) < 0.999 {
                        continue;
                    }
                    let at = |xx: u32, yy: u32| gray[(yy * 256 + xx) as usize];
                    let lap = at(x + 1, y) + at(x - 1, y) + at(x, y + 1) + at(x, y - 1)
                        - 4.0 * at(x, y);
                    total += lap * lap;
                }
            }
            total
        };
        let before = energy(&face);
        let after = energy(&forged);
        assert!(
            after < before * 0.5,
            "Laplacian energy must drop: {after} vs {before}"
        );
    }

    #[test]
    fn synthesis_is_pure_in_seed() {
        let face = noise_image(256, 9);
        let lms = ellipse_landmarks(128.0, 120.0, 65.0, 72.0);
        let recipe = BlendRecipe::new(99, 3);
        let (a, am) = fwa_generate(&face, &lms, &recipe).unwrap();
        let (b, bm) = fwa_generate(&face, &lms, &recipe).unwrap();
        assert_eq!(a, b);
        assert_eq!(am, bm);
        let (c, _) = fwa_generate(&face, &lms, &BlendRecipe::new(100, 3)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn nearest_pairing_picks_closest() {
        let base = ellipse_landmarks(128.0, 128.0, 60.0, 70.0);
        let near = ellipse_landmarks(130.0, 127.0, 61.0, 69.0);
        let far = ellipse_landmarks(60.0, 50.0, 30.0, 35.0);
        let idx = nearest_landmark_index(&base, &[far.clone(), near.clone()], None).unwrap();
        assert_eq!(idx, 1);
        // excluding the winner falls back to the other
        let idx = nearest_landmark_index(&base, &[far, near], Some(1)).unwrap();
        assert_eq!(idx, 0);
    }

    #[test]
    fn xray_stream_is_deterministic() {
        let faces: Vec<(RgbImage, LandmarkSet)> = (0..3)
            .map(|i| {
                (
                    noise_image(128, 40 + i),
                    ellipse_landmarks(64.0 + i as f64 * 3.0, 64.0, 30.0, 35.0),
                )
            })
            .collect();
        let take = |seed: u64| -> Vec<(usize, usize, RgbImage)> {
            XrayStream::new(&faces, seed)
                .take(4)
                .map(|s| {
                    let s = s.unwrap();
                    (s.fg_index, s.bg_index, s.forged)
                })
                .collect()
        };
        let a = take(31);
        let b = take(31);
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.0, y.0);
            assert_eq!(x.1, y.1);
            assert_eq!(x.2, y.2);
        }
        for s in &a {
            assert_ne!(s.0, s.1, "a face never blends into itself");
        }
    }

    #[test]
    fn xray_boundary_peaks_on_transition() {
        let faces = [
            (noise_image(128, 50), ellipse_landmarks(64.0, 64.0, 32.0, 36.0)),
            (noise_image(128, 51), ellipse_landmarks(66.0, 63.0, 33.0, 35.0)),
        ];
        let (_, mask, boundary) =
            xray_generate(&faces[0].0, &faces[1].0, &faces[0].1, &BlendRecipe::new(8, 0))
                .unwrap();
        for (m, b) in mask.values().iter().zip(boundary.values()) {
            assert!((b - 4.0 * m * (1.0 - m)).abs() < 1e-15);
        }
        assert!(boundary.values().iter().cloned().fold(0.0, f64::max) > 0.9);
    }
}
