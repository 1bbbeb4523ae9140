//! Average high-pass frequency spectra of image sets and their difference
//! map, the three-panel forensics figure: real average, fake average,
//! real minus fake.
//!
//! Per image: grayscale, subtract a Gaussian low-pass (sigma = side/20),
//! 2D DFT, shift the zero frequency to the center, log(1+|.|). The sampled
//! set is accumulated in a canonical order with pairwise summation, so the
//! result is bit-stable across worker counts and input permutations.

use image::RgbImage;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::imageops::{
    convolve_separable, gaussian_kernel, resize_bilinear_rgb, to_gray_f64, Border,
};
use crate::rng::keyed_rng;

/// Sampling stream tag.
const STREAM_SAMPLE: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumConfig {
    /// Common square side every image is resized to before the transform.
    pub side: u32,
    /// Images sampled per set (clamped to the set size).
    pub sample_count: usize,
    /// Low-pass sigma; `None` means `side / 20`.
    pub sigma: Option<f64>,
    /// Apply `log(1 + x)` compression to the magnitude grid.
    pub log_magnitude: bool,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        SpectrumConfig {
            side: 256,
            sample_count: 2000,
            sigma: None,
            log_magnitude: true,
        }
    }
}

impl SpectrumConfig {
    pub fn sigma(&self) -> f64 {
        self.sigma.unwrap_or(self.side as f64 / 20.0)
    }
}

/// The three grids of the difference figure, row-major `side * side`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumResult {
    pub side: u32,
    pub real_avg: Vec<f64>,
    pub fake_avg: Vec<f64>,
    /// `real_avg - fake_avg`, element-wise.
    pub difference: Vec<f64>,
    pub n_real: usize,
    pub n_fake: usize,
}

/// Single-image pipeline: gray, high-pass, DFT, center shift, magnitude.
pub fn image_spectrum(image: &RgbImage, config: &SpectrumConfig) -> Vec<f64> {
    let n = config.side as usize;
    let resized;
    let image = if image.dimensions() == (config.side, config.side) {
        image
    } else {
        resized = resize_bilinear_rgb(image, config.side, config.side);
        &resized
    };
    let gray = to_gray_f64(image);
    let low = convolve_separable(&gray, n, n, &gaussian_kernel(config.sigma()), Border::Reflect);
    let mut buf: Vec<Complex<f64>> = gray
        .iter()
        .zip(&low)
        .map(|(g, l)| Complex::new(g - l, 0.0))
        .collect();

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for row in buf.chunks_exact_mut(n) {
        fft.process_with_scratch(row, &mut scratch);
    }
    let mut column = vec![Complex::new(0.0, 0.0); n];
    for x in 0..n {
        for y in 0..n {
            column[y] = buf[y * n + x];
        }
        fft.process_with_scratch(&mut column, &mut scratch);
        for y in 0..n {
            buf[y * n + x] = column[y];
        }
    }

    let half = n / 2;
    let mut out = vec![0.0f64; n * n];
    for v in 0..n {
        for u in 0..n {
            let mag = buf[v * n + u].norm();
            let value = if config.log_magnitude { mag.ln_1p() } else { mag };
            out[((v + half) % n) * n + (u + half) % n] = value;
        }
    }
    out
}

/// Draw `count` distinct indices; the full set when `count >= len`.
fn sample_indices(len: usize, count: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..len).collect();
    if count >= len {
        return idx;
    }
    let mut rng = keyed_rng(seed, &[STREAM_SAMPLE]);
    for i in 0..count {
        let j = rand::Rng::gen_range(&mut rng, i..len);
        idx.swap(i, j);
    }
    idx.truncate(count);
    idx
}

/// Streaming pairwise summation: a binary counter of partial sums, so only
/// O(log n) grids are alive and the reduction tree is fixed by sequence
/// order alone.
struct PairwiseAccumulator {
    levels: Vec<Option<Vec<f64>>>,
}

impl PairwiseAccumulator {
    fn new() -> Self {
        PairwiseAccumulator { levels: Vec::new() }
    }

    fn push(&mut self, mut grid: Vec<f64>) {
        let mut level = 0;
        loop {
            if self.levels.len() == level {
                self.levels.push(Some(grid));
                return;
            }
            match self.levels[level].take() {
                None => {
                    self.levels[level] = Some(grid);
                    return;
                }
                Some(other) => {
                    for (g, o) in grid.iter_mut().zip(&other) {
                        *g += o;
                    }
                    level += 1;
                }
            }
        }
    }

    fn finish(self) -> Option<Vec<f64>> {
        let mut total: Option<Vec<f64>> = None;
        for partial in self.levels.into_iter().flatten() {
            total = Some(match total {
                None => partial,
                Some(mut t) => {
                    for (t, p) in t.iter_mut().zip(&partial) {
                        *t += p;
                    }
                    t
                }
            });
        }
        total
    }
}

/// Average spectrum of a seeded sample of `images`. Returns the grid and
/// how many images went into it.
pub fn average_spectrum(
    images: &[RgbImage],
    config: &SpectrumConfig,
    seed: u64,
) -> Result<(Vec<f64>, usize)> {
    if images.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut sampled = sample_indices(images.len(), config.sample_count, seed);
    // canonical accumulation order: by image content, so permuting the
    // input list cannot change the sum
    sampled.sort_by(|&a, &b| {
        images[a]
            .dimensions()
            .cmp(&images[b].dimensions())
            .then_with(|| images[a].as_raw().cmp(images[b].as_raw()))
    });
    let n = sampled.len();
    let mut accum = PairwiseAccumulator::new();
    for &i in &sampled {
        accum.push(image_spectrum(&images[i], config));
    }
    let mut grid = accum.finish().expect("non-empty sample");
    for v in &mut grid {
        *v /= n as f64;
    }
    Ok((grid, n))
}

/// Both set averages (independently sampled with the same seed) and their
/// signed difference.
pub fn spectrum_difference(
    real: &[RgbImage],
    fake: &[RgbImage],
    config: &SpectrumConfig,
    seed: u64,
) -> Result<SpectrumResult> {
    let (real_avg, n_real) = average_spectrum(real, config, seed)?;
    let (fake_avg, n_fake) = average_spectrum(fake, config, seed)?;
    let difference = real_avg
        .iter()
        .zip(&fake_avg)
        .map(|(r, f)| r - f)
        .collect();
    Ok(SpectrumResult {
        side: config.side,
        real_avg,
        fake_avg,
        difference,
        n_real,
        n_fake,
    })
}

/// Render a grid as CSV, one row per line.
pub fn grid_to_csv(grid: &[f64], side: u32) -> String {
    let mut out = String::new();
    for row in grid.chunks_exact(side as usize) {
        let line: Vec<String> = row.iter().map(|v| format!("{}", v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// Min-max normalize a grid into an 8-bit heatmap.
pub fn grid_to_gray(grid: &[f64], side: u32) -> image::GrayImage {
    let min = grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = if max > min { max - min } else { 1.0 };
    image::GrayImage::from_fn(side, side, |x, y| {
        let v = grid[(y * side + x) as usize];
        image::Luma([((v - min) / span * 255.0).round() as u8])
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;

    fn small_config(side: u32) -> SpectrumConfig {
        SpectrumConfig {
            side,
            sample_count: 2000,
            sigma: None,
            log_magnitude: true,
        }
    }

    fn constant(side: u32, v: u8) -> RgbImage {
        RgbImage::from_pixel(side, side, Rgb([v, v, v]))
    }

    fn noise(side: u32, seed: u64) -> RgbImage {
        let mut rng = keyed_rng(seed, &[99]);
        RgbImage::from_fn(side, side, |_, _| {
            Rgb([
                rand::Rng::gen(&mut rng),
                rand::Rng::gen(&mut rng),
                rand::Rng::gen(&mut rng),
            ])
        })
    }

    #[test]
    fn constant_images_give_zero_spectrum() {
        let imgs = vec![constant(64, 0), constant(64, 128), constant(64, 255)];
        let (grid, n) = average_spectrum(&imgs, &small_config(64), 7).unwrap();
        assert_eq!(n, 3);
        let max = grid.iter().cloned().fold(0.0f64, f64::max);
        assert!(max <= 1e-9, "max {}", max);
    }

    #[test]
    fn magnitude_grid_is_point_symmetric() {
        let imgs = vec![noise(64, 1)];
        let (grid, _) = average_spectrum(&imgs, &small_config(64), 0).unwrap();
        let n = 64usize;
        for i in 0..n {
            for j in 0..n {
                let a = grid[i * n + j];
                let b = grid[((n - i) % n) * n + (n - j) % n];
                assert!((a - b).abs() <= 1e-9, "({}, {}): {} vs {}", i, j, a, b);
            }
        }
    }

    #[test]
    fn horizontal_sinusoid_peaks_at_analytic_bins() {
        let n = 64u32;
        let k = 9u32;
        let img = RgbImage::from_fn(n, n, |x, _| {
            let v = 128.0 + 100.0 * (std::f64::consts::TAU * k as f64 * x as f64 / n as f64).cos();
            let v = v.round() as u8;
            Rgb([v, v, v])
        });
        let (grid, _) = average_spectrum(&[img], &small_config(n), 0).unwrap();
        let side = n as usize;
        let half = side / 2;
        let mut cells: Vec<(usize, usize, f64)> = (0..side)
            .flat_map(|r| (0..side).map(move |c| (r, c)))
            .map(|(r, c)| (r, c, grid[r * side + c]))
            .collect();
        cells.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap());
        let top: Vec<(usize, usize)> = cells[..2].iter().map(|&(r, c, _)| (r, c)).collect();
        let expect_a = (half, half + k as usize);
        let expect_b = (half, half - k as usize);
        assert!(
            top.contains(&expect_a) && top.contains(&expect_b),
            "top cells {:?}, expected {:?} and {:?}",
            top,
            expect_a,
            expect_b
        );
        // the pair towers over everything else
        assert!(cells[2].2 < 0.5 * cells[0].2, "third cell {:?}", cells[2]);
    }

    #[test]
    fn identical_sets_same_seed_cancel_exactly() {
        let a = noise(32, 10);
        let b = noise(32, 11);
        let c = noise(32, 12);
        let real = vec![a.clone(), b.clone(), c.clone()];
        let fake = vec![c, a, b]; // same multiset, different order
        let result = spectrum_difference(&real, &fake, &small_config(32), 5).unwrap();
        assert!(result.difference.iter().all(|&d| d == 0.0));
        assert_eq!(result.n_real, 3);
        assert_eq!(result.n_fake, 3);
    }

    #[test]
    fn sample_count_clamps_to_set_size() {
        let imgs = vec![noise(32, 1), noise(32, 2)];
        let config = SpectrumConfig {
            sample_count: 100,
            ..small_config(32)
        };
        let (_, n) = average_spectrum(&imgs, &config, 0).unwrap();
        assert_eq!(n, 2);
    }

    #[test]
    fn subsampling_is_seed_deterministic() {
        let imgs: Vec<RgbImage> = (0..8).map(|i| noise(32, i)).collect();
        let config = SpectrumConfig {
            sample_count: 3,
            ..small_config(32)
        };
        let (a, n) = average_spectrum(&imgs, &config, 42).unwrap();
        let (b, _) = average_spectrum(&imgs, &config, 42).unwrap();
        assert_eq!(n, 3);
        assert_eq!(a, b);
        let (c, _) = average_spectrum(&imgs, &config, 43).unwrap();
        assert_ne!(a, c, "different seed should select differently");
    }

    #[test]
    fn doubling_intensity_raises_spectrum() {
        let base = RgbImage::from_fn(32, 32, |x, y| {
            let v = (40.0
                + 30.0 * (x as f64 / 3.0).sin()
                + 20.0 * (y as f64 / 5.0).cos()) as u8;
            Rgb([v, v, v])
        });
        let doubled = RgbImage::from_fn(32, 32, |x, y| {
            let p = base.get_pixel(x, y)[0];
            Rgb([p * 2, p * 2, p * 2])
        });
        let config = small_config(32);
        let (lo, _) = average_spectrum(&[base], &config, 0).unwrap();
        let (hi, _) = average_spectrum(&[doubled], &config, 0).unwrap();
        for (l, h) in lo.iter().zip(&hi) {
            assert!(h >= l || (h - l).abs() < 1e-9, "{} vs {}", l, h);
        }
        let sum_lo: f64 = lo.iter().sum();
        let sum_hi: f64 = hi.iter().sum();
        assert!(sum_hi > sum_lo);
    }

    #[test]
    fn checkerboard_difference_negative_at_nyquist() {
        let n = 64u32;
        let real = vec![constant(n, 128); 2];
        let checker = RgbImage::from_fn(n, n, |x, y| {
            let v = if (x + y) % 2 == 0 { 230 } else { 30 };
            Rgb([v, v, v])
        });
        let fake = vec![checker; 2];
        let result = spectrum_difference(&real, &fake, &small_config(n), 0).unwrap();
        // Nyquist in both axes shifts to the (0, 0) corner
        let corner = result.difference[0];
        assert!(corner < -1.0, "corner difference {}", corner);
        let most_negative = result
            .difference
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        assert_eq!(corner, most_negative);
    }

    #[test]
    fn empty_set_is_an_error() {
        assert!(matches!(
            average_spectrum(&[], &small_config(32), 0),
            Err(Error::EmptySet)
        ));
        assert!(matches!(
            spectrum_difference(&[], &[noise(32, 0)], &small_config(32), 0),
            Err(Error::EmptySet)
        ));
    }

    #[test]
    fn csv_and_heatmap_shapes() {
        let imgs = vec![noise(16, 3)];
        let (grid, _) = average_spectrum(&imgs, &small_config(16), 0).unwrap();
        let csv = grid_to_csv(&grid, 16);
        assert_eq!(csv.lines().count(), 16);
        assert_eq!(csv.lines().next().unwrap().split(',').count(), 16);
        let img = grid_to_gray(&grid, 16);
        assert_eq!(img.dimensions(), (16, 16));
    }

    #[test]
    fn odd_side_resize_path_works() {
        // inputs of mismatched size get resized to the common side
        let imgs = vec![noise(40, 1), noise(24, 2)];
        let (grid, n) = average_spectrum(&imgs, &small_config(32), 0).unwrap();
        assert_eq!(n, 2);
        assert_eq!(grid.len(), 32 * 32);
    }
}
