//! Pixel-level primitives: affine warps, resampling, separable Gaussian blur.
//!
//! All warps use the corner convention: coordinate `(x, y)` addresses the
//! sample stored at pixel index `(x, y)`, so a landmark at `(10.0, 4.0)`
//! coincides with pixel `(10, 4)`.

use image::{GrayImage, Luma, Rgb, RgbImage};

use crate::geometry::Affine;

/// Border handling for convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Border {
    /// Out-of-range taps read zero.
    Zero,
    /// Out-of-range taps mirror across the edge (`-1 -> 0`, `n -> n-1`).
    Reflect,
}

fn reflect_index(i: i64, n: i64) -> i64 {
    let mut i = i;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - i - 1;
        } else {
            return i;
        }
    }
}

/// Bilinear sample at continuous `(x, y)`; missing neighbors read as black.
fn sample_bilinear_rgb(src: &RgbImage, x: f64, y: f64) -> [f64; 3] {
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let mut acc = [0.0f64; 3];
    for (dy, wy) in [(0i64, 1.0 - fy), (1, fy)] {
        for (dx, wx) in [(0i64, 1.0 - fx), (1, fx)] {
            let w = wx * wy;
            if w == 0.0 {
                continue;
            }
            let px = x0 as i64 + dx;
            let py = y0 as i64 + dy;
            if px >= 0 && py >= 0 && (px as u32) < src.width() && (py as u32) < src.height() {
                let p = src.get_pixel(px as u32, py as u32);
                for c in 0..3 {
                    acc[c] += w * p[c] as f64;
                }
            }
        }
    }
    acc
}

/// Warp a scalar grid through `map` (source -> output coordinates) with
/// bilinear resampling; out-of-range samples read zero.
pub fn warp_bilinear_f64(
    data: &[f64],
    w: u32,
    h: u32,
    map: &Affine,
    out_w: u32,
    out_h: u32,
) -> Vec<f64> {
    let inv = map.invert().expect("warp transform must be invertible");
    let mut out = vec![0.0; (out_w * out_h) as usize];
    for oy in 0..out_h {
        for ox in 0..out_w {
            let (sx, sy) = inv.apply(ox as f64, oy as f64);
            let x0 = sx.floor();
            let y0 = sy.floor();
            let fx = sx - x0;
            let fy = sy - y0;
            let mut acc = 0.0;
            for (dy, wy) in [(0i64, 1.0 - fy), (1, fy)] {
                for (dx, wx) in [(0i64, 1.0 - fx), (1, fx)] {
                    let weight = wx * wy;
                    if weight == 0.0 {
                        continue;
                    }
                    let px = x0 as i64 + dx;
                    let py = y0 as i64 + dy;
                    if px >= 0 && py >= 0 && (px as u32) < w && (py as u32) < h {
                        acc += weight * data[(py as u32 * w + px as u32) as usize];
                    }
                }
            }
            out[(oy * out_w + ox) as usize] = acc;
        }
    }
    out
}

/// Warp `src` through `map` (source -> output coordinates) into an
/// `out_w` x `out_h` image with bilinear resampling; out-of-frame samples
/// fill with black.
pub fn warp_bilinear_rgb(src: &RgbImage, map: &Affine, out_w: u32, out_h: u32) -> RgbImage {
    let inv = map.invert().expect("warp transform must be invertible");
    let mut out = RgbImage::new(out_w, out_h);
    for oy in 0..out_h {
        for ox in 0..out_w {
            let (sx, sy) = inv.apply(ox as f64, oy as f64);
            let v = sample_bilinear_rgb(src, sx, sy);
            out.put_pixel(
                ox,
                oy,
                Rgb([
                    v[0].round().clamp(0.0, 255.0) as u8,
                    v[1].round().clamp(0.0, 255.0) as u8,
                    v[2].round().clamp(0.0, 255.0) as u8,
                ]),
            );
        }
    }
    out
}

/// Same mapping as [`warp_bilinear_rgb`] but nearest-neighbor, for masks.
pub fn warp_nearest_gray(src: &GrayImage, map: &Affine, out_w: u32, out_h: u32) -> GrayImage {
    let inv = map.invert().expect("warp transform must be invertible");
    let mut out = GrayImage::new(out_w, out_h);
    for oy in 0..out_h {
        for ox in 0..out_w {
            let (sx, sy) = inv.apply(ox as f64, oy as f64);
            let px = (sx + 0.5).floor() as i64;
            let py = (sy + 0.5).floor() as i64;
            let v = if px >= 0
                && py >= 0
                && (px as u32) < src.width()
                && (py as u32) < src.height()
            {
                src.get_pixel(px as u32, py as u32)[0]
            } else {
                0
            };
            out.put_pixel(ox, oy, Luma([v]));
        }
    }
    out
}

/// Bilinear resize; edge taps replicate the border sample instead of
/// reading black.
pub fn resize_bilinear_rgb(src: &RgbImage, out_w: u32, out_h: u32) -> RgbImage {
    let sx = src.width() as f64 / out_w as f64;
    let sy = src.height() as f64 / out_h as f64;
    let clamp_x = |x: i64| x.clamp(0, src.width() as i64 - 1) as u32;
    let clamp_y = |y: i64| y.clamp(0, src.height() as i64 - 1) as u32;
    let mut out = RgbImage::new(out_w, out_h);
    for oy in 0..out_h {
        let fy = (oy as f64 + 0.5) * sy - 0.5;
        let y0 = fy.floor() as i64;
        let wy = fy - y0 as f64;
        for ox in 0..out_w {
            let fx = (ox as f64 + 0.5) * sx - 0.5;
            let x0 = fx.floor() as i64;
            let wx = fx - x0 as f64;
            let mut acc = [0.0f64; 3];
            for (dy, gy) in [(0i64, 1.0 - wy), (1, wy)] {
                for (dx, gx) in [(0i64, 1.0 - wx), (1, wx)] {
                    let p = src.get_pixel(clamp_x(x0 + dx), clamp_y(y0 + dy));
                    let g = gx * gy;
                    for c in 0..3 {
                        acc[c] += g * p[c] as f64;
                    }
                }
            }
            out.put_pixel(
                ox,
                oy,
                Rgb([
                    acc[0].round().clamp(0.0, 255.0) as u8,
                    acc[1].round().clamp(0.0, 255.0) as u8,
                    acc[2].round().clamp(0.0, 255.0) as u8,
                ]),
            );
        }
    }
    out
}

fn cubic_weight(t: f64) -> f64 {
    // cubic convolution kernel, a = -0.75
    let a = -0.75;
    let t = t.abs();
    if t <= 1.0 {
        (a + 2.0) * t * t * t - (a + 3.0) * t * t + 1.0
    } else if t < 2.0 {
        a * t * t * t - 5.0 * a * t * t + 8.0 * a * t - 4.0 * a
    } else {
        0.0
    }
}

/// Bicubic resize with replicated borders.
pub fn resize_bicubic_rgb(src: &RgbImage, out_w: u32, out_h: u32) -> RgbImage {
    let sx = src.width() as f64 / out_w as f64;
    let sy = src.height() as f64 / out_h as f64;
    let clamp_x = |x: i64| x.clamp(0, src.width() as i64 - 1) as u32;
    let clamp_y = |y: i64| y.clamp(0, src.height() as i64 - 1) as u32;
    let mut out = RgbImage::new(out_w, out_h);
    for oy in 0..out_h {
        let fy = (oy as f64 + 0.5) * sy - 0.5;
        let y0 = fy.floor() as i64;
        for ox in 0..out_w {
            let fx = (ox as f64 + 0.5) * sx - 0.5;
            let x0 = fx.floor() as i64;
            let mut acc = [0.0f64; 3];
            let mut norm = 0.0;
            for dy in -1i64..=2 {
                let wy = cubic_weight(fy - (y0 + dy) as f64);
                for dx in -1i64..=2 {
                    let w = wy * cubic_weight(fx - (x0 + dx) as f64);
                    if w == 0.0 {
                        continue;
                    }
                    let p = src.get_pixel(clamp_x(x0 + dx), clamp_y(y0 + dy));
                    for c in 0..3 {
                        acc[c] += w * p[c] as f64;
                    }
                    norm += w;
                }
            }
            out.put_pixel(
                ox,
                oy,
                Rgb([
                    (acc[0] / norm).round().clamp(0.0, 255.0) as u8,
                    (acc[1] / norm).round().clamp(0.0, 255.0) as u8,
                    (acc[2] / norm).round().clamp(0.0, 255.0) as u8,
                ]),
            );
        }
    }
    out
}

/// Box-average resize (area interpolation). Exact mean over the covered
/// source region when downscaling; falls back to bilinear when upscaling.
pub fn resize_area_rgb(src: &RgbImage, out_w: u32, out_h: u32) -> RgbImage {
    if out_w >= src.width() || out_h >= src.height() {
        return resize_bilinear_rgb(src, out_w, out_h);
    }
    let sx = src.width() as f64 / out_w as f64;
    let sy = src.height() as f64 / out_h as f64;
    let mut out = RgbImage::new(out_w, out_h);
    for oy in 0..out_h {
        let y0 = oy as f64 * sy;
        let y1 = (oy + 1) as f64 * sy;
        for ox in 0..out_w {
            let x0 = ox as f64 * sx;
            let x1 = (ox + 1) as f64 * sx;
            let mut acc = [0.0f64; 3];
            let mut area = 0.0;
            for py in y0.floor() as u32..(y1.ceil() as u32).min(src.height()) {
                let cy = ((py + 1) as f64).min(y1) - (py as f64).max(y0);
                for px in x0.floor() as u32..(x1.ceil() as u32).min(src.width()) {
                    let cx = ((px + 1) as f64).min(x1) - (px as f64).max(x0);
                    let w = cx * cy;
                    let p = src.get_pixel(px, py);
                    for c in 0..3 {
                        acc[c] += w * p[c] as f64;
                    }
                    area += w;
                }
            }
            out.put_pixel(
                ox,
                oy,
                Rgb([
                    (acc[0] / area).round().clamp(0.0, 255.0) as u8,
                    (acc[1] / area).round().clamp(0.0, 255.0) as u8,
                    (acc[2] / area).round().clamp(0.0, 255.0) as u8,
                ]),
            );
        }
    }
    out
}

/// Normalized 1D Gaussian kernel with radius `ceil(3*sigma)` (minimum 1).
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    assert!(sigma > 0.0);
    let radius = (3.0 * sigma).ceil().max(1.0) as usize;
    let mut k = Vec::with_capacity(2 * radius + 1);
    let denom = 2.0 * sigma * sigma;
    for i in -(radius as i64)..=radius as i64 {
        k.push((-(i * i) as f64 / denom).exp());
    }
    let sum: f64 = k.iter().sum();
    for v in &mut k {
        *v /= sum;
    }
    k
}

/// Separable convolution of a single `w` x `h` plane with a symmetric kernel.
pub fn convolve_separable(data: &[f64], w: usize, h: usize, kernel: &[f64], border: Border) -> Vec<f64> {
    assert_eq!(data.len(), w * h);
    let radius = kernel.len() / 2;
    let tap = |v: &[f64], idx: i64, n: i64, stride: usize, base: usize| -> f64 {
        match border {
            Border::Zero => {
                if idx < 0 || idx >= n {
                    0.0
                } else {
                    v[base + idx as usize * stride]
                }
            }
            Border::Reflect => v[base + reflect_index(idx, n) as usize * stride],
        }
    };
    // horizontal pass
    let mut tmp = vec![0.0f64; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, &kv) in kernel.iter().enumerate() {
                let sx = x as i64 + i as i64 - radius as i64;
                acc += kv * tap(data, sx, w as i64, 1, y * w);
            }
            tmp[y * w + x] = acc;
        }
    }
    // vertical pass
    let mut out = vec![0.0f64; w * h];
    for x in 0..w {
        for y in 0..h {
            let mut acc = 0.0;
            for (i, &kv) in kernel.iter().enumerate() {
                let sy = y as i64 + i as i64 - radius as i64;
                acc += kv * tap(&tmp, sy, h as i64, w, x);
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Gaussian blur of an RGB image with an explicit odd kernel size and
/// OpenCV's default sigma for that size.
pub fn gaussian_blur_rgb_ksize(src: &RgbImage, ksize: u32) -> RgbImage {
    assert!(ksize % 2 == 1 && ksize >= 3);
    let sigma = 0.3 * ((ksize as f64 - 1.0) * 0.5 - 1.0) + 0.8;
    gaussian_blur_rgb(src, sigma, (ksize / 2) as usize)
}

/// Gaussian blur of an RGB image with reflected borders. `radius` caps the
/// kernel half-width; pass `usize::MAX` for the default `ceil(3*sigma)`.
pub fn gaussian_blur_rgb(src: &RgbImage, sigma: f64, radius: usize) -> RgbImage {
    let mut kernel = gaussian_kernel(sigma);
    let full_radius = kernel.len() / 2;
    if radius < full_radius {
        kernel = kernel[full_radius - radius..=full_radius + radius].to_vec();
        let sum: f64 = kernel.iter().sum();
        for v in &mut kernel {
            *v /= sum;
        }
    }
    let (w, h) = (src.width() as usize, src.height() as usize);
    let mut planes = [vec![0.0f64; w * h], vec![0.0; w * h], vec![0.0; w * h]];
    for (i, p) in src.pixels().enumerate() {
        for c in 0..3 {
            planes[c][i] = p[c] as f64;
        }
    }
    let blurred: Vec<Vec<f64>> = planes
        .iter()
        .map(|p| convolve_separable(p, w, h, &kernel, Border::Reflect))
        .collect();
    let mut out = RgbImage::new(src.width(), src.height());
    for (i, p) in out.pixels_mut().enumerate() {
        *p = Rgb([
            blurred[0][i].round().clamp(0.0, 255.0) as u8,
            blurred[1][i].round().clamp(0.0, 255.0) as u8,
            blurred[2][i].round().clamp(0.0, 255.0) as u8,
        ]);
    }
    out
}

/// Rec. 601 luma in `[0, 1]`.
pub fn to_gray_f64(src: &RgbImage) -> Vec<f64> {
    src.pixels()
        .map(|p| (0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64) / 255.0)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient(w: u32, h: u32) -> RgbImage {
        RgbImage::from_fn(w, h, |x, y| {
            Rgb([(x * 8 % 256) as u8, (y * 8 % 256) as u8, ((x + y) % 256) as u8])
        })
    }

    #[test]
    fn identity_warp_is_identity() {
        let img = gradient(17, 13);
        let out = warp_bilinear_rgb(&img, &Affine::identity(), 17, 13);
        assert_eq!(img, out);
    }

    #[test]
    fn translation_shifts_pixels() {
        let img = gradient(16, 16);
        let map = Affine::scale_translate(1.0, 1.0, 3.0, 2.0);
        let out = warp_bilinear_rgb(&img, &map, 16, 16);
        assert_eq!(out.get_pixel(7, 9), img.get_pixel(4, 7));
        // region with no source data fills black
        assert_eq!(out.get_pixel(0, 0), &Rgb([0, 0, 0]));
    }

    #[test]
    fn kernel_normalized() {
        for sigma in [0.5, 1.0, 3.0, 12.8] {
            let k = gaussian_kernel(sigma);
            let sum: f64 = k.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            assert_eq!(k.len() % 2, 1);
        }
    }

    #[test]
    fn blur_preserves_constant_plane() {
        let data = vec![0.7f64; 20 * 10];
        let k = gaussian_kernel(2.0);
        let out = convolve_separable(&data, 20, 10, &k, Border::Reflect);
        for v in out {
            assert!((v - 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn area_resize_averages_blocks() {
        // 4x4 image of distinct values downscaled 2x: each output pixel is the
        // mean of its 2x2 block.
        let img = RgbImage::from_fn(4, 4, |x, y| Rgb([(y * 4 + x) as u8 * 16, 0, 0]));
        let out = resize_area_rgb(&img, 2, 2);
        assert_eq!(out.get_pixel(0, 0)[0], ((0.0 + 16.0 + 64.0 + 80.0) / 4.0_f64).round() as u8);
        assert_eq!(out.get_pixel(1, 1)[0], ((160 + 176 + 224 + 240) as f64 / 4.0).round() as u8);
    }

    #[test]
    fn resize_preserves_constant_images() {
        let img = RgbImage::from_pixel(8, 8, Rgb([200, 40, 90]));
        for (w, h) in [(23, 17), (4, 4), (8, 8), (64, 3)] {
            for out in [
                resize_bilinear_rgb(&img, w, h),
                resize_bicubic_rgb(&img, w, h),
                resize_area_rgb(&img, w, h),
            ] {
                assert!(out.pixels().all(|p| *p == Rgb([200, 40, 90])), "{}x{}", w, h);
            }
        }
    }

    #[test]
    fn bilinear_2x_downscale_averages_blocks() {
        // center-aligned sampling lands exactly between the four source
        // pixels of each 2x2 block
        let img = RgbImage::from_fn(4, 4, |x, y| Rgb([(y * 4 + x) as u8 * 16, 0, 0]));
        let out = resize_bilinear_rgb(&img, 2, 2);
        assert_eq!(out.get_pixel(0, 0)[0], 40);
        assert_eq!(out.get_pixel(1, 1)[0], 200);
    }

    #[test]
    fn bicubic_reproduces_linear_ramp_interior() {
        let img = RgbImage::from_fn(32, 8, |x, _| Rgb([(x * 8) as u8, 0, 0]));
        let out = resize_bicubic_rgb(&img, 64, 8);
        for x in 4..60u32 {
            let fx = (x as f64 + 0.5) * 0.5 - 0.5;
            let expect = fx * 8.0;
            assert!(
                (out.get_pixel(x, 4)[0] as f64 - expect).abs() <= 1.0,
                "x={} got {} expect {}",
                x,
                out.get_pixel(x, 4)[0],
                expect
            );
        }
    }

    #[test]
    fn nearest_mask_warp_keeps_values_binary() {
        let mut mask = GrayImage::new(8, 8);
        mask.put_pixel(3, 4, Luma([255]));
        let map = Affine::scale_translate(2.0, 2.0, 0.0, 0.0);
        let out = warp_nearest_gray(&mask, &map, 16, 16);
        assert!(out.pixels().all(|p| p[0] == 0 || p[0] == 255));
        assert!(out.pixels().any(|p| p[0] == 255));
    }
}
