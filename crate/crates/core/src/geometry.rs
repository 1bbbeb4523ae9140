//! 2D affine transforms and the least-squares similarity fit.

use crate::error::{Error, Result};

/// Row-major 2x3 affine transform mapping `(x, y)` to
/// `(m[0][0]*x + m[0][1]*y + m[0][2], m[1][0]*x + m[1][1]*y + m[1][2])`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine {
    pub m: [[f64; 3]; 2],
}

impl Affine {
    pub fn identity() -> Self {
        Affine {
            m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
        }
    }

    /// Similarity transform: rotate by `theta`, scale by `scale`, then translate.
    pub fn similarity(theta: f64, scale: f64, tx: f64, ty: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Affine {
            m: [[scale * c, -scale * s, tx], [scale * s, scale * c, ty]],
        }
    }

    /// Axis-aligned scale plus translation.
    pub fn scale_translate(sx: f64, sy: f64, tx: f64, ty: f64) -> Self {
        Affine {
            m: [[sx, 0.0, tx], [0.0, sy, ty]],
        }
    }

    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        (
            self.m[0][0] * x + self.m[0][1] * y + self.m[0][2],
            self.m[1][0] * x + self.m[1][1] * y + self.m[1][2],
        )
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Affine) -> Affine {
        let a = &self.m;
        let b = &other.m;
        let mut m = [[0.0; 3]; 2];
        for r in 0..2 {
            for c in 0..2 {
                m[r][c] = a[r][0] * b[0][c] + a[r][1] * b[1][c];
            }
            m[r][2] = a[r][0] * b[0][2] + a[r][1] * b[1][2] + a[r][2];
        }
        Affine { m }
    }

    pub fn invert(&self) -> Result<Affine> {
        let [[a, b, tx], [c, d, ty]] = self.m;
        let det = a * d - b * c;
        if det.abs() < 1e-12 {
            return Err(Error::SingularTransform);
        }
        let ia = d / det;
        let ib = -b / det;
        let ic = -c / det;
        let id = a / det;
        Ok(Affine {
            m: [
                [ia, ib, -(ia * tx + ib * ty)],
                [ic, id, -(ic * tx + id * ty)],
            ],
        })
    }

    /// Uniform scale factor, valid for similarity transforms.
    pub fn scale(&self) -> f64 {
        let [[a, _, _], [c, _, _]] = self.m;
        (a * a + c * c).sqrt()
    }

    /// Rotation angle in radians, valid for similarity transforms.
    pub fn rotation(&self) -> f64 {
        self.m[1][0].atan2(self.m[0][0])
    }

    pub fn translation(&self) -> (f64, f64) {
        (self.m[0][2], self.m[1][2])
    }
}

/// Least-squares similarity fit: the transform `q ≈ s·R·p + t` minimizing
/// `Σ ‖A·p_i − q_i‖²` over rotation, uniform scale, and translation.
///
/// The fit is linear in the parameterization `(a, b, tx, ty)` with
/// `sR = [[a, -b], [b, a]]`, so the closed-form solution is the global
/// minimum. Reflections are not in the parameter space.
pub fn fit_similarity(src: &[(f64, f64)], dst: &[(f64, f64)]) -> Result<Affine> {
    assert_eq!(src.len(), dst.len());
    let n = src.len() as f64;
    if src.is_empty() {
        return Err(Error::DegenerateLandmarks("empty point set".into()));
    }
    let (mut mpx, mut mpy, mut mqx, mut mqy) = (0.0, 0.0, 0.0, 0.0);
    for (&(px, py), &(qx, qy)) in src.iter().zip(dst) {
        mpx += px;
        mpy += py;
        mqx += qx;
        mqy += qy;
    }
    mpx /= n;
    mpy /= n;
    mqx /= n;
    mqy /= n;

    // a = Σ p̃·q̃ / Σ‖p̃‖², b = Σ p̃×q̃ / Σ‖p̃‖² on centered points.
    let (mut dot, mut cross, mut norm) = (0.0, 0.0, 0.0);
    for (&(px, py), &(qx, qy)) in src.iter().zip(dst) {
        let (px, py) = (px - mpx, py - mpy);
        let (qx, qy) = (qx - mqx, qy - mqy);
        dot += px * qx + py * qy;
        cross += px * qy - py * qx;
        norm += px * px + py * py;
    }
    if norm < 1e-12 {
        return Err(Error::DegenerateLandmarks(
            "source points have zero spread".into(),
        ));
    }
    let a = dot / norm;
    let b = cross / norm;
    let tx = mqx - (a * mpx - b * mpy);
    let ty = mqy - (b * mpx + a * mpy);
    Ok(Affine {
        m: [[a, -b, tx], [b, a, ty]],
    })
}

/// Sum of squared residuals of `dst - A·src`.
pub fn similarity_residual(t: &Affine, src: &[(f64, f64)], dst: &[(f64, f64)]) -> f64 {
    src.iter()
        .zip(dst)
        .map(|(&(px, py), &(qx, qy))| {
            let (x, y) = t.apply(px, py);
            (x - qx).powi(2) + (y - qy).powi(2)
        })
        .sum()
}
