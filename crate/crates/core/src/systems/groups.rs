//! Matrix-group utilities shared by the worked systems.
//!
//! SU(2) is realized in real coordinates: an element or algebra vector is
//! (a⁰, a¹, a², a³) standing for the matrix a⁰I + i aᵃσₐ. The resulting real
//! algebra has basis {e, ι₁, ι₂, ι₃} with ιₐι_b = −δₐ_b e − εₐ_bc ι_c, so
//! products stay in real arithmetic and complex traces reduce to the linear
//! functional Tr = 2·(e-coefficient). so(3) is realized as (ℝ³, ×) through
//! the hat/vee maps together with 3×3 rotation matrices.

use crate::dual::Real;
use crate::error::{HjtError, Result};
use crate::linalg::{polar_orthogonalize, Mat};

/// Product in the real quaternionic realization of the 2×2 matrices
/// a⁰I + i a·σ: scalar part a⁰b⁰ − a·b, vector part a⁰b + b⁰a − a×b.
pub fn qmul<R: Real>(a: &[R], b: &[R]) -> [R; 4] {
    let s = a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3];
    let x = a[0] * b[1] + b[0] * a[1] - (a[2] * b[3] - a[3] * b[2]);
    let y = a[0] * b[2] + b[0] * a[2] - (a[3] * b[1] - a[1] * b[3]);
    let z = a[0] * b[3] + b[0] * a[3] - (a[1] * b[2] - a[2] * b[1]);
    [s, x, y, z]
}

/// Conjugate ā = a⁰ − a·ι; a·ā = |a|² e.
pub fn qconj<R: Real>(a: &[R]) -> [R; 4] {
    [a[0], -a[1], -a[2], -a[3]]
}

pub fn qnorm2<R: Real>(a: &[R]) -> R {
    a[0] * a[0] + a[1] * a[1] + a[2] * a[2] + a[3] * a[3]
}

/// Commutator [a, b] = ab − ba; lands in the ι-span for any inputs.
pub fn qbracket<R: Real>(a: &[R], b: &[R]) -> [R; 4] {
    let ab = qmul(a, b);
    let ba = qmul(b, a);
    [ab[0] - ba[0], ab[1] - ba[1], ab[2] - ba[2], ab[3] - ba[3]]
}

/// Trace of the 2×2 matrix realization: Tr(a⁰I + i a·σ) = 2a⁰.
pub fn qtrace(a: &[f64]) -> f64 {
    2.0 * a[0]
}

/// Residual of membership in su(2) (traceless antihermitian = pure ι-span).
pub fn su2_algebra_residual(a: &[f64]) -> f64 {
    a[0].abs()
}

// ---------------------------------------------------------------------------
// so(3).
// ---------------------------------------------------------------------------

/// hat: ℝ³ → so(3), (hat w)v = w × v.
pub fn hat(w: &[f64]) -> Mat {
    Mat::from_rows(&[
        vec![0.0, -w[2], w[1]],
        vec![w[2], 0.0, -w[0]],
        vec![-w[1], w[0], 0.0],
    ])
}

pub fn vee(m: &Mat) -> [f64; 3] {
    [m[(2, 1)], m[(0, 2)], m[(1, 0)]]
}

pub fn cross(a: &[f64], b: &[f64]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// exp(hat w) by the Rodrigues formula; exact rotation for any w.
pub fn rodrigues(w: &[f64]) -> Mat {
    let theta2 = w[0] * w[0] + w[1] * w[1] + w[2] * w[2];
    let theta = theta2.sqrt();
    let k = hat(w);
    let k2 = k.matmul(&k);
    // Series coefficients sin θ/θ and (1−cos θ)/θ² with small-angle guards.
    let (c1, c2) = if theta < 1e-6 {
        (1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    let mut r = Mat::identity(3);
    for i in 0..3 {
        for j in 0..3 {
            r[(i, j)] += c1 * k[(i, j)] + c2 * k2[(i, j)];
        }
    }
    r
}

// ---------------------------------------------------------------------------
// Group elements.
// ---------------------------------------------------------------------------

/// A point of a registered matrix group: SO(3) as a row-major 3×3 matrix
/// (k = 3, 9 entries) or SU(2) in the real parametrization y⁰..y³ (k = 2,
/// 4 entries).
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixGroupElement {
    pub k: usize,
    pub entries: Vec<f64>,
}

impl MatrixGroupElement {
    pub fn so3(entries: Vec<f64>) -> Self {
        assert_eq!(entries.len(), 9, "SO(3) elements carry 9 entries");
        MatrixGroupElement { k: 3, entries }
    }

    pub fn su2(y: Vec<f64>) -> Self {
        assert_eq!(y.len(), 4, "SU(2) elements carry 4 real parameters");
        MatrixGroupElement { k: 2, entries: y }
    }

    pub fn identity_so3() -> Self {
        let mut e = vec![0.0; 9];
        e[0] = 1.0;
        e[4] = 1.0;
        e[8] = 1.0;
        MatrixGroupElement { k: 3, entries: e }
    }

    pub fn as_mat3(&self) -> Mat {
        assert_eq!(self.k, 3);
        Mat::from_rows(&[
            self.entries[0..3].to_vec(),
            self.entries[3..6].to_vec(),
            self.entries[6..9].to_vec(),
        ])
    }

    /// ‖ggᵀ − I‖ + |det g − 1| for SO(3); ‖y‖² − 1 residual for SU(2).
    pub fn membership_residual(&self) -> f64 {
        match self.k {
            3 => {
                let g = self.as_mat3();
                let gt = g.transpose();
                let p = g.matmul(&gt);
                let mut r: f64 = 0.0;
                for i in 0..3 {
                    for j in 0..3 {
                        let target = if i == j { 1.0 } else { 0.0 };
                        r = r.max((p[(i, j)] - target).abs());
                    }
                }
                let d = g[(0, 0)] * (g[(1, 1)] * g[(2, 2)] - g[(1, 2)] * g[(2, 1)])
                    - g[(0, 1)] * (g[(1, 0)] * g[(2, 2)] - g[(1, 2)] * g[(2, 0)])
                    + g[(0, 2)] * (g[(1, 0)] * g[(2, 1)] - g[(1, 1)] * g[(2, 0)]);
                r.max((d - 1.0).abs())
            }
            _ => (qnorm2(&self.entries) - 1.0).abs(),
        }
    }

    /// Re-project onto the group: polar factor for SO(3), unit norm for SU(2).
    pub fn project(&mut self) -> Result<()> {
        match self.k {
            3 => {
                let g = polar_orthogonalize(&self.as_mat3())?;
                for i in 0..3 {
                    for j in 0..3 {
                        self.entries[3 * i + j] = g[(i, j)];
                    }
                }
                Ok(())
            }
            _ => {
                let n = qnorm2(&self.entries).sqrt();
                if n <= 0.0 || !n.is_finite() {
                    return Err(HjtError::ZeroPoint);
                }
                for e in &mut self.entries {
                    *e /= n;
                }
                Ok(())
            }
        }
    }
}
