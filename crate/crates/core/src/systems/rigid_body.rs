//! Free rigid body about a fixed point, realized on the rotation group. The
//! attitude g and body angular velocity Ω evolve by
//!
//!   ġ = g·Ω̂,   I Ω̇ = (IΩ) × Ω,
//!
//! with I the diagonal inertia tensor in principal axes. The spatial angular
//! momentum m = g(IΩ) is constant, as are the kinetic energy ½Ω·IΩ and
//! |IΩ|². On a fixed momentum value μ the reduced energy
//! h_μ(g) = ½⟨I⁻¹(gᵀμ), gᵀμ⟩ is stationary along the group action:
//!
//!   μ·((gΩ)×ζ) + d/dt|₀ h_μ(exp(tζ̂)g) = 0 for every ζ,
//!
//! with Ω = I⁻¹(gᵀμ). rigid_body_solution_check evaluates the first summand
//! in closed form and the second by central difference and reports the sum.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::dual::Real;
use crate::error::{HjtError, Result};
use crate::field::{guard_from, RealMap, ScalarField};
use crate::grid::{AxisSpec, GridSpec};
use crate::linalg::Mat;

use super::groups::{cross, hat, rodrigues, MatrixGroupElement};
use super::SystemDescriptor;

/// Euler equations in principal axes: Ω̇ᵢ = (Iⱼ − I_k) Ωⱼ Ω_k / Iᵢ, cyclic.
pub fn euler_rhs(inertia: &[f64], omega: &[f64]) -> Result<Vec<f64>> {
    if inertia.len() != 3 || omega.len() != 3 {
        return Err(HjtError::DimensionMismatch {
            expected: 3,
            got: inertia.len().max(omega.len()),
        });
    }
    if inertia.iter().any(|i| *i <= 0.0) {
        return Err(HjtError::SingularInertia);
    }
    let (i1, i2, i3) = (inertia[0], inertia[1], inertia[2]);
    let (w1, w2, w3) = (omega[0], omega[1], omega[2]);
    Ok(vec![
        (i2 - i3) * w2 * w3 / i1,
        (i3 - i1) * w3 * w1 / i2,
        (i1 - i2) * w1 * w2 / i3,
    ])
}

/// Right-hand side of the coupled attitude system on 12-dimensional states
/// (g row-major in x[0..9], Ω in x[9..12]).
pub fn coupled_rhs(inertia: [f64; 3]) -> impl Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync {
    move |x: &[f64]| {
        if x.len() != 12 {
            return Err(HjtError::DimensionMismatch {
                expected: 12,
                got: x.len(),
            });
        }
        let om = &x[9..12];
        let k = hat(om);
        let mut out = vec![0.0; 12];
        for r in 0..3 {
            for c in 0..3 {
                let mut s = 0.0;
                for j in 0..3 {
                    s += x[3 * r + j] * k[(j, c)];
                }
                out[3 * r + c] = s;
            }
        }
        let dw = euler_rhs(&inertia, om)?;
        out[9..12].copy_from_slice(&dw);
        Ok(out)
    }
}

fn so3_block(x: &[f64]) -> MatrixGroupElement {
    MatrixGroupElement::so3(x[0..9].to_vec())
}

/// Kinetic energy ½Ω·IΩ on 12-dimensional states.
struct Kinetic {
    inertia: [f64; 3],
}

impl RealMap for Kinetic {
    fn apply<R: Real>(&self, x: &[R]) -> R {
        let half = R::from_f64(0.5);
        let mut s = R::zero();
        for i in 0..3 {
            s = s + R::from_f64(self.inertia[i]) * x[9 + i] * x[9 + i];
        }
        half * s
    }
}

/// |IΩ|² on 12-dimensional states.
struct MomentumNormSq {
    inertia: [f64; 3],
}

impl RealMap for MomentumNormSq {
    fn apply<R: Real>(&self, x: &[R]) -> R {
        let mut s = R::zero();
        for i in 0..3 {
            let m = R::from_f64(self.inertia[i]) * x[9 + i];
            s = s + m * m;
        }
        s
    }
}

/// Component of the spatial momentum m = g(IΩ).
struct SpatialMomentum {
    inertia: [f64; 3],
    row: usize,
}

impl RealMap for SpatialMomentum {
    fn apply<R: Real>(&self, x: &[R]) -> R {
        let mut s = R::zero();
        for j in 0..3 {
            s = s + x[3 * self.row + j] * R::from_f64(self.inertia[j]) * x[9 + j];
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct RigidBodyCheck {
    /// μ·((gΩ)×ζ) with Ω = I⁻¹(gᵀμ).
    pub summand_closed: f64,
    /// Central-difference derivative of h_μ(exp(tζ̂)g) at t = 0.
    pub summand_derivative: f64,
    /// |summand_closed + summand_derivative|.
    pub residual: f64,
}

fn reduced_energy(inertia: &[f64], mu: &[f64], g: &Mat) -> f64 {
    let mut h = 0.0;
    for i in 0..3 {
        let mut mi = 0.0;
        for r in 0..3 {
            mi += g[(r, i)] * mu[r];
        }
        h += 0.5 * mi * mi / inertia[i];
    }
    h
}

/// Evaluate the momentum-leaf stationarity identity at one attitude and one
/// probe direction. Errors with SingularInertia for non-positive moments and
/// NotInAlgebra when g is off the rotation group.
pub fn rigid_body_solution_check(
    inertia: &[f64],
    mu: &[f64],
    g: &MatrixGroupElement,
    zeta: &[f64],
) -> Result<RigidBodyCheck> {
    if inertia.len() != 3 || mu.len() != 3 || zeta.len() != 3 {
        return Err(HjtError::DimensionMismatch {
            expected: 3,
            got: inertia.len().min(mu.len()).min(zeta.len()),
        });
    }
    if inertia.iter().any(|i| *i <= 0.0) {
        return Err(HjtError::SingularInertia);
    }
    if g.k != 3 || g.membership_residual() > 1e-8 {
        return Err(HjtError::NotInAlgebra);
    }
    let gm = g.as_mat3();
    // Ω = I⁻¹(gᵀμ) in principal axes
    let mut omega = [0.0; 3];
    for i in 0..3 {
        let mut mi = 0.0;
        for r in 0..3 {
            mi += gm[(r, i)] * mu[r];
        }
        omega[i] = mi / inertia[i];
    }
    let gw = gm.matvec(&omega);
    let c = cross(&gw, zeta);
    let summand_closed = mu[0] * c[0] + mu[1] * c[1] + mu[2] * c[2];
    let h = 1e-5;
    let shifted = |t: f64| -> f64 {
        let step = rodrigues(&[t * zeta[0], t * zeta[1], t * zeta[2]]);
        reduced_energy(inertia, mu, &step.matmul(&gm))
    };
    let summand_derivative = (shifted(h) - shifted(-h)) / (2.0 * h);
    Ok(RigidBodyCheck {
        summand_closed,
        summand_derivative,
        residual: (summand_closed + summand_derivative).abs(),
    })
}

pub fn descriptor(params: &BTreeMap<String, f64>) -> SystemDescriptor {
    let inertia = [
        params.get("I1").copied().unwrap_or(1.0),
        params.get("I2").copied().unwrap_or(2.0),
        params.get("I3").copied().unwrap_or(3.0),
    ];
    let rhs = coupled_rhs(inertia);
    let mut x0 = vec![0.0; 12];
    x0[0] = 1.0;
    x0[4] = 1.0;
    x0[8] = 1.0;
    x0[9] = 1.0;
    x0[10] = 0.01;
    SystemDescriptor {
        name: "rigid_body",
        summary: "free rigid body: attitude and body angular velocity",
        dof: 3,
        state_dim: 12,
        lagrangian: None,
        hamiltonian: None,
        singular: false,
        candidates: vec![],
        integrals: vec![],
        conserved: vec![
            ("kinetic".to_string(), ScalarField::new(12, Kinetic { inertia })),
            ("msq".to_string(), ScalarField::new(12, MomentumNormSq { inertia })),
            ("m1".to_string(), ScalarField::new(12, SpatialMomentum { inertia, row: 0 })),
            ("m2".to_string(), ScalarField::new(12, SpatialMomentum { inertia, row: 1 })),
            ("m3".to_string(), ScalarField::new(12, SpatialMomentum { inertia, row: 2 })),
        ],
        dynamics: Some(Arc::new(rhs)),
        // re-orthonormalize the attitude block after every step
        projection: Some(Arc::new(|x: &mut [f64]| {
            let mut g = so3_block(x);
            if g.project().is_ok() {
                x[0..9].copy_from_slice(&g.entries);
            }
        })),
        state_guard: guard_from(|x: &[f64]| {
            x.iter().all(|c| c.is_finite()) && so3_block(x).membership_residual() < 1e-3
        }),
        default_x0: x0,
        default_dt: 1e-3,
        default_steps: 10_000,
        base_grid: GridSpec::new(vec![
            AxisSpec::new(-1.0, 1.0, 3),
            AxisSpec::new(-1.0, 1.0, 3),
            AxisSpec::new(-1.0, 1.0, 3),
        ]),
        state_grid: GridSpec::new(
            (0..12)
                .map(|i| {
                    let c = if i % 4 == 0 { 1.0 } else { 0.0 };
                    AxisSpec::new(c, c, 1)
                })
                .collect(),
        ),
        params: vec![
            ("I1", inertia[0]),
            ("I2", inertia[1]),
            ("I3", inertia[2]),
        ],
        verify_override: None,
    }
}
