//! Planar length Lagrangian L = √(v·v), the prototype singular system: the
//! fiber Hessian W = (I − v̂v̂ᵀ)/|v| has kernel span{v}, the energy
//! E_L = v·∂L/∂v − L vanishes identically, and the dynamics is the geodesic
//! flow (q̇, v̇) = (v, 0) up to reparametrization. Unit-length constant and
//! radial fields solve the standard problem; the rotational unit field does
//! not solve even the generalized one.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::dual::Real;
use crate::dynamics::LagrangianSystem;
use crate::field::{guard_from, RealMap, RealVecMap, ScalarField, SectionField, SectionKind};
use crate::grid::{AxisSpec, GridSpec};
use crate::hj_lagrangian::CandidateVectorField;

use super::{BuiltCandidate, CandidateSpec, SystemDescriptor};

struct LengthL;

impl RealMap for LengthL {
    fn apply<R: Real>(&self, x: &[R]) -> R {
        (x[2] * x[2] + x[3] * x[3]).sqrt()
    }
}

struct Speed;

impl RealMap for Speed {
    fn apply<R: Real>(&self, x: &[R]) -> R {
        (x[2] * x[2] + x[3] * x[3]).sqrt()
    }
}

struct Velocity(usize);

impl RealMap for Velocity {
    fn apply<R: Real>(&self, x: &[R]) -> R {
        x[2 + self.0]
    }
}

/// Constant direction, normalized to unit length.
struct UnitConstant {
    c1: f64,
    c2: f64,
}

impl RealVecMap for UnitConstant {
    fn apply<R: Real>(&self, _q: &[R]) -> Vec<R> {
        let norm = (self.c1 * self.c1 + self.c2 * self.c2).sqrt();
        vec![R::from_f64(self.c1 / norm), R::from_f64(self.c2 / norm)]
    }
}

struct RadialUnit;

impl RealVecMap for RadialUnit {
    fn apply<R: Real>(&self, q: &[R]) -> Vec<R> {
        let r = (q[0] * q[0] + q[1] * q[1]).sqrt();
        vec![q[0] / r, q[1] / r]
    }
}

struct RotationalUnit;

impl RealVecMap for RotationalUnit {
    fn apply<R: Real>(&self, q: &[R]) -> Vec<R> {
        let r = (q[0] * q[0] + q[1] * q[1]).sqrt();
        vec![R::zero() - q[1] / r, q[0] / r]
    }
}

fn moving_states() -> crate::field::Guard {
    guard_from(|x: &[f64]| x[2] * x[2] + x[3] * x[3] > 1e-12)
}

fn off_origin() -> crate::field::Guard {
    guard_from(|q: &[f64]| q[0] * q[0] + q[1] * q[1] > 1e-12)
}

pub fn lagrangian_system() -> LagrangianSystem {
    LagrangianSystem::new(2, ScalarField::with_guard(4, LengthL, moving_states()))
}

fn off_origin_grid() -> GridSpec {
    GridSpec::new(vec![AxisSpec::new(0.5, 1.5, 5), AxisSpec::new(0.5, 1.5, 5)])
}

fn candidates() -> Vec<CandidateSpec> {
    vec![
        CandidateSpec::new(
            "Xunit",
            SectionKind::Vector,
            "constant unit direction, standard solution",
            vec![("c1", 1.0), ("c2", 0.0)],
            Arc::new(|p: &BTreeMap<String, f64>| {
                let (c1, c2) = (p["c1"], p["c2"]);
                if c1 * c1 + c2 * c2 < 1e-18 {
                    return Err(crate::error::HjtError::ZeroPoint);
                }
                let section = SectionField::new(2, SectionKind::Vector, UnitConstant { c1, c2 });
                Ok(BuiltCandidate::Vector(
                    CandidateVectorField::new("Xunit", section).with_params(p.clone()),
                ))
            }),
        )
        .standard(),
        CandidateSpec::new(
            "Xrad",
            SectionKind::Vector,
            "radial unit field q/|q|, geodesic away from the origin",
            vec![],
            Arc::new(|p: &BTreeMap<String, f64>| {
                let section =
                    SectionField::with_guard(2, SectionKind::Vector, RadialUnit, off_origin());
                Ok(BuiltCandidate::Vector(
                    CandidateVectorField::new("Xrad", section).with_params(p.clone()),
                ))
            }),
        )
        .with_grid(off_origin_grid()),
        CandidateSpec::new(
            "Xrot",
            SectionKind::Vector,
            "rotational unit field, fails the generalized problem",
            vec![],
            Arc::new(|p: &BTreeMap<String, f64>| {
                let section =
                    SectionField::with_guard(2, SectionKind::Vector, RotationalUnit, off_origin());
                Ok(BuiltCandidate::Vector(
                    CandidateVectorField::new("Xrot", section).with_params(p.clone()),
                ))
            }),
        )
        .with_grid(off_origin_grid()),
    ]
}

pub fn descriptor() -> SystemDescriptor {
    let sys = lagrangian_system();
    SystemDescriptor {
        name: "rel2d",
        summary: "planar length Lagrangian L = sqrt(v.v), singular",
        dof: 2,
        state_dim: 4,
        lagrangian: Some(sys),
        hamiltonian: None,
        singular: true,
        candidates: candidates(),
        integrals: vec![
            ("v1".to_string(), ScalarField::new(4, Velocity(0))),
            ("v2".to_string(), ScalarField::new(4, Velocity(1))),
        ],
        conserved: vec![
            ("speed".to_string(), ScalarField::new(4, Speed)),
            ("v1".to_string(), ScalarField::new(4, Velocity(0))),
            ("v2".to_string(), ScalarField::new(4, Velocity(1))),
        ],
        // Geodesic flow; the force equation determines v̇ only up to Ker W,
        // and the minimum-norm representative is v̇ = 0.
        dynamics: Some(Arc::new(|x: &[f64]| Ok(vec![x[2], x[3], 0.0, 0.0]))),
        projection: None,
        state_guard: moving_states(),
        default_x0: vec![0.0, 0.0, 0.6, 0.8],
        default_dt: 1e-3,
        default_steps: 1000,
        base_grid: GridSpec::new(vec![AxisSpec::new(-1.0, 1.0, 5), AxisSpec::new(-1.0, 1.0, 5)]),
        state_grid: GridSpec::new(vec![
            AxisSpec::new(-0.75, 0.75, 3),
            AxisSpec::new(-0.75, 0.75, 3),
            AxisSpec::new(0.25, 1.25, 3),
            AxisSpec::new(0.25, 1.25, 3),
        ]),
        params: vec![],
        verify_override: None,
    }
}
