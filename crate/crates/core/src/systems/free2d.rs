//! Free particle on the plane: L = ½((v¹)² + (v²)²), H = ½((p₁)² + (p₂)²).
//!
//! Registered candidates: the rational family X = k ∂₁ + ((k q² − l)/q¹) ∂₂,
//! a generalized solution whose pullback X*ω_L = (k q² − l)/(q¹)² dq¹∧dq² is
//! nonzero away from the invariant line, so the standard problem fails; the
//! uniform field X = (c₁, c₂), a standard solution; and the one-form
//! α = (c/q¹) dq², a generalized solution of the Hamiltonian problem that is
//! not closed.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::dual::Real;
use crate::dynamics::{HamiltonianSystem, LagrangianSystem};
use crate::field::{guard_from, ConstantMap, RealMap, RealVecMap, ScalarField, SectionField, SectionKind};
use crate::grid::{AxisSpec, GridSpec};
use crate::hj_hamiltonian::CandidateOneForm;
use crate::hj_lagrangian::CandidateVectorField;

use super::{BuiltCandidate, CandidateSpec, SystemDescriptor};

struct FreeEnergy;

impl RealMap for FreeEnergy {
    fn apply<R: Real>(&self, x: &[R]) -> R {
        R::from_f64(0.5) * (x[2] * x[2] + x[3] * x[3])
    }
}

struct FreeH;

impl RealMap for FreeH {
    fn apply<R: Real>(&self, x: &[R]) -> R {
        R::from_f64(0.5) * (x[2] * x[2] + x[3] * x[3])
    }
}

/// Velocity component vⁱ as a state function.
struct Momentum(usize);

impl RealMap for Momentum {
    fn apply<R: Real>(&self, x: &[R]) -> R {
        x[2 + self.0]
    }
}

/// X = (k, (k q² − l)/q¹).
struct Rational {
    k: f64,
    l: f64,
}

impl RealVecMap for Rational {
    fn apply<R: Real>(&self, q: &[R]) -> Vec<R> {
        let k = R::from_f64(self.k);
        let l = R::from_f64(self.l);
        vec![k, (k * q[1] - l) / q[0]]
    }
}

/// α = (0, c/q¹).
struct RationalForm {
    c: f64,
}

impl RealVecMap for RationalForm {
    fn apply<R: Real>(&self, q: &[R]) -> Vec<R> {
        vec![R::zero(), R::from_f64(self.c) / q[0]]
    }
}

pub fn lagrangian_system() -> LagrangianSystem {
    LagrangianSystem::new(2, ScalarField::new(4, FreeEnergy))
}

pub fn hamiltonian_system() -> HamiltonianSystem {
    HamiltonianSystem::new(2, ScalarField::new(4, FreeH))
}

fn off_axis() -> crate::field::Guard {
    guard_from(|q: &[f64]| q[0].abs() > 1e-9)
}

pub fn descriptor() -> SystemDescriptor {
    let candidates = vec![
        CandidateSpec::new(
            "Xkl",
            SectionKind::Vector,
            "rational generalized solution k d1 + ((k q2 - l)/q1) d2",
            vec![("k", 1.0), ("l", 0.0)],
            Arc::new(|p: &BTreeMap<String, f64>| {
                let section = SectionField::with_guard(
                    2,
                    SectionKind::Vector,
                    Rational {
                        k: p["k"],
                        l: p["l"],
                    },
                    off_axis(),
                );
                Ok(BuiltCandidate::Vector(
                    CandidateVectorField::new("Xkl", section).with_params(p.clone()),
                ))
            }),
        ),
        CandidateSpec::new(
            "Xuniform",
            SectionKind::Vector,
            "constant field (c1, c2), a standard solution",
            vec![("c1", 1.0), ("c2", 0.5)],
            Arc::new(|p: &BTreeMap<String, f64>| {
                let section = SectionField::new(
                    2,
                    SectionKind::Vector,
                    ConstantMap(vec![p["c1"], p["c2"]]),
                );
                Ok(BuiltCandidate::Vector(
                    CandidateVectorField::new("Xuniform", section).with_params(p.clone()),
                ))
            }),
        )
        .standard(),
        CandidateSpec::new(
            "alpha",
            SectionKind::OneForm,
            "one-form (c/q1) dq2, generalized Hamiltonian solution, not closed",
            vec![("c", 1.0)],
            Arc::new(|p: &BTreeMap<String, f64>| {
                let section = SectionField::with_guard(
                    2,
                    SectionKind::OneForm,
                    RationalForm { c: p["c"] },
                    off_axis(),
                );
                Ok(BuiltCandidate::OneForm(
                    CandidateOneForm::new("alpha", section).with_params(p.clone()),
                ))
            }),
        ),
    ];

    SystemDescriptor {
        name: "free2d",
        summary: "free particle on the plane, L = |v|^2/2",
        dof: 2,
        state_dim: 4,
        lagrangian: Some(lagrangian_system()),
        hamiltonian: Some(hamiltonian_system()),
        singular: false,
        candidates,
        integrals: vec![
            ("v1".to_string(), ScalarField::new(4, Momentum(0))),
            ("v2".to_string(), ScalarField::new(4, Momentum(1))),
        ],
        conserved: vec![
            ("E".to_string(), ScalarField::new(4, FreeEnergy)),
            ("v1".to_string(), ScalarField::new(4, Momentum(0))),
            ("v2".to_string(), ScalarField::new(4, Momentum(1))),
        ],
        dynamics: None,
        projection: None,
        state_guard: crate::field::guard_all(),
        default_x0: vec![1.0, 1.0, 1.0, 0.5],
        default_dt: 1e-3,
        default_steps: 1000,
        base_grid: GridSpec::new(vec![
            AxisSpec::new(0.5, 2.0, 7),
            AxisSpec::new(-1.0, 1.0, 7),
        ]),
        state_grid: GridSpec::new(vec![
            AxisSpec::new(0.5, 1.5, 3),
            AxisSpec::new(-1.0, 1.0, 3),
            AxisSpec::new(0.5, 1.5, 3),
            AxisSpec::new(-1.0, 1.0, 3),
        ]),
        params: vec![],
        verify_override: None,
    }
}
