//! Isotropic planar oscillator: L = ½|v|² − ½|q|², H = ½|p|² + ½|q|², with
//! the four quadratic first integrals
//!
//!   f₁ = v¹v² + q¹q²,   f₂ = (v¹)² + (q¹)²,
//!   f₃ = (v²)² + (q²)²,  f₄ = q¹v² − q²v¹,
//!
//! satisfying {f₂,f₃} = 0 and {f₁,f₄} = f₂ − f₃. Registered candidates: the
//! energy family X_E with wⁱ = ±√(2Eᵢ − (qⁱ)²) (standard solution) and the
//! angular family X_Cl built from f₁ = C, f₄ = l (generalized solution that
//! fails the standard problem). The alternative Lagrangian L' = v¹v² − q¹q²
//! generates the same dynamics with a different ω_L; it is registered as the
//! separate system ho2d_alt so candidates can be verified against both.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::dual::Real;
use crate::dynamics::{HamiltonianSystem, LagrangianSystem};
use crate::field::{guard_from, RealMap, RealVecMap, ScalarField, SectionField, SectionKind};
use crate::grid::{AxisSpec, GridSpec};
use crate::hj_hamiltonian::CandidateOneForm;
use crate::hj_lagrangian::CandidateVectorField;

use super::{BuiltCandidate, CandidateSpec, SystemDescriptor};

struct OscL;

impl RealMap for OscL {
    fn apply<R: Real>(&self, x: &[R]) -> R {
        let half = R::from_f64(0.5);
        half * (x[2] * x[2] + x[3] * x[3]) - half * (x[0] * x[0] + x[1] * x[1])
    }
}

struct OscH;

impl RealMap for OscH {
    fn apply<R: Real>(&self, x: &[R]) -> R {
        let half = R::from_f64(0.5);
        half * (x[2] * x[2] + x[3] * x[3]) + half * (x[0] * x[0] + x[1] * x[1])
    }
}

struct OscEnergy;

impl RealMap for OscEnergy {
    fn apply<R: Real>(&self, x: &[R]) -> R {
        let half = R::from_f64(0.5);
        half * (x[2] * x[2] + x[3] * x[3]) + half * (x[0] * x[0] + x[1] * x[1])
    }
}

/// L' = v¹v² − q¹q², an alternative regular Lagrangian for the same dynamics.
struct OscAltL;

impl RealMap for OscAltL {
    fn apply<R: Real>(&self, x: &[R]) -> R {
        x[2] * x[3] - x[0] * x[1]
    }
}

/// H' = p₁p₂ + q¹q², the Legendre partner of L'.
struct OscAltH;

impl RealMap for OscAltH {
    fn apply<R: Real>(&self, x: &[R]) -> R {
        x[2] * x[3] + x[0] * x[1]
    }
}

struct F1;
impl RealMap for F1 {
    fn apply<R: Real>(&self, x: &[R]) -> R {
        x[2] * x[3] + x[0] * x[1]
    }
}

struct F2;
impl RealMap for F2 {
    fn apply<R: Real>(&self, x: &[R]) -> R {
        x[2] * x[2] + x[0] * x[0]
    }
}

struct F3;
impl RealMap for F3 {
    fn apply<R: Real>(&self, x: &[R]) -> R {
        x[3] * x[3] + x[1] * x[1]
    }
}

struct F4;
impl RealMap for F4 {
    fn apply<R: Real>(&self, x: &[R]) -> R {
        x[0] * x[3] - x[1] * x[2]
    }
}

/// wⁱ = sᵢ√(2Eᵢ − (qⁱ)²).
struct EnergyFamily {
    e1: f64,
    e2: f64,
    s1: f64,
    s2: f64,
}

impl RealVecMap for EnergyFamily {
    fn apply<R: Real>(&self, q: &[R]) -> Vec<R> {
        let two = R::from_f64(2.0);
        let w1 = (two * R::from_f64(self.e1) - q[0] * q[0]).sqrt();
        let w2 = (two * R::from_f64(self.e2) - q[1] * q[1]).sqrt();
        vec![R::from_f64(self.s1) * w1, R::from_f64(self.s2) * w2]
    }
}

/// α with the same components as X_E; closed, since each aᵢ depends on qⁱ only.
struct EnergyForm {
    e1: f64,
    e2: f64,
}

impl RealVecMap for EnergyForm {
    fn apply<R: Real>(&self, q: &[R]) -> Vec<R> {
        let two = R::from_f64(2.0);
        vec![
            (two * R::from_f64(self.e1) - q[0] * q[0]).sqrt(),
            (two * R::from_f64(self.e2) - q[1] * q[1]).sqrt(),
        ]
    }
}

/// Solve f₁ = C, f₄ = l for (v¹, v²):
/// v¹ = (−l + s√(l² + 4q¹q²(C − q¹q²)))/(2q²), v² = (l + q²v¹)/q¹.
struct AngularFamily {
    c: f64,
    l: f64,
    s: f64,
}

impl RealVecMap for AngularFamily {
    fn apply<R: Real>(&self, q: &[R]) -> Vec<R> {
        let c = R::from_f64(self.c);
        let l = R::from_f64(self.l);
        let four = R::from_f64(4.0);
        let disc = l * l + four * q[0] * q[1] * (c - q[0] * q[1]);
        let v1 = (R::from_f64(self.s) * disc.sqrt() - l) / (R::from_f64(2.0) * q[1]);
        let v2 = (l + q[1] * v1) / q[0];
        vec![v1, v2]
    }
}

pub fn lagrangian_system() -> LagrangianSystem {
    LagrangianSystem::new(2, ScalarField::new(4, OscL))
}

pub fn hamiltonian_system() -> HamiltonianSystem {
    HamiltonianSystem::new(2, ScalarField::new(4, OscH))
}

pub fn alt_lagrangian_system() -> LagrangianSystem {
    LagrangianSystem::new(2, ScalarField::new(4, OscAltL))
}

fn integrals() -> Vec<(String, ScalarField)> {
    vec![
        ("f1".to_string(), ScalarField::new(4, F1)),
        ("f2".to_string(), ScalarField::new(4, F2)),
        ("f3".to_string(), ScalarField::new(4, F3)),
        ("f4".to_string(), ScalarField::new(4, F4)),
    ]
}

fn candidates() -> Vec<CandidateSpec> {
    vec![
        CandidateSpec::new(
            "XE",
            SectionKind::Vector,
            "energy family w_i = s_i sqrt(2E_i - q_i^2), standard solution",
            vec![("E1", 1.0), ("E2", 0.5), ("s1", 1.0), ("s2", 1.0)],
            Arc::new(|p: &BTreeMap<String, f64>| {
                let (e1, e2) = (p["E1"], p["E2"]);
                let section = SectionField::with_guard(
                    2,
                    SectionKind::Vector,
                    EnergyFamily {
                        e1,
                        e2,
                        s1: p["s1"],
                        s2: p["s2"],
                    },
                    guard_from(move |q: &[f64]| {
                        2.0 * e1 - q[0] * q[0] > 1e-10 && 2.0 * e2 - q[1] * q[1] > 1e-10
                    }),
                );
                Ok(BuiltCandidate::Vector(
                    CandidateVectorField::new("XE", section).with_params(p.clone()),
                ))
            }),
        )
        .standard(),
        CandidateSpec::new(
            "XCl",
            SectionKind::Vector,
            "angular family from f1 = C, f4 = l; generalized solution only",
            vec![("C", 1.0), ("l", 0.0), ("s", 1.0)],
            Arc::new(|p: &BTreeMap<String, f64>| {
                let (c, l) = (p["C"], p["l"]);
                let section = SectionField::with_guard(
                    2,
                    SectionKind::Vector,
                    AngularFamily { c, l, s: p["s"] },
                    guard_from(move |q: &[f64]| {
                        q[0].abs() > 1e-9
                            && q[1].abs() > 1e-9
                            && l * l + 4.0 * q[0] * q[1] * (c - q[0] * q[1]) > 1e-10
                    }),
                );
                Ok(BuiltCandidate::Vector(
                    CandidateVectorField::new("XCl", section).with_params(p.clone()),
                ))
            }),
        )
        .with_grid(GridSpec::new(vec![
            AxisSpec::new(0.5, 0.95, 5),
            AxisSpec::new(0.5, 0.95, 5),
        ])),
        CandidateSpec::new(
            "alphaE",
            SectionKind::OneForm,
            "closed one-form with the energy-family components; standard Hamiltonian solution",
            vec![("E1", 1.0), ("E2", 0.5)],
            Arc::new(|p: &BTreeMap<String, f64>| {
                let (e1, e2) = (p["E1"], p["E2"]);
                let section = SectionField::with_guard(
                    2,
                    SectionKind::OneForm,
                    EnergyForm { e1, e2 },
                    guard_from(move |q: &[f64]| {
                        2.0 * e1 - q[0] * q[0] > 1e-10 && 2.0 * e2 - q[1] * q[1] > 1e-10
                    }),
                );
                Ok(BuiltCandidate::OneForm(
                    CandidateOneForm::new("alphaE", section).with_params(p.clone()),
                ))
            }),
        )
        .standard(),
    ]
}

fn base_grid() -> GridSpec {
    GridSpec::new(vec![AxisSpec::new(-0.9, 0.9, 5), AxisSpec::new(-0.9, 0.9, 5)])
}

fn state_grid() -> GridSpec {
    GridSpec::new(vec![
        AxisSpec::new(-0.75, 0.75, 3),
        AxisSpec::new(-0.75, 0.75, 3),
        AxisSpec::new(0.25, 1.25, 3),
        AxisSpec::new(0.25, 1.25, 3),
    ])
}

pub fn descriptor() -> SystemDescriptor {
    SystemDescriptor {
        name: "ho2d",
        summary: "isotropic planar oscillator, L = |v|^2/2 - |q|^2/2",
        dof: 2,
        state_dim: 4,
        lagrangian: Some(lagrangian_system()),
        hamiltonian: Some(hamiltonian_system()),
        singular: false,
        candidates: candidates(),
        integrals: integrals(),
        conserved: vec![
            ("E".to_string(), ScalarField::new(4, OscEnergy)),
            ("f1".to_string(), ScalarField::new(4, F1)),
            ("f2".to_string(), ScalarField::new(4, F2)),
            ("f3".to_string(), ScalarField::new(4, F3)),
            ("f4".to_string(), ScalarField::new(4, F4)),
        ],
        dynamics: None,
        projection: None,
        state_guard: crate::field::guard_all(),
        default_x0: vec![1.0, 0.0, 0.0, 1.0],
        default_dt: 1e-3,
        default_steps: 1000,
        base_grid: base_grid(),
        state_grid: state_grid(),
        params: vec![],
        verify_override: None,
    }
}

/// Same dynamics under the alternative Lagrangian L' = v¹v² − q¹q².
pub fn descriptor_alt() -> SystemDescriptor {
    SystemDescriptor {
        name: "ho2d_alt",
        summary: "planar oscillator under the alternative Lagrangian L' = v1 v2 - q1 q2",
        dof: 2,
        state_dim: 4,
        lagrangian: Some(alt_lagrangian_system()),
        hamiltonian: Some(HamiltonianSystem::new(2, ScalarField::new(4, OscAltH))),
        singular: false,
        // X_E solves the generalized problem for L' too (the dynamics is the
        // same), but its pullback of ω_L' no longer vanishes; keep the
        // standard flag off.
        candidates: candidates()
            .into_iter()
            .map(|mut c| {
                c.standard = false;
                c
            })
            .collect(),
        integrals: integrals(),
        conserved: vec![
            ("E_alt".to_string(), ScalarField::new(4, F1)),
            ("f2".to_string(), ScalarField::new(4, F2)),
            ("f3".to_string(), ScalarField::new(4, F3)),
            ("f4".to_string(), ScalarField::new(4, F4)),
        ],
        dynamics: None,
        projection: None,
        state_guard: crate::field::guard_all(),
        default_x0: vec![1.0, 0.0, 0.0, 1.0],
        default_dt: 1e-3,
        default_steps: 1000,
        base_grid: base_grid(),
        state_grid: state_grid(),
        params: vec![],
        verify_override: None,
    }
}
