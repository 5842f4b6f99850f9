//! Homogeneous extension of time-dependent Lagrangians. A Lagrangian
//! L_td(t, q, v) on ℝ×TQ lifts to the extended configuration space with
//! coordinates (x⁰, x, w⁰, w) as
//!
//!   L̂(x⁰, x, w⁰, w) = w⁰ · L_td(x⁰, x, w/w⁰),   w⁰ > 0,
//!
//! which is positively homogeneous of degree one in (w⁰, w), so its energy
//! vanishes identically and its fiber Hessian is singular. On the chart
//! w⁰ = 1 the extended dynamics reproduces the time-dependent flow, and the
//! Cartan one-form evaluates to (−E_L, ∂L/∂v, 0, 0). The Hamilton–Jacobi
//! residual of a time-dependent generating function S(t, q) is
//!
//!   ∂S/∂t + H_td(t, q, ∂S/∂q).

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::dual::{Real, D1, D2, D3};
use crate::error::{HjtError, Result};
use crate::field::{guard_from, Guard, RealMap, ScalarField, ScalarFn, SectionField, SectionKind};
use crate::geometry::{grad, DiffConfig};
use crate::grid::{AxisSpec, GridSpec};
use crate::hj_lagrangian::CandidateVectorField;

use super::{BuiltCandidate, CandidateSpec, SystemDescriptor};

/// L̂ = w⁰ · L_td(x⁰, x, w/w⁰) over extended states
/// (x⁰, x¹..xⁿ, w⁰, w¹..wⁿ).
struct ExtendedL {
    td: Arc<dyn ScalarFn>,
    n: usize,
}

impl ExtendedL {
    fn pack<R: Real>(&self, x: &[R]) -> (Vec<R>, R) {
        let n = self.n;
        let w0 = x[n + 1];
        let mut arg = Vec::with_capacity(2 * n + 1);
        arg.push(x[0]);
        for i in 0..n {
            arg.push(x[1 + i]);
        }
        for i in 0..n {
            arg.push(x[n + 2 + i] / w0);
        }
        (arg, w0)
    }
}

impl ScalarFn for ExtendedL {
    fn eval0(&self, x: &[f64]) -> f64 {
        let (arg, w0) = self.pack(x);
        w0 * self.td.eval0(&arg)
    }
    fn eval1(&self, x: &[D1]) -> D1 {
        let (arg, w0) = self.pack(x);
        w0 * self.td.eval1(&arg)
    }
    fn eval2(&self, x: &[D2]) -> D2 {
        let (arg, w0) = self.pack(x);
        w0 * self.td.eval2(&arg)
    }
    fn eval3(&self, x: &[D3]) -> D3 {
        let (arg, w0) = self.pack(x);
        w0 * self.td.eval3(&arg)
    }
}

fn forward_time_fiber(n: usize) -> Guard {
    guard_from(move |x: &[f64]| x.len() == 2 * n + 2 && x[n + 1] > 1e-9)
}

/// Extend a time-dependent Lagrangian (arity 2n+1, arguments (t, q, v)) to
/// the homogeneous Lagrangian system on the (n+1)-dimensional extended
/// configuration space.
pub fn homogeneous_extension(td: ScalarField, n: usize) -> LagrangianExtension {
    assert_eq!(td.arity(), 2 * n + 1, "time-dependent Lagrangian takes (t, q, v)");
    let field = ScalarField::with_guard(
        2 * n + 2,
        ExtendedL { td: td.shared(), n },
        forward_time_fiber(n),
    );
    LagrangianExtension {
        system: crate::dynamics::LagrangianSystem::new(n + 1, field),
        n,
    }
}

/// The extended system together with chart maps between time-dependent
/// states (t, q, v) and extended states (x⁰, x, w⁰, w).
pub struct LagrangianExtension {
    pub system: crate::dynamics::LagrangianSystem,
    n: usize,
}

impl LagrangianExtension {
    /// (t, q, v) ↦ (t, q, 1, v).
    pub fn chart_lift(&self, t: f64, qv: &[f64]) -> Vec<f64> {
        assert_eq!(qv.len(), 2 * self.n, "expected (q, v)");
        let n = self.n;
        let mut out = Vec::with_capacity(2 * n + 2);
        out.push(t);
        out.extend_from_slice(&qv[0..n]);
        out.push(1.0);
        out.extend_from_slice(&qv[n..2 * n]);
        out
    }

    /// (x⁰, x, w⁰, w) ↦ (t, q, v) with v = w/w⁰.
    pub fn chart_project(&self, ext: &[f64]) -> Result<(f64, Vec<f64>)> {
        let n = self.n;
        if ext.len() != 2 * n + 2 {
            return Err(HjtError::DimensionMismatch {
                expected: 2 * n + 2,
                got: ext.len(),
            });
        }
        let w0 = ext[n + 1];
        if w0 <= 1e-9 {
            return Err(HjtError::GuardViolation);
        }
        let mut qv = Vec::with_capacity(2 * n);
        qv.extend_from_slice(&ext[1..n + 1]);
        for i in 0..n {
            qv.push(ext[n + 2 + i] / w0);
        }
        Ok((ext[0], qv))
    }
}

/// ∂S/∂t + H_td(t, q, ∂S/∂q) at one point (t, q).
pub fn td_hj_residual(
    h_td: &ScalarField,
    s: &ScalarField,
    tq: &[f64],
    cfg: &DiffConfig,
) -> Result<f64> {
    let n = s.arity() - 1;
    assert_eq!(h_td.arity(), 2 * n + 1, "Hamiltonian takes (t, q, p)");
    if tq.len() != n + 1 {
        return Err(HjtError::DimensionMismatch {
            expected: n + 1,
            got: tq.len(),
        });
    }
    let ds = grad(s, tq, cfg)?;
    let mut arg = Vec::with_capacity(2 * n + 1);
    arg.extend_from_slice(tq);
    arg.extend_from_slice(&ds[1..]);
    Ok(ds[0] + h_td.value(&arg)?)
}

struct FreeTdL;

impl RealMap for FreeTdL {
    fn apply<R: Real>(&self, x: &[R]) -> R {
        R::from_f64(0.5) * x[2] * x[2]
    }
}

struct FreeTdH;

impl RealMap for FreeTdH {
    fn apply<R: Real>(&self, x: &[R]) -> R {
        R::from_f64(0.5) * x[2] * x[2]
    }
}

pub fn free_td_lagrangian() -> ScalarField {
    ScalarField::new(3, FreeTdL)
}

pub fn free_td_hamiltonian() -> ScalarField {
    ScalarField::new(3, FreeTdH)
}

/// S(t, q) = a q − ½a²t, the plane-wave solution of ∂S/∂t + ½(∂S/∂q)² = 0.
pub fn plane_wave_action(a: f64) -> ScalarField {
    struct Plane {
        a: f64,
    }
    impl RealMap for Plane {
        fn apply<R: Real>(&self, x: &[R]) -> R {
            let a = R::from_f64(self.a);
            a * x[1] - R::from_f64(0.5) * a * a * x[0]
        }
    }
    ScalarField::new(2, Plane { a })
}

/// S(t, q) = W(q) − Et with W = √(2E) q, the separated stationary form.
pub fn separated_action(e: f64) -> ScalarField {
    assert!(e > 0.0, "separation constant must be positive");
    struct Separated {
        e: f64,
    }
    impl RealMap for Separated {
        fn apply<R: Real>(&self, x: &[R]) -> R {
            R::from_f64((2.0 * self.e).sqrt()) * x[1] - R::from_f64(self.e) * x[0]
        }
    }
    ScalarField::new(2, Separated { e })
}

/// Energy of the extended Lagrangian, identically zero by homogeneity.
struct ExtendedVelocity;

impl RealMap for ExtendedVelocity {
    fn apply<R: Real>(&self, x: &[R]) -> R {
        x[3] / x[2]
    }
}

struct FiberScale;

impl RealMap for FiberScale {
    fn apply<R: Real>(&self, x: &[R]) -> R {
        x[2]
    }
}

fn candidates() -> Vec<CandidateSpec> {
    vec![CandidateSpec::new(
        "Xplane",
        SectionKind::Vector,
        "extended plane-wave field (1, a); standard solution on the w0 = 1 chart",
        vec![("a", 0.5)],
        Arc::new(|p: &BTreeMap<String, f64>| {
            let section = SectionField::new(
                2,
                SectionKind::Vector,
                crate::field::ConstantMap(vec![1.0, p["a"]]),
            );
            Ok(BuiltCandidate::Vector(
                CandidateVectorField::new("Xplane", section).with_params(p.clone()),
            ))
        }),
    )
    .standard()]
}

pub fn descriptor() -> SystemDescriptor {
    let ext = homogeneous_extension(free_td_lagrangian(), 1);
    let energy_field = crate::dynamics::energy(&ext.system);
    SystemDescriptor {
        name: "td_free",
        summary: "free particle with time adjoined, homogeneous extension",
        dof: 2,
        state_dim: 4,
        lagrangian: Some(ext.system),
        hamiltonian: None,
        singular: true,
        candidates: candidates(),
        integrals: vec![],
        conserved: vec![
            ("EL".to_string(), energy_field),
            ("vel".to_string(), ScalarField::with_guard(4, ExtendedVelocity, forward_time_fiber(1))),
            ("w0".to_string(), ScalarField::with_guard(4, FiberScale, forward_time_fiber(1))),
        ],
        // reparametrization-fixed representative of the extended dynamics
        dynamics: Some(Arc::new(|x: &[f64]| {
            if x.len() != 4 {
                return Err(HjtError::DimensionMismatch {
                    expected: 4,
                    got: x.len(),
                });
            }
            Ok(vec![x[2], x[3], 0.0, 0.0])
        })),
        projection: None,
        state_guard: forward_time_fiber(1),
        default_x0: vec![0.0, 0.0, 1.0, 0.5],
        default_dt: 1e-3,
        default_steps: 1000,
        base_grid: GridSpec::new(vec![AxisSpec::new(0.0, 1.0, 5), AxisSpec::new(-1.0, 1.0, 5)]),
        state_grid: GridSpec::new(vec![
            AxisSpec::new(0.0, 1.0, 3),
            AxisSpec::new(-1.0, 1.0, 3),
            AxisSpec::new(0.5, 1.5, 3),
            AxisSpec::new(-1.0, 1.0, 3),
        ]),
        params: vec![],
        verify_override: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{cartan_forms, energy, integrate};
    use crate::hj_lagrangian::{verify, VerifyMode};

    #[test]
    fn extension_value_oracle() {
        let ext = homogeneous_extension(free_td_lagrangian(), 1);
        let v = ext.system.lagrangian().value(&[0.0, 1.0, 2.0, 3.0]).unwrap();
        assert!((v - 2.25).abs() < 1e-15, "w0 L(t, q, w/w0) = 9/4");
    }

    #[test]
    fn energy_vanishes_and_degree_one_homogeneity_holds() {
        let ext = homogeneous_extension(free_td_lagrangian(), 1);
        let e = energy(&ext.system);
        let l = ext.system.lagrangian();
        for k in 0..20 {
            let t = 0.1 + 0.31 * k as f64;
            let x = [t.sin(), t.cos(), 0.5 + 0.4 * t.sin().abs(), t.cos() * 0.8];
            assert!(e.value(&x).unwrap().abs() < 1e-12);
            let scaled = [x[0], x[1], 2.0 * x[2], 2.0 * x[3]];
            let ratio = l.value(&scaled).unwrap() - 2.0 * l.value(&x).unwrap();
            assert!(ratio.abs() < 1e-12);
        }
    }

    #[test]
    fn cartan_oneform_reduces_to_the_time_dependent_pair() {
        let ext = homogeneous_extension(free_td_lagrangian(), 1);
        let state = ext.chart_lift(0.3, &[0.7, 0.8]);
        let (theta, _) = cartan_forms(&ext.system, &state, &DiffConfig::default()).unwrap();
        // θ = (−E_L, ∂L/∂v, 0, 0) with E_L = ½v² for the free particle
        assert!((theta[0] + 0.32).abs() < 1e-12);
        assert!((theta[1] - 0.8).abs() < 1e-12);
        assert!(theta[2].abs() < 1e-12);
        assert!(theta[3].abs() < 1e-12);
    }

    #[test]
    fn chart_maps_round_trip() {
        let ext = homogeneous_extension(free_td_lagrangian(), 1);
        let s = ext.chart_lift(0.4, &[1.2, -0.7]);
        assert_eq!(s, vec![0.4, 1.2, 1.0, -0.7]);
        let (t, qv) = ext.chart_project(&[0.4, 1.2, 2.0, -1.4]).unwrap();
        assert_eq!(t, 0.4);
        assert_eq!(qv, vec![1.2, -0.7]);
        let err = ext.chart_project(&[0.0, 0.0, -1.0, 0.0]).unwrap_err();
        assert_eq!(err, HjtError::GuardViolation);
    }

    #[test]
    fn plane_wave_action_solves_the_time_dependent_equation() {
        let h = free_td_hamiltonian();
        let s = plane_wave_action(0.7);
        let cfg = DiffConfig::default();
        for t in [0.0, 0.4, 1.3] {
            for q in [-0.8, 0.1, 0.9] {
                let r = td_hj_residual(&h, &s, &[t, q], &cfg).unwrap();
                assert!(r.abs() < 1e-12, "residual {} at ({}, {})", r, t, q);
            }
        }
    }

    #[test]
    fn separated_action_solves_the_time_dependent_equation() {
        let h = free_td_hamiltonian();
        let s = separated_action(0.9);
        let cfg = DiffConfig::default();
        for t in [0.0, 0.6] {
            for q in [-0.5, 0.7] {
                let r = td_hj_residual(&h, &s, &[t, q], &cfg).unwrap();
                assert!(r.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn plane_field_passes_standard_and_isotropy_verification() {
        let d = descriptor();
        let built = d.candidate("Xplane").unwrap().build(&BTreeMap::new()).unwrap();
        let x = match built {
            BuiltCandidate::Vector(c) => c,
            _ => unreachable!(),
        };
        let sys = d.lagrangian.as_ref().unwrap();
        let cfg = DiffConfig::default();
        for mode in [VerifyMode::Standard, VerifyMode::SingularIsotropy] {
            let rep = verify(sys, &x, &d.base_grid, mode, 1e-10, &cfg, 1).unwrap();
            assert!(rep.pass, "{:?} channels: {:?}", mode, rep.channels);
        }
    }

    #[test]
    fn default_flow_freezes_velocity_and_fiber_scale() {
        let d = descriptor();
        let rhs = d.rhs(DiffConfig::default()).unwrap();
        let traj = integrate(|x| rhs(x), &d.default_x0, 1e-3, 1000, &d.state_guard, None);
        assert!(traj.complete);
        let xf = traj.last_state();
        assert!((xf[0] - 1.0).abs() < 1e-12, "time advances at unit rate");
        assert!((xf[1] - 0.5).abs() < 1e-12);
        assert_eq!(xf[2], 1.0);
        assert_eq!(xf[3], 0.5);
    }

    #[test]
    fn backward_fiber_states_are_rejected() {
        let ext = homogeneous_extension(free_td_lagrangian(), 1);
        let err = ext.system.lagrangian().value(&[0.0, 0.0, -1.0, 1.0]).unwrap_err();
        assert_eq!(err, HjtError::GuardViolation);
    }
}
