//! Bi-invariant kinetic Lagrangian on the unit quaternions, realized on the
//! ambient punctured ℝ⁴. With the body velocity w = ȳu/|y|² the Lagrangian
//! is L(y, u) = w₀² − w₁² − w₂² − w₃², a regular metric Lagrangian whose
//! geometry splits into a flat radial line and the round three-sphere. The
//! right-translated fields X_ξ(y) = yξ, ξ in the algebra of pure imaginary
//! quaternions, are geodesic fields and hence generalized solutions; their
//! pullback of the Cartan two-form obstructs the standard problem by the
//! algebra cocycle
//!
//!   (X_ξ*ω_L)(yζ₁, yζ₂) = Tr(ξ[ζ₁, ζ₂]) = 4 ξ⃗ · (ζ⃗₁ × ζ⃗₂),
//!
//! which vanishes for all ζ's only when ξ = 0.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::dual::Real;
use crate::dynamics::{cartan_omega_field, LagrangianSystem};
use crate::error::{HjtError, Result};
use crate::field::{guard_from, Guard, RealMap, RealVecMap, ScalarField, SectionField, SectionKind};
use crate::geometry::{pullback_twoform, DiffConfig};
use crate::grid::{AxisSpec, GridSpec};
use crate::hj_lagrangian::{graph_map, CandidateVectorField};

use super::groups::{qbracket, qconj, qmul, qnorm2, qtrace, su2_algebra_residual, MatrixGroupElement};
use super::{BuiltCandidate, CandidateSpec, SystemDescriptor};

struct Su2L;

impl RealMap for Su2L {
    fn apply<R: Real>(&self, x: &[R]) -> R {
        let w = body_velocity(x);
        w[0] * w[0] - w[1] * w[1] - w[2] * w[2] - w[3] * w[3]
    }
}

/// w = ȳu/|y|², the algebra-valued velocity of the state (y, u).
fn body_velocity<R: Real>(x: &[R]) -> [R; 4] {
    let scale = qnorm2(&x[0..4]).recip();
    let w = qmul(&qconj(&x[0..4]), &x[4..8]);
    [w[0] * scale, w[1] * scale, w[2] * scale, w[3] * scale]
}

struct BodyVelocityComponent(usize);

impl RealMap for BodyVelocityComponent {
    fn apply<R: Real>(&self, x: &[R]) -> R {
        body_velocity(x)[self.0]
    }
}

/// Right translation y ↦ yξ of a fixed algebra element.
struct AlgebraTranslate {
    xi: [f64; 4],
}

impl RealVecMap for AlgebraTranslate {
    fn apply<R: Real>(&self, y: &[R]) -> Vec<R> {
        let xi = [
            R::from_f64(self.xi[0]),
            R::from_f64(self.xi[1]),
            R::from_f64(self.xi[2]),
            R::from_f64(self.xi[3]),
        ];
        qmul(y, &xi).to_vec()
    }
}

fn punctured_base() -> Guard {
    guard_from(|y: &[f64]| qnorm2(y) > 1e-12)
}

fn punctured_states() -> Guard {
    guard_from(|x: &[f64]| qnorm2(&x[0..4]) > 1e-12)
}

pub fn lagrangian_system() -> LagrangianSystem {
    LagrangianSystem::new(4, ScalarField::with_guard(8, Su2L, punctured_states()))
}

/// The candidate section X_ξ(y) = yξ for a pure imaginary ξ = (0, ξ⃗).
pub fn invariant_section(xi: &[f64]) -> SectionField {
    SectionField::with_guard(
        4,
        SectionKind::Vector,
        AlgebraTranslate {
            xi: [xi[0], xi[1], xi[2], xi[3]],
        },
        punctured_base(),
    )
}

#[derive(Debug, Clone)]
pub struct LieGroupCheck {
    /// Tr(ξ[ζ₁, ζ₂]) evaluated in the algebra.
    pub closed_form: f64,
    /// (X_ξ*ω_L)(yζ₁, yζ₂) evaluated numerically at y.
    pub pullback_value: f64,
    /// |pullback_value − closed_form|.
    pub agreement: f64,
    /// |(X_ξ*ω_L)(yξ, yζ₂)|, which the cocycle forces to vanish.
    pub contraction: f64,
}

/// Compare the numerical pullback of the Cartan two-form by X_ξ against the
/// algebra cocycle at a group point y. Rejects arguments outside the algebra
/// (nonzero real part) and points off the unit sphere.
pub fn lie_group_invariant_solution_check(
    y: &[f64],
    xi: &[f64],
    zeta1: &[f64],
    zeta2: &[f64],
    cfg: &DiffConfig,
) -> Result<LieGroupCheck> {
    for a in [xi, zeta1, zeta2] {
        if a.len() != 4 {
            return Err(HjtError::DimensionMismatch {
                expected: 4,
                got: a.len(),
            });
        }
        if su2_algebra_residual(a) > 1e-10 {
            return Err(HjtError::NotInAlgebra);
        }
    }
    if MatrixGroupElement::su2(y.to_vec()).membership_residual() > 1e-8 {
        return Err(HjtError::NotInAlgebra);
    }
    let sys = lagrangian_system();
    let omega = cartan_omega_field(&sys);
    let phi = graph_map(&invariant_section(xi));
    let p = pullback_twoform(&phi, &omega, y, cfg)?;
    let t1 = qmul(y, zeta1);
    let t2 = qmul(y, zeta2);
    let tx = qmul(y, xi);
    let pullback_value = p.apply(&t1, &t2);
    let closed_form = qtrace(&qmul(xi, &qbracket(zeta1, zeta2)));
    Ok(LieGroupCheck {
        closed_form,
        pullback_value,
        agreement: (pullback_value - closed_form).abs(),
        contraction: p.apply(&tx, &t2).abs(),
    })
}

fn candidates() -> Vec<CandidateSpec> {
    vec![CandidateSpec::new(
        "Xxi",
        SectionKind::Vector,
        "right-translated algebra element y -> y xi; generalized solution only",
        vec![("xi1", 0.0), ("xi2", 0.0), ("xi3", 1.0)],
        Arc::new(|p: &BTreeMap<String, f64>| {
            let section = invariant_section(&[0.0, p["xi1"], p["xi2"], p["xi3"]]);
            Ok(BuiltCandidate::Vector(
                CandidateVectorField::new("Xxi", section).with_params(p.clone()),
            ))
        }),
    )]
}

pub fn descriptor() -> SystemDescriptor {
    SystemDescriptor {
        name: "liegroup_su2",
        summary: "bi-invariant kinetic energy on unit quaternions, ambient form",
        dof: 4,
        state_dim: 8,
        lagrangian: Some(lagrangian_system()),
        hamiltonian: None,
        singular: false,
        candidates: candidates(),
        integrals: vec![],
        conserved: vec![
            ("E".to_string(), ScalarField::with_guard(8, Su2L, punctured_states())),
            ("w0".to_string(), ScalarField::with_guard(8, BodyVelocityComponent(0), punctured_states())),
            ("w1".to_string(), ScalarField::with_guard(8, BodyVelocityComponent(1), punctured_states())),
            ("w2".to_string(), ScalarField::with_guard(8, BodyVelocityComponent(2), punctured_states())),
            ("w3".to_string(), ScalarField::with_guard(8, BodyVelocityComponent(3), punctured_states())),
        ],
        dynamics: None,
        projection: None,
        state_guard: punctured_states(),
        default_x0: vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -0.5],
        default_dt: 1e-3,
        default_steps: 1000,
        base_grid: GridSpec::new(vec![
            AxisSpec::new(0.55, 1.45, 3),
            AxisSpec::new(0.55, 1.45, 3),
            AxisSpec::new(0.55, 1.45, 3),
            AxisSpec::new(0.55, 1.45, 3),
        ]),
        state_grid: GridSpec::new(vec![
            AxisSpec::new(0.8, 1.2, 2),
            AxisSpec::new(-0.3, 0.3, 2),
            AxisSpec::new(-0.3, 0.3, 2),
            AxisSpec::new(-0.3, 0.3, 2),
            AxisSpec::new(-0.5, 0.5, 2),
            AxisSpec::new(-0.5, 0.5, 2),
            AxisSpec::new(-0.5, 0.5, 2),
            AxisSpec::new(-0.5, 0.5, 2),
        ]),
        params: vec![],
        verify_override: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::integrate;
    use crate::hj_lagrangian::{verify, VerifyMode};

    const T1: [f64; 4] = [0.0, -0.5, 0.0, 0.0];
    const T2: [f64; 4] = [0.0, 0.0, -0.5, 0.0];
    const T3: [f64; 4] = [0.0, 0.0, 0.0, -0.5];

    fn unit(v: [f64; 4]) -> Vec<f64> {
        let n = qnorm2(&v).sqrt();
        v.iter().map(|c| c / n).collect()
    }

    #[test]
    fn basis_cocycle_matches_the_trace_oracle() {
        let y = [1.0, 0.0, 0.0, 0.0];
        let c = lie_group_invariant_solution_check(&y, &T3, &T1, &T2, &DiffConfig::default())
            .unwrap();
        assert!((c.closed_form + 0.5).abs() < 1e-14, "Tr(t3 [t1, t2]) = -1/2");
        assert!(c.agreement < 1e-10, "pullback {}", c.pullback_value);
        assert!(c.contraction < 1e-10);
    }

    #[test]
    fn cocycle_agreement_holds_away_from_the_identity() {
        let points = [
            unit([0.3, -0.5, 0.7, 0.4]),
            unit([0.9, 0.1, -0.2, 0.3]),
            unit([-0.4, 0.6, 0.5, -0.45]),
        ];
        let xi = [0.0, 0.3, -0.2, 0.5];
        let z1 = [0.0, -0.1, 0.4, 0.2];
        let z2 = [0.0, 0.25, 0.15, -0.35];
        for y in &points {
            let c =
                lie_group_invariant_solution_check(y, &xi, &z1, &z2, &DiffConfig::default())
                    .unwrap();
            assert!(c.agreement < 1e-6, "agreement {} at {:?}", c.agreement, y);
            assert!(c.contraction < 1e-8);
        }
    }

    #[test]
    fn commuting_directions_kill_the_cocycle() {
        let y = unit([0.8, 0.2, -0.1, 0.3]);
        let c = lie_group_invariant_solution_check(&y, &T3, &T1, &T1, &DiffConfig::default())
            .unwrap();
        assert_eq!(c.closed_form, 0.0);
        assert!(c.pullback_value.abs() < 1e-8);
    }

    #[test]
    fn arguments_outside_the_algebra_are_rejected() {
        let y = [1.0, 0.0, 0.0, 0.0];
        let bad = [0.3, 0.1, 0.0, 0.0];
        let err = lie_group_invariant_solution_check(&y, &bad, &T1, &T2, &DiffConfig::default())
            .unwrap_err();
        assert_eq!(err, HjtError::NotInAlgebra);
        let off_group = [1.1, 0.0, 0.0, 0.0];
        let err =
            lie_group_invariant_solution_check(&off_group, &T3, &T1, &T2, &DiffConfig::default())
                .unwrap_err();
        assert_eq!(err, HjtError::NotInAlgebra);
    }

    #[test]
    fn invariant_field_is_generalized_but_not_standard() {
        let d = descriptor();
        let built = d.candidate("Xxi").unwrap().build(&BTreeMap::new()).unwrap();
        let x = match built {
            BuiltCandidate::Vector(c) => c,
            _ => unreachable!(),
        };
        let sys = d.lagrangian.as_ref().unwrap();
        let cfg = DiffConfig::default();
        let gen = verify(sys, &x, &d.base_grid, VerifyMode::Generalized, 1e-8, &cfg, 1).unwrap();
        assert!(gen.pass, "channels: {:?}", gen.channels);
        let std = verify(sys, &x, &d.base_grid, VerifyMode::Standard, 1e-8, &cfg, 1).unwrap();
        assert!(!std.pass);
        assert!(std.channels["pullback_omega"].max > 0.05);
    }

    #[test]
    fn body_velocity_and_energy_are_conserved_along_the_flow() {
        let d = descriptor();
        let rhs = d.rhs(DiffConfig::default()).unwrap();
        let traj = integrate(
            |x| rhs(x),
            &d.default_x0,
            d.default_dt,
            d.default_steps,
            &d.state_guard,
            None,
        );
        assert!(traj.complete);
        let x0 = &traj.states[0];
        let xf = traj.last_state();
        for (name, f) in &d.conserved {
            let drift = (f.value(xf).unwrap() - f.value(x0).unwrap()).abs();
            assert!(drift < 1e-8, "{} drifted by {}", name, drift);
        }
        // the flow is y(t) = y0 exp(t t3), which stays on the unit sphere
        assert!((qnorm2(&xf[0..4]) - 1.0).abs() < 1e-8);
    }
}
