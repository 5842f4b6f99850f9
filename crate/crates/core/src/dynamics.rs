//! Dynamics derived from a Lagrangian or Hamiltonian.
//!
//! For L(q, v) on TQ ≅ ℝ²ⁿ the Cartan one-form is θ_L = (∂L/∂vⁱ) dqⁱ, the
//! Cartan two-form ω_L = −dθ_L, and the energy E_L = vⁱ∂L/∂vⁱ − L. The
//! dynamical vector field Γ_L is second order: Γ_L = vⁱ∂/∂qⁱ + aⁱ∂/∂vⁱ with
//! the accelerations solving
//!
//!   Wᵢⱼ aʲ = ∂L/∂qⁱ − (∂²L/∂vⁱ∂qʲ) vʲ,   Wᵢⱼ = ∂²L/∂vⁱ∂vʲ.
//!
//! When W is singular the solution set is an affine space a₀ + Ker W; the
//! minimum-norm consistent representative is returned together with the
//! kernel so callers can quotient residuals by the gauge freedom, and an
//! inconsistent right-hand side is reported as such.
//!
//! For H(q, p) on T*Q the Hamiltonian field is Z_H = (∂H/∂p, −∂H/∂q).
//! Trajectories are produced by fixed-step RK4 with an optional after-step
//! projection (used to hold group-valued states on their group).

use std::sync::Arc;

use crate::dual::{Real, D1, D2, D3};
use crate::error::{HjtError, Result};
use crate::field::{Guard, MapField, ScalarField, ScalarFn, SectionField, SectionKind, VectorFn};
use crate::geometry::{grad, grad0, grad1, grad2, hessian, DiffConfig, FormMatrix, TwoFormField};
use crate::linalg::{self, Mat};

/// A Lagrangian system: L on TQ ≅ ℝ²ⁿ with coordinates (q¹..qⁿ, v¹..vⁿ).
#[derive(Clone)]
pub struct LagrangianSystem {
    n: usize,
    l: ScalarField,
}

impl LagrangianSystem {
    pub fn new(n: usize, l: ScalarField) -> Self {
        assert_eq!(l.arity(), 2 * n, "Lagrangian must have arity 2n");
        LagrangianSystem { n, l }
    }

    pub fn dof(&self) -> usize {
        self.n
    }

    pub fn lagrangian(&self) -> &ScalarField {
        &self.l
    }

    pub fn guard(&self) -> &Guard {
        self.l.guard()
    }
}

/// A Hamiltonian system: H on T*Q ≅ ℝ²ⁿ with coordinates (q¹..qⁿ, p₁..pₙ).
#[derive(Clone)]
pub struct HamiltonianSystem {
    n: usize,
    h: ScalarField,
}

impl HamiltonianSystem {
    pub fn new(n: usize, h: ScalarField) -> Self {
        assert_eq!(h.arity(), 2 * n, "Hamiltonian must have arity 2n");
        HamiltonianSystem { n, h }
    }

    pub fn dof(&self) -> usize {
        self.n
    }

    pub fn hamiltonian(&self) -> &ScalarField {
        &self.h
    }

    pub fn guard(&self) -> &Guard {
        self.h.guard()
    }
}

// ---------------------------------------------------------------------------
// Cartan forms and energy.
// ---------------------------------------------------------------------------

struct ThetaComps {
    l: Arc<dyn ScalarFn>,
    n: usize,
}

impl VectorFn for ThetaComps {
    fn eval0(&self, x: &[f64]) -> Vec<f64> {
        let g = grad0(self.l.as_ref(), x);
        let mut out = g[self.n..].to_vec();
        out.extend(std::iter::repeat_n(0.0, self.n));
        out
    }
    fn eval1(&self, x: &[D1]) -> Vec<D1> {
        let g = grad1(self.l.as_ref(), x);
        let mut out = g[self.n..].to_vec();
        out.extend(std::iter::repeat_n(D1::from_f64(0.0), self.n));
        out
    }
    fn eval2(&self, x: &[D2]) -> Vec<D2> {
        let g = grad2(self.l.as_ref(), x);
        let mut out = g[self.n..].to_vec();
        out.extend(std::iter::repeat_n(D2::from_f64(0.0), self.n));
        out
    }
    fn eval3(&self, _x: &[D3]) -> Vec<D3> {
        unimplemented!("fourth derivatives of the Lagrangian are not supported")
    }
}

/// The Cartan one-form θ_L as a section of T*(TQ).
pub fn theta_section(sys: &LagrangianSystem) -> SectionField {
    SectionField::with_guard(
        2 * sys.n,
        SectionKind::OneForm,
        ThetaComps {
            l: sys.l.shared(),
            n: sys.n,
        },
        sys.l.guard().clone(),
    )
}

/// The Cartan two-form ω_L = −dθ_L as a field on TQ.
pub fn cartan_omega_field(sys: &LagrangianSystem) -> TwoFormField {
    crate::geometry::oneform_differential_field(&theta_section(sys), true)
}

/// θ_L components and ω_L coefficients at one point of TQ.
pub fn cartan_forms(
    sys: &LagrangianSystem,
    x: &[f64],
    cfg: &DiffConfig,
) -> Result<(Vec<f64>, FormMatrix)> {
    let theta = theta_section(sys);
    let tv = theta.value(x)?;
    let omega = crate::geometry::exterior_derivative(&theta, x, cfg)?.scaled(-1.0);
    Ok((tv, omega))
}

struct EnergyFn {
    l: Arc<dyn ScalarFn>,
    n: usize,
}

impl ScalarFn for EnergyFn {
    fn eval0(&self, x: &[f64]) -> f64 {
        let g = grad0(self.l.as_ref(), x);
        let mut e = -self.l.eval0(x);
        for i in 0..self.n {
            e += x[self.n + i] * g[self.n + i];
        }
        e
    }
    fn eval1(&self, x: &[D1]) -> D1 {
        let g = grad1(self.l.as_ref(), x);
        let mut e = -self.l.eval1(x);
        for i in 0..self.n {
            e = e + x[self.n + i] * g[self.n + i];
        }
        e
    }
    fn eval2(&self, x: &[D2]) -> D2 {
        let g = grad2(self.l.as_ref(), x);
        let mut e = -self.l.eval2(x);
        for i in 0..self.n {
            e = e + x[self.n + i] * g[self.n + i];
        }
        e
    }
    fn eval3(&self, _x: &[D3]) -> D3 {
        unimplemented!("fourth derivatives of the Lagrangian are not supported")
    }
}

/// The energy E_L = vⁱ ∂L/∂vⁱ − L as a scalar field on TQ.
pub fn energy(sys: &LagrangianSystem) -> ScalarField {
    ScalarField::with_guard(
        2 * sys.n,
        EnergyFn {
            l: sys.l.shared(),
            n: sys.n,
        },
        sys.l.guard().clone(),
    )
}

// ---------------------------------------------------------------------------
// The second-order dynamical field.
// ---------------------------------------------------------------------------

/// Relative eigenvalue threshold treating a fiber-Hessian direction as null.
pub const KERNEL_RANK_TOL: f64 = 1e-10;

/// Absolute-plus-relative tolerance for accepting a singular force equation
/// as consistent.
pub const CONSISTENCY_TOL: f64 = 1e-8;

/// Accelerations solving the force equation at a point of TQ.
pub struct SodeSolution {
    /// Minimum-norm consistent acceleration (the unique one when W is
    /// regular).
    pub acceleration: Vec<f64>,
    /// Fiber Hessian W at the point (symmetrized).
    pub w: Mat,
    /// Whether the singular path was taken.
    pub singular: bool,
    /// Orthonormal basis of Ker W (empty when regular).
    pub kernel: Vec<Vec<f64>>,
    /// Residual left outside the range of W (zero when regular).
    pub consistency_residual: f64,
}

/// Fiber Hessian W and force right-hand side at a point.
pub(crate) fn force_equation(
    sys: &LagrangianSystem,
    x: &[f64],
    cfg: &DiffConfig,
) -> Result<(Mat, Vec<f64>)> {
    let n = sys.n;
    let hess = hessian(&sys.l, x, cfg)?;
    let g = grad(&sys.l, x, cfg)?;
    let mut w = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            w[(i, j)] = hess.matrix[(n + i, n + j)];
        }
    }
    // rhsᵢ = ∂L/∂qⁱ − (∂²L/∂vⁱ∂qʲ) vʲ
    let rhs: Vec<f64> = (0..n)
        .map(|i| {
            let mut r = g[i];
            for j in 0..n {
                r -= hess.matrix[(n + i, j)] * x[n + j];
            }
            r
        })
        .collect();
    Ok((w, rhs))
}

/// Solve the force equation at (q, v). Regular fibers use a direct solve;
/// singular fibers return the minimum-norm consistent representative and
/// the kernel of W, or fail if the equation has no solution.
pub fn lagrangian_sode(
    sys: &LagrangianSystem,
    x: &[f64],
    cfg: &DiffConfig,
) -> Result<SodeSolution> {
    let (w, rhs) = force_equation(sys, x, cfg)?;
    if linalg::cond_1(&w) <= linalg::SINGULAR_COND {
        let acceleration = linalg::solve(&w, &rhs)?;
        return Ok(SodeSolution {
            acceleration,
            w,
            singular: false,
            kernel: Vec::new(),
            consistency_residual: 0.0,
        });
    }
    let sol = linalg::min_norm_solve_sym(&w, &rhs, KERNEL_RANK_TOL);
    let tol = CONSISTENCY_TOL * (1.0 + linalg::norm_inf(&rhs));
    if sol.inconsistency > tol {
        return Err(HjtError::InconsistentSingularSystem {
            residual: sol.inconsistency,
        });
    }
    Ok(SodeSolution {
        acceleration: sol.x,
        w,
        singular: true,
        kernel: sol.kernel,
        consistency_residual: sol.inconsistency,
    })
}

/// Right-hand side of the first-order reduction of Γ_L on TQ:
/// (q̇, v̇) = (v, a(q, v)).
pub fn sode_rhs(
    sys: &LagrangianSystem,
    cfg: DiffConfig,
) -> impl Fn(&[f64]) -> Result<Vec<f64>> + Sync + '_ {
    move |x: &[f64]| {
        let sol = lagrangian_sode(sys, x, &cfg)?;
        let mut out = x[sys.n..2 * sys.n].to_vec();
        out.extend(sol.acceleration);
        Ok(out)
    }
}

/// Z_H = (∂H/∂p, −∂H/∂q) at a point of T*Q.
pub fn hamiltonian_field(
    sys: &HamiltonianSystem,
    x: &[f64],
    cfg: &DiffConfig,
) -> Result<Vec<f64>> {
    let n = sys.n;
    let g = grad(&sys.h, x, cfg)?;
    let mut out = Vec::with_capacity(2 * n);
    out.extend_from_slice(&g[n..]);
    out.extend(g[..n].iter().map(|c| -c));
    Ok(out)
}

/// Right-hand side of Z_H for integration.
pub fn hamiltonian_rhs(
    sys: &HamiltonianSystem,
    cfg: DiffConfig,
) -> impl Fn(&[f64]) -> Result<Vec<f64>> + Sync + '_ {
    move |x: &[f64]| hamiltonian_field(sys, x, &cfg)
}

// ---------------------------------------------------------------------------
// Legendre map.
// ---------------------------------------------------------------------------

struct LegendreComps {
    l: Arc<dyn ScalarFn>,
    n: usize,
}

impl VectorFn for LegendreComps {
    fn eval0(&self, x: &[f64]) -> Vec<f64> {
        let g = grad0(self.l.as_ref(), x);
        let mut out = x[..self.n].to_vec();
        out.extend_from_slice(&g[self.n..]);
        out
    }
    fn eval1(&self, x: &[D1]) -> Vec<D1> {
        let g = grad1(self.l.as_ref(), x);
        let mut out = x[..self.n].to_vec();
        out.extend_from_slice(&g[self.n..]);
        out
    }
    fn eval2(&self, x: &[D2]) -> Vec<D2> {
        let g = grad2(self.l.as_ref(), x);
        let mut out = x[..self.n].to_vec();
        out.extend_from_slice(&g[self.n..]);
        out
    }
    fn eval3(&self, _x: &[D3]) -> Vec<D3> {
        unimplemented!("fourth derivatives of the Lagrangian are not supported")
    }
}

/// The Legendre map FL: TQ → T*Q, (q, v) ↦ (q, ∂L/∂v).
pub fn legendre_map(sys: &LagrangianSystem) -> MapField {
    MapField::with_guard(
        2 * sys.n,
        2 * sys.n,
        LegendreComps {
            l: sys.l.shared(),
            n: sys.n,
        },
        sys.l.guard().clone(),
    )
}

/// Momenta ∂L/∂v at one point: the fiber part of the Legendre map.
pub fn legendre(sys: &LagrangianSystem, x: &[f64], cfg: &DiffConfig) -> Result<Vec<f64>> {
    let g = grad(&sys.l, x, cfg)?;
    Ok(g[sys.n..].to_vec())
}

/// Newton iteration budget for fiber inversion.
pub const FIBER_NEWTON_MAX_ITER: usize = 50;
/// Convergence tolerance on ‖∂L/∂v − p‖∞ for fiber inversion.
pub const FIBER_NEWTON_TOL: f64 = 1e-12;

/// Invert the fiber of the Legendre map: find v with ∂L/∂v(q, v) = p,
/// starting from `seed`. Requires a regular fiber Hessian along the way.
pub fn fiber_inverse(
    sys: &LagrangianSystem,
    q: &[f64],
    p: &[f64],
    seed: &[f64],
    cfg: &DiffConfig,
) -> Result<Vec<f64>> {
    let n = sys.n;
    assert_eq!(q.len(), n, "base point dimension");
    assert_eq!(p.len(), n, "momentum dimension");
    let mut v = seed.to_vec();
    let mut x = q.to_vec();
    x.extend_from_slice(&v);
    let mut last_residual = f64::INFINITY;
    for _ in 0..FIBER_NEWTON_MAX_ITER {
        x[n..].copy_from_slice(&v);
        sys.l.admit(&x)?;
        let g = grad(&sys.l, &x, cfg)?;
        let r: Vec<f64> = (0..n).map(|i| g[n + i] - p[i]).collect();
        last_residual = linalg::norm_inf(&r);
        if last_residual <= FIBER_NEWTON_TOL {
            return Ok(v);
        }
        let hess = hessian(&sys.l, &x, cfg)?;
        let mut w = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                w[(i, j)] = hess.matrix[(n + i, n + j)];
            }
        }
        let dv = linalg::solve(&w, &r).map_err(|_| HjtError::SingularHessian)?;
        for i in 0..n {
            v[i] -= dv[i];
        }
    }
    Err(HjtError::NewtonDiverged {
        max_iter: FIBER_NEWTON_MAX_ITER,
        residual: last_residual,
    })
}

// ---------------------------------------------------------------------------
// Fixed-step integration.
// ---------------------------------------------------------------------------

/// A fixed-step RK4 trajectory. `violation_step` marks the step whose guard
/// or evaluation failed; the states up to that step are retained.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub complete: bool,
    pub violation_step: Option<usize>,
}

impl Trajectory {
    pub fn last_state(&self) -> &[f64] {
        self.states.last().expect("trajectory holds the initial state")
    }
}

/// Integrate ẋ = rhs(x) by fixed-step RK4 from `x0`, checking the guard at
/// every accepted state and applying `project` (if any) after each step.
/// Guard or evaluation failures stop the trajectory early with a flag
/// rather than an error, so partial data survives.
pub fn integrate<F>(
    rhs: F,
    x0: &[f64],
    dt: f64,
    steps: usize,
    guard: &Guard,
    project: Option<&(dyn Fn(&mut [f64]) + Sync)>,
) -> Trajectory
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    assert!(dt > 0.0 && dt.is_finite(), "step size must be positive");
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut x = x0.to_vec();
    times.push(0.0);
    states.push(x.clone());
    if !guard(&x) {
        return Trajectory {
            times,
            states,
            complete: false,
            violation_step: Some(0),
        };
    }
    let dim = x.len();
    for step in 1..=steps {
        let stage = |r: Result<Vec<f64>>| -> Option<Vec<f64>> {
            match r {
                Ok(v) if v.len() == dim && v.iter().all(|c| c.is_finite()) => Some(v),
                _ => None,
            }
        };
        let advance = |x: &[f64], k: &[f64], h: f64| -> Vec<f64> {
            x.iter().zip(k).map(|(a, b)| a + h * b).collect()
        };
        let k = (|| {
            let k1 = stage(rhs(&x))?;
            let k2 = stage(rhs(&advance(&x, &k1, dt / 2.0)))?;
            let k3 = stage(rhs(&advance(&x, &k2, dt / 2.0)))?;
            let k4 = stage(rhs(&advance(&x, &k3, dt)))?;
            Some((k1, k2, k3, k4))
        })();
        let (k1, k2, k3, k4) = match k {
            Some(k) => k,
            None => {
                return Trajectory {
                    times,
                    states,
                    complete: false,
                    violation_step: Some(step),
                }
            }
        };
        for i in 0..dim {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if let Some(p) = project {
            p(&mut x);
        }
        if !guard(&x) || x.iter().any(|c| !c.is_finite()) {
            return Trajectory {
                times,
                states,
                complete: false,
                violation_step: Some(step),
            };
        }
        times.push(step as f64 * dt);
        states.push(x.clone());
    }
    Trajectory {
        times,
        states,
        complete: true,
        violation_step: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{guard_all, guard_from, RealMap};

    struct FreeL;
    impl RealMap for FreeL {
        // L = ½((v¹)² + (v²)²)
        fn apply<R: crate::dual::Real>(&self, x: &[R]) -> R {
            R::from_f64(0.5) * (x[2] * x[2] + x[3] * x[3])
        }
    }

    struct HoL;
    impl RealMap for HoL {
        // L = ½((v¹)² + (v²)² − (q¹)² − (q²)²)
        fn apply<R: crate::dual::Real>(&self, x: &[R]) -> R {
            R::from_f64(0.5) * (x[2] * x[2] + x[3] * x[3] - x[0] * x[0] - x[1] * x[1])
        }
    }

    fn free() -> LagrangianSystem {
        LagrangianSystem::new(2, ScalarField::new(4, FreeL))
    }

    fn ho() -> LagrangianSystem {
        LagrangianSystem::new(2, ScalarField::new(4, HoL))
    }

    #[test]
    fn cartan_forms_of_the_free_particle() {
        let sys = free();
        let (theta, omega) = cartan_forms(&sys, &[1.0, 1.0, 2.0, 3.0], &DiffConfig::default())
            .unwrap();
        assert_eq!(theta, vec![2.0, 3.0, 0.0, 0.0]);
        // ω = dq¹∧dv¹ + dq²∧dv²: coefficient 1 at pairs (0,2) and (1,3).
        assert!((omega.entry(0, 2) - 1.0).abs() < 1e-14);
        assert!((omega.entry(1, 3) - 1.0).abs() < 1e-14);
        assert!(omega.entry(0, 1).abs() < 1e-14);
        assert!(omega.entry(0, 3).abs() < 1e-14);
        assert!(omega.entry(2, 3).abs() < 1e-14);
    }

    #[test]
    fn energy_of_the_harmonic_oscillator() {
        let sys = ho();
        let e = energy(&sys);
        // E = ½(v² + q²)
        let v = e.value(&[0.3, -0.4, 1.0, 2.0]).unwrap();
        assert!((v - 0.5 * (1.0 + 4.0 + 0.09 + 0.16)).abs() < 1e-14);
    }

    #[test]
    fn sode_accelerations_regular_cases() {
        let sys = ho();
        let sol = lagrangian_sode(&sys, &[0.7, -1.2, 0.4, 0.9], &DiffConfig::default()).unwrap();
        assert!(!sol.singular);
        assert!((sol.acceleration[0] + 0.7).abs() < 1e-12);
        assert!((sol.acceleration[1] - 1.2).abs() < 1e-12);

        let sys = free();
        let sol = lagrangian_sode(&sys, &[5.0, 5.0, 1.0, 2.0], &DiffConfig::default()).unwrap();
        assert!(linalg::norm_inf(&sol.acceleration) < 1e-12);
    }

    struct SqrtL;
    impl RealMap for SqrtL {
        // L = √((v¹)² + (v²)²): homogeneous of degree one, singular fiber
        // Hessian with kernel along v.
        fn apply<R: crate::dual::Real>(&self, x: &[R]) -> R {
            (x[2] * x[2] + x[3] * x[3]).sqrt()
        }
    }

    #[test]
    fn sode_of_a_homogeneous_lagrangian_is_singular_and_consistent() {
        let l = ScalarField::with_guard(
            4,
            SqrtL,
            guard_from(|x| x[2] * x[2] + x[3] * x[3] > 1e-12),
        );
        let sys = LagrangianSystem::new(2, l);
        let sol = lagrangian_sode(&sys, &[0.3, 0.8, 1.0, 0.0], &DiffConfig::default()).unwrap();
        assert!(sol.singular);
        assert_eq!(sol.kernel.len(), 1);
        assert!(sol.consistency_residual < 1e-12);
        assert!(linalg::norm_inf(&sol.acceleration) < 1e-12);
        // Kernel direction is the velocity itself.
        let k = &sol.kernel[0];
        assert!((k[0].abs() - 1.0).abs() < 1e-10 && k[1].abs() < 1e-10);

        // The energy of a degree-one homogeneous Lagrangian vanishes.
        let e = energy(&sys);
        assert!(e.value(&[0.3, 0.8, 1.3, -0.4]).unwrap().abs() < 1e-14);
    }

    struct ConstrainedL;
    impl RealMap for ConstrainedL {
        // L = ½(v¹)² + q² v¹: the v² equation forces v¹ = 0, so generic
        // points have an inconsistent force equation.
        fn apply<R: crate::dual::Real>(&self, x: &[R]) -> R {
            R::from_f64(0.5) * x[2] * x[2] + x[1] * x[2]
        }
    }

    #[test]
    fn inconsistent_singular_system_is_detected() {
        let sys = LagrangianSystem::new(2, ScalarField::new(4, ConstrainedL));
        let err = lagrangian_sode(&sys, &[0.0, 0.0, 1.0, 0.0], &DiffConfig::default());
        assert!(matches!(
            err,
            Err(HjtError::InconsistentSingularSystem { .. })
        ));
        // On the constraint surface v¹ = 0 the equation is consistent.
        let ok = lagrangian_sode(&sys, &[0.0, 0.0, 0.0, 0.3], &DiffConfig::default()).unwrap();
        assert!(ok.singular);
        assert!(ok.consistency_residual < 1e-12);
    }

    struct HoH;
    impl RealMap for HoH {
        fn apply<R: crate::dual::Real>(&self, x: &[R]) -> R {
            R::from_f64(0.5) * (x[1] * x[1] + x[0] * x[0])
        }
    }

    #[test]
    fn hamiltonian_field_of_the_oscillator() {
        let sys = HamiltonianSystem::new(1, ScalarField::new(2, HoH));
        let z = hamiltonian_field(&sys, &[0.3, 0.7], &DiffConfig::default()).unwrap();
        assert!((z[0] - 0.7).abs() < 1e-14);
        assert!((z[1] + 0.3).abs() < 1e-14);
    }

    struct CrossL;
    impl RealMap for CrossL {
        // L' = v¹v² − q¹q²: alternative regular Lagrangian with W = [[0,1],[1,0]].
        fn apply<R: crate::dual::Real>(&self, x: &[R]) -> R {
            x[2] * x[3] - x[0] * x[1]
        }
    }

    #[test]
    fn legendre_swaps_momenta_for_the_cross_lagrangian() {
        let sys = LagrangianSystem::new(2, ScalarField::new(4, CrossL));
        let p = legendre(&sys, &[0.1, 0.2, 3.0, 4.0], &DiffConfig::default()).unwrap();
        assert_eq!(p, vec![4.0, 3.0]);
        let full = legendre_map(&sys).value(&[0.1, 0.2, 3.0, 4.0]).unwrap();
        assert_eq!(full, vec![0.1, 0.2, 4.0, 3.0]);
    }

    struct QuarticL;
    impl RealMap for QuarticL {
        // L = ¼v⁴ + ½v²: p = v³ + v is strictly monotone.
        fn apply<R: crate::dual::Real>(&self, x: &[R]) -> R {
            let v = x[1];
            R::from_f64(0.25) * v.powi(4) + R::from_f64(0.5) * v * v
        }
    }

    #[test]
    fn fiber_inversion_by_newton() {
        let sys = LagrangianSystem::new(1, ScalarField::new(2, QuarticL));
        let v = fiber_inverse(&sys, &[0.0], &[10.0], &[1.0], &DiffConfig::default()).unwrap();
        // v³ + v = 10 → v = 2
        assert!((v[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rk4_reproduces_the_oscillator_to_fourth_order() {
        let sys = HamiltonianSystem::new(1, ScalarField::new(2, HoH));
        let cfg = DiffConfig::default();
        let rhs = hamiltonian_rhs(&sys, cfg);
        let traj = integrate(rhs, &[1.0, 0.0], 1e-3, 1000, &guard_all(), None);
        assert!(traj.complete);
        let t = 1.0_f64;
        let x = traj.last_state();
        assert!((x[0] - t.cos()).abs() < 1e-10);
        assert!((x[1] + t.sin()).abs() < 1e-10);
    }

    #[test]
    fn integration_stops_at_guard_violation_with_partial_data() {
        let guard = guard_from(|x: &[f64]| x[0] < 1.0);
        let rhs = |_x: &[f64]| Ok(vec![1.0]);
        let traj = integrate(rhs, &[0.0], 0.1, 100, &guard, None);
        assert!(!traj.complete);
        let k = traj.violation_step.unwrap();
        assert!(k > 5 && k < 15, "violated at step {k}");
        assert_eq!(traj.states.len(), k);
    }

    #[test]
    fn after_step_projection_is_applied() {
        // Rotate in the plane and renormalize after each step; the radius
        // then stays at 1 exactly.
        let rhs = |x: &[f64]| Ok(vec![-x[1], x[0]]);
        let project = |x: &mut [f64]| {
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            x[0] /= r;
            x[1] /= r;
        };
        let traj = integrate(rhs, &[1.0, 0.0], 1e-2, 500, &guard_all(), Some(&project));
        assert!(traj.complete);
        for s in &traj.states {
            let r = (s[0] * s[0] + s[1] * s[1]).sqrt();
            assert!((r - 1.0).abs() < 1e-15);
        }
    }
}
