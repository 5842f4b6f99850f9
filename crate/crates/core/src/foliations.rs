//! Complete solutions from families of first integrals.
//!
//! Given n independent first integrals f₁,…,f_n of the Lagrangian dynamics,
//! each level set f(q,v) = λ can be solved for the velocities wherever the
//! fiber Jacobian ∂f/∂v is invertible, producing a vector field X_λ on Q.
//! Sweeping λ over a box yields a complete solution when Φ(q,λ) = (q,X_λ(q))
//! is a local diffeomorphism, which is certified numerically by bounding
//! |det DΦ| away from zero and infinity on a product grid.
//!
//! Brackets are taken with respect to the Cartan two-form: X_g solves
//! i(X_g)ω_L = dg and {f,g} = ½(df·X_g − dg·X_f). The antisymmetrized form
//! is bitwise exact ({f,f} = 0 identically) and reproduces the canonical
//! bracket for mechanical Lagrangians; families in involution are the ones
//! whose built X_λ also pass the standard (isotropy) checks.

use std::collections::HashMap;
use std::sync::Mutex;

use crate::dual::{D1, D2, D3};
use crate::dynamics::{cartan_forms, lagrangian_sode, LagrangianSystem};
use crate::error::{HjtError, Result};
use crate::field::{Guard, ScalarField, SectionField, SectionKind, VectorFn};
use crate::geometry::{grad, DiffConfig};
use crate::grid::GridSpec;
use crate::hj_lagrangian::CandidateVectorField;
use crate::linalg::{self, Lu, Mat};

/// A family of n scalar functions on TQ intended as first integrals.
#[derive(Clone)]
pub struct IntegralFamily {
    n: usize,
    integrals: Vec<ScalarField>,
    labels: Vec<String>,
}

impl IntegralFamily {
    pub fn new(n: usize, members: Vec<(String, ScalarField)>) -> Self {
        assert_eq!(members.len(), n, "family must have n = dim Q members");
        for (_, f) in &members {
            assert_eq!(f.arity(), 2 * n, "integrals live on TQ");
        }
        let (labels, integrals) = members.into_iter().unzip();
        IntegralFamily {
            n,
            integrals,
            labels,
        }
    }

    pub fn dof(&self) -> usize {
        self.n
    }

    pub fn integrals(&self) -> &[ScalarField] {
        &self.integrals
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// f(q,v) − nothing: raw values of all members at a state.
    pub fn values(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.integrals.iter().map(|f| f.value(state)).collect()
    }
}

/// |df_i · Γ_L| per member at one state: all near zero certifies that the
/// family consists of first integrals of the dynamics there.
pub fn first_integral_residual(
    fam: &IntegralFamily,
    sys: &LagrangianSystem,
    state: &[f64],
    cfg: &DiffConfig,
) -> Result<Vec<f64>> {
    let n = fam.n;
    assert_eq!(sys.dof(), n, "family and system must share Q");
    let sol = lagrangian_sode(sys, state, cfg)?;
    let mut gamma = state[n..2 * n].to_vec();
    gamma.extend_from_slice(&sol.acceleration);
    fam.integrals
        .iter()
        .map(|f| {
            let df = grad(f, state, cfg)?;
            Ok(linalg::dot(&df, &gamma).abs())
        })
        .collect()
}

/// Newton controls for solving level sets in the fiber.
#[derive(Clone, Copy, Debug)]
pub struct LeafSolveConfig {
    pub newton_tol: f64,
    pub max_iter: usize,
}

impl Default for LeafSolveConfig {
    fn default() -> Self {
        LeafSolveConfig {
            newton_tol: 1e-10,
            max_iter: 50,
        }
    }
}

/// Relative determinant floor below which the fiber Jacobian is treated as
/// degenerate (scaled by the Hadamard bound of the matrix).
pub const DEGENERACY_TOL: f64 = 1e-8;

fn fiber_jacobian(fam: &IntegralFamily, state: &[f64], cfg: &DiffConfig) -> Result<Mat> {
    let n = fam.n;
    let mut j = Mat::zeros(n, n);
    for (i, f) in fam.integrals.iter().enumerate() {
        let df = grad(f, state, cfg)?;
        for k in 0..n {
            j[(i, k)] = df[n + k];
        }
    }
    Ok(j)
}

fn hadamard_scale(j: &Mat, n: usize) -> f64 {
    (0..n)
        .map(|i| {
            let row: Vec<f64> = (0..n).map(|k| j[(i, k)]).collect();
            linalg::norm_2(&row)
        })
        .product()
}

/// |det(∂f/∂v)| at a state: the local solvability certificate for isolating
/// the velocities from (q, λ).
pub fn fiber_independence(
    fam: &IntegralFamily,
    state: &[f64],
    cfg: &DiffConfig,
) -> Result<f64> {
    let j = fiber_jacobian(fam, state, cfg)?;
    Ok(linalg::det(&j).abs())
}

/// Solve f(q, v) = λ for v by Newton iteration from `seed`.
pub fn solve_leaf(
    fam: &IntegralFamily,
    q: &[f64],
    lambda: &[f64],
    seed: &[f64],
    lcfg: &LeafSolveConfig,
    dcfg: &DiffConfig,
) -> Result<Vec<f64>> {
    let n = fam.n;
    assert_eq!(q.len(), n, "base point dimension");
    assert_eq!(lambda.len(), n, "level dimension");
    let mut v = seed.to_vec();
    let mut state = q.to_vec();
    state.extend_from_slice(&v);
    let mut last_residual = f64::INFINITY;
    for _ in 0..lcfg.max_iter {
        state[n..].copy_from_slice(&v);
        let vals = fam.values(&state)?;
        let r: Vec<f64> = vals.iter().zip(lambda).map(|(f, l)| f - l).collect();
        last_residual = linalg::norm_inf(&r);
        if last_residual <= lcfg.newton_tol {
            return Ok(v);
        }
        let j = fiber_jacobian(fam, &state, dcfg)?;
        let scale = hadamard_scale(&j, n);
        if scale == 0.0 || linalg::det(&j).abs() < DEGENERACY_TOL * scale {
            return Err(HjtError::DegenerateFiberJacobian);
        }
        let lu = Lu::factor(&j).map_err(|_| HjtError::DegenerateFiberJacobian)?;
        let dv = lu.solve(&r);
        for i in 0..n {
            v[i] -= dv[i];
        }
    }
    Err(HjtError::NewtonDiverged {
        max_iter: lcfg.max_iter,
        residual: last_residual,
    })
}

fn quantize(q: &[f64]) -> Vec<i64> {
    q.iter().map(|x| (x / 1e-9).round() as i64).collect()
}

/// Section of TQ built by fiber inversion of an integral family at fixed λ.
/// Values come from Newton solves memoized per base point; the seed for a
/// new point is the solution at the nearest previously solved point (ties
/// broken by key order), falling back to the user seed, so adjacent solves
/// stay on one branch of the level set.
struct LeafFn {
    fam: IntegralFamily,
    lambda: Vec<f64>,
    seed: Vec<f64>,
    lcfg: LeafSolveConfig,
    dcfg: DiffConfig,
    memo: Mutex<HashMap<Vec<i64>, Vec<f64>>>,
}

impl LeafFn {
    fn solve_at(&self, q: &[f64]) -> Result<Vec<f64>> {
        let key = quantize(q);
        let neighbor_seed = {
            let memo = self.memo.lock().unwrap();
            if let Some(v) = memo.get(&key) {
                return Ok(v.clone());
            }
            let mut best: Option<(f64, &Vec<i64>, &Vec<f64>)> = None;
            for (k, v) in memo.iter() {
                let d2: f64 = k
                    .iter()
                    .zip(&key)
                    .map(|(a, b)| {
                        let d = (a - b) as f64;
                        d * d
                    })
                    .sum();
                let better = match &best {
                    None => true,
                    Some((bd, bk, _)) => d2 < *bd || (d2 == *bd && k.as_slice() < bk.as_slice()),
                };
                if better {
                    best = Some((d2, k, v));
                }
            }
            best.map(|(_, _, v)| v.clone())
        };
        let seed = neighbor_seed.as_deref().unwrap_or(&self.seed);
        let v = solve_leaf(&self.fam, q, &self.lambda, seed, &self.lcfg, &self.dcfg)?;
        self.memo.lock().unwrap().insert(key, v.clone());
        Ok(v)
    }

    /// ∂v/∂q by the implicit function theorem: (∂f/∂v) ∂v/∂q = −∂f/∂q.
    fn implicit_jacobian(&self, q: &[f64], v: &[f64]) -> Result<Mat> {
        let n = self.fam.n;
        let mut state = q.to_vec();
        state.extend_from_slice(v);
        let mut jv = Mat::zeros(n, n);
        let mut jq = Mat::zeros(n, n);
        for (i, f) in self.fam.integrals.iter().enumerate() {
            let df = grad(f, &state, &self.dcfg)?;
            for k in 0..n {
                jq[(i, k)] = df[k];
                jv[(i, k)] = df[n + k];
            }
        }
        let lu = Lu::factor(&jv).map_err(|_| HjtError::DegenerateFiberJacobian)?;
        let mut out = Mat::zeros(n, n);
        for col in 0..n {
            let rhs: Vec<f64> = (0..n).map(|i| -jq[(i, col)]).collect();
            let sol = lu.solve(&rhs);
            for i in 0..n {
                out[(i, col)] = sol[i];
            }
        }
        Ok(out)
    }
}

impl VectorFn for LeafFn {
    fn eval0(&self, x: &[f64]) -> Vec<f64> {
        match self.solve_at(x) {
            Ok(v) => v,
            Err(_) => vec![f64::NAN; self.fam.n],
        }
    }
    fn eval1(&self, x: &[D1]) -> Vec<D1> {
        let n = self.fam.n;
        let primal: Vec<f64> = x.iter().map(|d| d.re).collect();
        let (v, dv) = match self
            .solve_at(&primal)
            .and_then(|v| self.implicit_jacobian(&primal, &v).map(|j| (v, j)))
        {
            Ok(pair) => pair,
            Err(_) => {
                return vec![
                    D1 {
                        re: f64::NAN,
                        im: f64::NAN
                    };
                    n
                ]
            }
        };
        (0..n)
            .map(|i| {
                let im = (0..n).map(|j| dv[(i, j)] * x[j].im).sum();
                D1 { re: v[i], im }
            })
            .collect()
    }
    fn eval2(&self, _x: &[D2]) -> Vec<D2> {
        unimplemented!("leaf sections support value and first derivative only")
    }
    fn eval3(&self, _x: &[D3]) -> Vec<D3> {
        unimplemented!("leaf sections support value and first derivative only")
    }
}

/// Build X_λ from the family by solving every point of `warm_grid` in
/// deterministic row-major order (so later parallel evaluations replay the
/// memo byte-for-byte), then return it as a candidate vector field whose
/// off-grid evaluations continue the nearest solved branch.
pub fn build_complete_solution(
    fam: &IntegralFamily,
    lambda: &[f64],
    warm_grid: &GridSpec,
    seed: &[f64],
    guard: Guard,
    lcfg: &LeafSolveConfig,
    dcfg: &DiffConfig,
) -> Result<CandidateVectorField> {
    let n = fam.dof();
    assert_eq!(warm_grid.dim(), n, "warm grid must sample Q");
    let leaf = LeafFn {
        fam: fam.clone(),
        lambda: lambda.to_vec(),
        seed: seed.to_vec(),
        lcfg: *lcfg,
        dcfg: *dcfg,
        memo: Mutex::new(HashMap::new()),
    };
    for q in warm_grid.guarded_points(&guard)? {
        leaf.solve_at(&q)?;
    }
    let mut params = std::collections::BTreeMap::new();
    for (label, value) in fam.labels().iter().zip(lambda) {
        params.insert(label.clone(), *value);
    }
    let name = format!("leaf({})", fam.labels().join(","));
    let section = SectionField::with_guard(n, SectionKind::Vector, leaf, guard);
    Ok(CandidateVectorField::new(name, section).with_params(params))
}

/// Two-sided bound on |det DΦ| for Φ(q,λ) = (q, X_λ(q)) over a product
/// grid, with DΦ taken by central differences and every perturbed solve
/// seeded from the sample's own center solution. A complete solution needs
/// the determinant bounded away from zero and from infinity; blow-up flags
/// the locus where the fiber Jacobian of the family degenerates.
#[derive(Clone, Debug)]
pub struct TransversalityReport {
    pub min_abs_det: f64,
    pub max_abs_det: f64,
    pub samples: usize,
}

pub fn transversality_check(
    fam: &IntegralFamily,
    q_grid: &GridSpec,
    lambda_grid: &GridSpec,
    seed: &[f64],
    lcfg: &LeafSolveConfig,
    dcfg: &DiffConfig,
) -> Result<TransversalityReport> {
    let n = fam.dof();
    assert_eq!(q_grid.dim(), n, "q grid must sample Q");
    assert_eq!(lambda_grid.dim(), n, "lambda grid must sample the level box");
    let h = 1e-5;
    let mut min_det = f64::INFINITY;
    let mut max_det = 0.0_f64;
    let mut samples = 0;
    for q in q_grid.points() {
        for lambda in lambda_grid.points() {
            let center = solve_leaf(fam, &q, &lambda, seed, lcfg, dcfg)?;
            let phi = |qq: &[f64], ll: &[f64]| -> Result<Vec<f64>> {
                let v = solve_leaf(fam, qq, ll, &center, lcfg, dcfg)?;
                let mut out = qq.to_vec();
                out.extend(v);
                Ok(out)
            };
            let mut d = Mat::zeros(2 * n, 2 * n);
            for col in 0..2 * n {
                let mut qp = q.clone();
                let mut qm = q.clone();
                let mut lp = lambda.clone();
                let mut lm = lambda.clone();
                if col < n {
                    qp[col] += h;
                    qm[col] -= h;
                } else {
                    lp[col - n] += h;
                    lm[col - n] -= h;
                }
                let fp = phi(&qp, &lp)?;
                let fm = phi(&qm, &lm)?;
                for row in 0..2 * n {
                    d[(row, col)] = (fp[row] - fm[row]) / (2.0 * h);
                }
            }
            let det = linalg::det(&d).abs();
            min_det = min_det.min(det);
            max_det = max_det.max(det);
            samples += 1;
        }
    }
    if samples == 0 {
        return Err(HjtError::EmptyGrid);
    }
    Ok(TransversalityReport {
        min_abs_det: min_det,
        max_abs_det: max_det,
        samples,
    })
}

/// Poisson bracket through the Cartan two-form: i(X_g)ω_L = dg and
/// {f,g} = ½(df·X_g − dg·X_f), which is antisymmetric bitwise and matches
/// the canonical bracket for fiber-regular mechanical Lagrangians.
pub fn poisson_bracket(
    sys: &LagrangianSystem,
    f: &ScalarField,
    g: &ScalarField,
    state: &[f64],
    cfg: &DiffConfig,
) -> Result<f64> {
    let m = 2 * sys.dof();
    assert_eq!(f.arity(), m, "f lives on TQ");
    assert_eq!(g.arity(), m, "g lives on TQ");
    let (_, omega) = cartan_forms(sys, state, cfg)?;
    let omega_t = omega.as_mat().transpose();
    if linalg::cond_1(&omega_t) > linalg::SINGULAR_COND {
        return Err(HjtError::SingularOmega);
    }
    let lu = Lu::factor(&omega_t).map_err(|_| HjtError::SingularOmega)?;
    let df = grad(f, state, cfg)?;
    let dg = grad(g, state, cfg)?;
    let xf = lu.solve(&df);
    let xg = lu.solve(&dg);
    Ok(0.5 * (linalg::dot(&df, &xg) - linalg::dot(&dg, &xf)))
}

/// Entry (i,j) = max over the guarded grid of |{f_i, f_j}|. All entries
/// small certifies involution, which predicts that the built complete
/// solution also solves the standard (isotropic) problem.
pub fn involution_matrix(
    fam: &IntegralFamily,
    sys: &LagrangianSystem,
    grid: &GridSpec,
    cfg: &DiffConfig,
) -> Result<Mat> {
    let n = fam.dof();
    assert_eq!(grid.dim(), 2 * n, "involution grid samples TQ");
    let pts = grid.guarded_points(sys.lagrangian().guard())?;
    let mut table = Mat::zeros(n, n);
    let mut used = 0;
    for state in &pts {
        if fam
            .integrals
            .iter()
            .any(|f| f.admit(state).is_err())
        {
            continue;
        }
        used += 1;
        for i in 0..n {
            for j in (i + 1)..n {
                let b = poisson_bracket(sys, &fam.integrals[i], &fam.integrals[j], state, cfg)?
                    .abs();
                if b > table[(i, j)] {
                    table[(i, j)] = b;
                    table[(j, i)] = b;
                }
            }
        }
    }
    if used == 0 {
        return Err(HjtError::EmptyGrid);
    }
    Ok(table)
}

/// Drift of the inverse-map parameters λ(t) = pr₂ ∘ Φ⁻¹ along a trajectory
/// of the dynamics: Φ is inverted by an outer Newton iteration in λ (inner
/// solves produce X_λ(q)), and the report is max_t ‖λ(t) − λ(0)‖∞. Small
/// drift certifies that the inverse-map components are constants of the
/// motion.
pub fn inverse_parameter_drift(
    fam: &IntegralFamily,
    sys: &LagrangianSystem,
    x0: &[f64],
    dt: f64,
    steps: usize,
    lcfg: &LeafSolveConfig,
    dcfg: &DiffConfig,
) -> Result<f64> {
    let n = fam.dof();
    assert_eq!(sys.dof(), n, "family and system must share Q");
    let rhs = crate::dynamics::sode_rhs(sys, *dcfg);
    let traj = crate::dynamics::integrate(rhs, x0, dt, steps, sys.lagrangian().guard(), None);
    if let Some(k) = traj.violation_step {
        return Err(HjtError::GuardViolationAtStep(k));
    }
    let lambda0 = fam.values(x0)?;
    let mut lambda = lambda0.clone();
    let mut drift = 0.0_f64;
    for state in &traj.states {
        let (q, v) = state.split_at(n);
        // Outer Newton in λ: find λ with X_λ(q) = v, seeded by continuation.
        let mut converged = false;
        for _ in 0..lcfg.max_iter {
            let xl = solve_leaf(fam, q, &lambda, v, lcfg, dcfg)?;
            let r: Vec<f64> = xl.iter().zip(v).map(|(a, b)| a - b).collect();
            if linalg::norm_inf(&r) <= lcfg.newton_tol {
                converged = true;
                break;
            }
            // dX/dλ = (∂f/∂v)⁻¹, so the Newton update is dλ = −(∂f/∂v)·r.
            let mut st = q.to_vec();
            st.extend_from_slice(&xl);
            let j = fiber_jacobian(fam, &st, dcfg)?;
            for i in 0..n {
                let step: f64 = (0..n).map(|k| j[(i, k)] * r[k]).sum();
                lambda[i] -= step;
            }
        }
        if !converged {
            return Err(HjtError::NewtonDiverged {
                max_iter: lcfg.max_iter,
                residual: f64::NAN,
            });
        }
        for i in 0..n {
            drift = drift.max((lambda[i] - lambda0[i]).abs());
        }
    }
    Ok(drift)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dual::Real;
    use crate::field::{guard_from, RealMap};
    use crate::grid::AxisSpec;

    struct OscL;
    impl RealMap for OscL {
        fn apply<R: Real>(&self, x: &[R]) -> R {
            let half = R::from_f64(0.5);
            half * (x[2] * x[2] + x[3] * x[3]) - half * (x[0] * x[0] + x[1] * x[1])
        }
    }

    fn osc() -> LagrangianSystem {
        LagrangianSystem::new(2, ScalarField::new(4, OscL))
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

    fn energy_family() -> IntegralFamily {
        IntegralFamily::new(
            2,
            vec![
                ("f2".to_string(), ScalarField::new(4, F2)),
                ("f3".to_string(), ScalarField::new(4, F3)),
            ],
        )
    }

    fn angular_family() -> IntegralFamily {
        IntegralFamily::new(
            2,
            vec![
                ("f1".to_string(), ScalarField::new(4, F1)),
                ("f4".to_string(), ScalarField::new(4, F4)),
            ],
        )
    }

    #[test]
    fn all_four_oscillator_functions_are_first_integrals() {
        let sys = osc();
        let fam = IntegralFamily::new(
            2,
            vec![
                ("f1".to_string(), ScalarField::new(4, F1)),
                ("f4".to_string(), ScalarField::new(4, F4)),
            ],
        );
        for state in [[1.0, 1.0, 1.0, 0.0], [0.3, -0.7, 1.2, 0.4]] {
            let r = first_integral_residual(&fam, &sys, &state, &DiffConfig::default()).unwrap();
            assert!(r.iter().all(|x| *x < 1e-12), "residuals {r:?}");
            let r =
                first_integral_residual(&energy_family(), &sys, &state, &DiffConfig::default())
                    .unwrap();
            assert!(r.iter().all(|x| *x < 1e-12), "residuals {r:?}");
        }
    }

    #[test]
    fn fiber_independence_matches_hand_determinants() {
        let cfg = DiffConfig::default();
        let state = [1.0, 1.0, 1.0, 1.0];
        let d = fiber_independence(&energy_family(), &state, &cfg).unwrap();
        assert!((d - 4.0).abs() < 1e-12);
        let d = fiber_independence(&angular_family(), &state, &cfg).unwrap();
        assert!((d - 2.0).abs() < 1e-12);
        // Degeneracy locus q¹v² + q²v¹ = 0.
        let state = [1.0, 1.0, 1.0, -1.0];
        let d = fiber_independence(&angular_family(), &state, &cfg).unwrap();
        assert!(d < 1e-12);
    }

    #[test]
    fn solve_leaf_reproduces_closed_forms() {
        let lcfg = LeafSolveConfig::default();
        let dcfg = DiffConfig::default();
        let v = solve_leaf(
            &energy_family(),
            &[1.0, 0.0],
            &[4.0, 1.0],
            &[1.0, 1.0],
            &lcfg,
            &dcfg,
        )
        .unwrap();
        assert!((v[0] - 3.0_f64.sqrt()).abs() < 1e-10);
        assert!((v[1] - 1.0).abs() < 1e-10);

        let v = solve_leaf(
            &angular_family(),
            &[1.0, 1.0],
            &[2.0, 0.0],
            &[0.9, 1.1],
            &lcfg,
            &dcfg,
        )
        .unwrap();
        assert!((v[0] - 1.0).abs() < 1e-10);
        assert!((v[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn unreachable_levels_exhaust_the_iteration_budget() {
        let err = solve_leaf(
            &energy_family(),
            &[1.0, 0.0],
            &[-1.0, 1.0],
            &[1.0, 1.0],
            &LeafSolveConfig::default(),
            &DiffConfig::default(),
        )
        .unwrap_err();
        assert!(
            matches!(
                err,
                HjtError::NewtonDiverged { .. } | HjtError::DegenerateFiberJacobian
            ),
            "got {err:?}"
        );
    }

    #[test]
    fn built_solution_matches_the_closed_form_family() {
        let fam = energy_family();
        let grid = GridSpec::cube(2, -0.9, 0.9, 7);
        let x = build_complete_solution(
            &fam,
            &[4.0, 1.0],
            &grid,
            &[1.0, 1.0],
            crate::field::guard_all(),
            &LeafSolveConfig::default(),
            &DiffConfig::default(),
        )
        .unwrap();
        assert_eq!(x.params["f2"], 4.0);
        for q in grid.points() {
            let v = x.section.value(&q).unwrap();
            let want0 = (4.0 - q[0] * q[0]).sqrt();
            let want1 = (1.0 - q[1] * q[1]).sqrt();
            assert!((v[0] - want0).abs() < 1e-8, "at {q:?}");
            assert!((v[1] - want1).abs() < 1e-8, "at {q:?}");
        }
        // Off-grid evaluation continues the same branch.
        let v = x.section.value(&[0.33, -0.47]).unwrap();
        assert!(v[0] > 0.0 && v[1] > 0.0);
        // Implicit-function first derivatives match the closed form.
        let q = [0.3, -0.6];
        let j = crate::geometry::jacobian(x.section.as_map(), &q, &DiffConfig::default()).unwrap();
        let want00 = -q[0] / (4.0 - q[0] * q[0]).sqrt();
        let want11 = -q[1] / (1.0 - q[1] * q[1]).sqrt();
        assert!((j[(0, 0)] - want00).abs() < 1e-6);
        assert!((j[(1, 1)] - want11).abs() < 1e-6);
        assert!(j[(0, 1)].abs() < 1e-10 && j[(1, 0)].abs() < 1e-10);
    }

    #[test]
    fn built_angular_solution_matches_its_closed_form() {
        let fam = angular_family();
        let grid = GridSpec::cube(2, 0.8, 1.2, 5);
        let (c, l) = (2.0, 0.5);
        let x = build_complete_solution(
            &fam,
            &[c, l],
            &grid,
            &[1.0, 1.0],
            guard_from(|q| q[0] > 0.1 && q[1] > 0.1),
            &LeafSolveConfig::default(),
            &DiffConfig::default(),
        )
        .unwrap();
        for q in grid.points() {
            let v = x.section.value(&q).unwrap();
            let disc = l * l + 4.0 * q[0] * q[1] * (c - q[0] * q[1]);
            let v0 = (-l + disc.sqrt()) / (2.0 * q[1]);
            let v1 = (l + q[1] * v0) / q[0];
            assert!((v[0] - v0).abs() < 1e-8, "at {q:?}");
            assert!((v[1] - v1).abs() < 1e-8, "at {q:?}");
        }
    }

    #[test]
    fn canonical_bracket_is_reproduced() {
        struct Q0;
        impl RealMap for Q0 {
            fn apply<R: Real>(&self, x: &[R]) -> R {
                x[0]
            }
        }
        struct V0;
        impl RealMap for V0 {
            fn apply<R: Real>(&self, x: &[R]) -> R {
                x[2]
            }
        }
        let sys = osc();
        let q0 = ScalarField::new(4, Q0);
        let v0 = ScalarField::new(4, V0);
        let b = poisson_bracket(&sys, &q0, &v0, &[0.4, -0.2, 1.1, 0.6], &DiffConfig::default())
            .unwrap();
        assert!((b - 1.0).abs() < 1e-12);
        // Antisymmetry is bitwise.
        let ba = poisson_bracket(&sys, &v0, &q0, &[0.4, -0.2, 1.1, 0.6], &DiffConfig::default())
            .unwrap();
        assert_eq!(b.to_bits(), (-ba).to_bits());
        let bb = poisson_bracket(&sys, &q0, &q0, &[0.4, -0.2, 1.1, 0.6], &DiffConfig::default())
            .unwrap();
        assert_eq!(bb.to_bits(), 0.0_f64.to_bits());
    }

    #[test]
    fn oscillator_bracket_identities_hold() {
        let sys = osc();
        let f1 = ScalarField::new(4, F1);
        let f2 = ScalarField::new(4, F2);
        let f3 = ScalarField::new(4, F3);
        let f4 = ScalarField::new(4, F4);
        let cfg = DiffConfig::default();
        let state = [1.0, 1.0, 1.0, 0.0];
        let b23 = poisson_bracket(&sys, &f2, &f3, &state, &cfg).unwrap();
        assert!(b23.abs() < 1e-10, "{{f2,f3}} = {b23}");
        let b14 = poisson_bracket(&sys, &f1, &f4, &state, &cfg).unwrap();
        let gap = f2.value(&state).unwrap() - f3.value(&state).unwrap();
        assert!((b14 - gap).abs() < 1e-10, "{{f1,f4}} = {b14}, f2−f3 = {gap}");
        assert!((b14 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn bracket_satisfies_leibniz() {
        let sys = osc();
        let f1 = ScalarField::new(4, F1);
        let f2 = ScalarField::new(4, F2);
        let f3 = ScalarField::new(4, F3);
        struct Prod;
        impl RealMap for Prod {
            fn apply<R: Real>(&self, x: &[R]) -> R {
                let f2 = x[2] * x[2] + x[0] * x[0];
                let f3 = x[3] * x[3] + x[1] * x[1];
                f2 * f3
            }
        }
        let prod = ScalarField::new(4, Prod);
        let cfg = DiffConfig::default();
        for state in [[0.7, -0.4, 1.3, 0.8], [1.1, 0.5, -0.6, 1.4]] {
            let lhs = poisson_bracket(&sys, &f1, &prod, &state, &cfg).unwrap();
            let g = f2.value(&state).unwrap();
            let h = f3.value(&state).unwrap();
            let rhs = g * poisson_bracket(&sys, &f1, &f3, &state, &cfg).unwrap()
                + h * poisson_bracket(&sys, &f1, &f2, &state, &cfg).unwrap();
            assert!((lhs - rhs).abs() < 1e-8, "Leibniz gap {}", lhs - rhs);
        }
    }

    #[test]
    fn involution_tables_separate_the_two_families() {
        let sys = osc();
        let grid = GridSpec::new(vec![
            AxisSpec::new(0.5, 1.5, 3),
            AxisSpec::new(0.5, 1.5, 3),
            AxisSpec::new(0.5, 1.5, 3),
            AxisSpec::new(-1.5, -0.5, 3),
        ]);
        let cfg = DiffConfig::default();
        let t = involution_matrix(&energy_family(), &sys, &grid, &cfg).unwrap();
        assert!(t[(0, 1)] <= 1e-8, "energy family bracket {:?}", t[(0, 1)]);
        let t = involution_matrix(&angular_family(), &sys, &grid, &cfg).unwrap();
        assert!(t[(0, 1)] > 0.5, "angular family bracket {:?}", t[(0, 1)]);
    }

    #[test]
    fn transversality_bounds_detect_completeness_and_degeneracy() {
        let lcfg = LeafSolveConfig::default();
        let dcfg = DiffConfig::default();
        // Free-particle velocities form an affine bijection: det = 1.
        struct V1;
        impl RealMap for V1 {
            fn apply<R: Real>(&self, x: &[R]) -> R {
                x[2]
            }
        }
        struct V2;
        impl RealMap for V2 {
            fn apply<R: Real>(&self, x: &[R]) -> R {
                x[3]
            }
        }
        let free_fam = IntegralFamily::new(
            2,
            vec![
                ("c1".to_string(), ScalarField::new(4, V1)),
                ("c2".to_string(), ScalarField::new(4, V2)),
            ],
        );
        let qg = GridSpec::cube(2, -1.0, 1.0, 3);
        let lg = GridSpec::cube(2, 0.5, 1.5, 3);
        let rep = transversality_check(&free_fam, &qg, &lg, &[1.0, 1.0], &lcfg, &dcfg).unwrap();
        assert!((rep.min_abs_det - 1.0).abs() < 1e-9);
        assert!((rep.max_abs_det - 1.0).abs() < 1e-9);

        // Oscillator energy family: bounded on an interior box.
        let qg = GridSpec::cube(2, -0.5, 0.5, 3);
        let lg = GridSpec::cube(2, 2.0, 4.0, 3);
        let rep =
            transversality_check(&energy_family(), &qg, &lg, &[1.5, 1.5], &lcfg, &dcfg).unwrap();
        assert!(rep.min_abs_det > 0.01, "min {:?}", rep.min_abs_det);
        assert!(rep.max_abs_det < 10.0, "max {:?}", rep.max_abs_det);

        // Angular family blows up approaching its degeneracy locus.
        let qg = GridSpec::new(vec![AxisSpec::new(1.0, 1.0, 1), AxisSpec::new(0.9, 0.9999, 4)]);
        let lg = GridSpec::new(vec![AxisSpec::new(1.0, 1.0, 1), AxisSpec::new(0.0, 0.0, 1)]);
        let rep =
            transversality_check(&angular_family(), &qg, &lg, &[0.5, 0.5], &lcfg, &dcfg).unwrap();
        assert!(rep.max_abs_det > 10.0, "max {:?}", rep.max_abs_det);
        assert!(rep.max_abs_det > 10.0 * rep.min_abs_det);
    }

    #[test]
    fn inverse_parameters_are_constants_of_the_motion() {
        let sys = osc();
        let drift = inverse_parameter_drift(
            &energy_family(),
            &sys,
            &[0.2, 0.1, 1.5, 1.2],
            1e-3,
            100,
            &LeafSolveConfig::default(),
            &DiffConfig::default(),
        )
        .unwrap();
        assert!(drift < 1e-6, "parameter drift {drift}");
    }

    #[test]
    fn warmed_leaf_sections_evaluate_identically_across_thread_counts() {
        let fam = energy_family();
        let grid = GridSpec::cube(2, -0.8, 0.8, 5);
        let x = build_complete_solution(
            &fam,
            &[4.0, 1.0],
            &grid,
            &[1.0, 1.0],
            crate::field::guard_all(),
            &LeafSolveConfig::default(),
            &DiffConfig::default(),
        )
        .unwrap();
        let sys = crate::dynamics::LagrangianSystem::new(
            2,
            ScalarField::new(4, OscL),
        );
        let cfg = DiffConfig::default();
        let a = crate::hj_lagrangian::verify(
            &sys,
            &x,
            &grid,
            crate::hj_lagrangian::VerifyMode::Standard,
            1e-6,
            &cfg,
            1,
        )
        .unwrap();
        let b = crate::hj_lagrangian::verify(
            &sys,
            &x,
            &grid,
            crate::hj_lagrangian::VerifyMode::Standard,
            1e-6,
            &cfg,
            4,
        )
        .unwrap();
        assert!(a.pass, "channels {:?}", a.channels);
        for (sa, sb) in a.samples.iter().zip(&b.samples) {
            for (k, v) in &sa.channels {
                assert_eq!(sb.channels[k].to_bits(), v.to_bits(), "channel {k}");
            }
        }
    }
}
