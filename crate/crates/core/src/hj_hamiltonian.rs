//! The Hamilton-Jacobi problem on the cotangent bundle.
//!
//! A candidate is a one-form α = aᵢ(q) dqⁱ. Its associated vector field is
//! X = ∂H/∂p restricted to the graph p = a(q); α solves the generalized
//! problem when Tα ∘ X = Z_H ∘ α, whose only nontrivial component is
//!
//!   rᵢ = (∂H/∂p_j) (∂aᵢ/∂qʲ) + ∂H/∂qⁱ   at p = a(q).
//!
//! The same vector is produced geometrically as i(X)dα + d(H ∘ α); the two
//! routes are computed independently and must agree to roundoff, which the
//! verifier records as a diagnostic. The standard problem demands a closed
//! α; then H ∘ α is locally constant, and with α = dW the problem collapses
//! to the classical scalar equation H(q, ∂W/∂q) = E.
//!
//! The Legendre map bridges both pictures: for a fiber-regular Lagrangian,
//! X solves the tangent-bundle problem exactly when α = FL ∘ X solves the
//! cotangent-bundle problem for the matched Hamiltonian H = p·v* − L(q, v*).

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::dual::{D1, D2, D3};
use crate::dynamics::{
    fiber_inverse, hamiltonian_rhs, integrate, legendre_map, HamiltonianSystem, LagrangianSystem,
};
use crate::error::{HjtError, Result};
use crate::field::{guard_from, ScalarField, ScalarFn, SectionField, SectionKind, VectorFn};
use crate::geometry::{
    compose_scalar, exterior_derivative, grad, interior_product, jacobian, DiffConfig,
};
use crate::grid::{map_points, GridSpec};
use crate::hj_lagrangian::{
    graph_map, CandidateVectorField, ResidualReport, SampleResiduals, VerifyMode,
};
use crate::linalg::norm_inf;

/// A named candidate one-form on Q with the parameter values baked in.
#[derive(Clone)]
pub struct CandidateOneForm {
    pub name: String,
    pub params: BTreeMap<String, f64>,
    pub section: SectionField,
}

impl CandidateOneForm {
    pub fn new(name: impl Into<String>, section: SectionField) -> Self {
        assert_eq!(section.kind(), SectionKind::OneForm, "candidate must be a one-form");
        CandidateOneForm {
            name: name.into(),
            params: BTreeMap::new(),
            section,
        }
    }

    pub fn with_params(mut self, params: BTreeMap<String, f64>) -> Self {
        self.params = params;
        self
    }
}

fn lift_point(a: &CandidateOneForm, q: &[f64]) -> Result<Vec<f64>> {
    let p = a.section.value(q)?;
    let mut z = q.to_vec();
    z.extend(p);
    Ok(z)
}

/// The vector field associated to α through H: X(q) = ∂H/∂p at (q, a(q)).
pub fn associated_field(
    sys: &HamiltonianSystem,
    a: &CandidateOneForm,
    q: &[f64],
    cfg: &DiffConfig,
) -> Result<Vec<f64>> {
    let n = sys.dof();
    let z = lift_point(a, q)?;
    sys.hamiltonian().admit(&z)?;
    let g = grad(sys.hamiltonian(), &z, cfg)?;
    Ok(g[n..].to_vec())
}

/// Generalized-problem residual by the geometric route:
/// i(X)dα + d(H ∘ α), with the last term differentiated as a composition.
pub fn hamiltonian_residual(
    sys: &HamiltonianSystem,
    a: &CandidateOneForm,
    q: &[f64],
    cfg: &DiffConfig,
) -> Result<Vec<f64>> {
    let n = sys.dof();
    let x = associated_field(sys, a, q, cfg)?;
    let da = exterior_derivative(&a.section, q, cfg)?;
    let ixda = interior_product(&x, &da);
    let phi = graph_map(&a.section);
    let h_on_graph = compose_scalar(sys.hamiltonian(), &phi);
    let dh = grad(&h_on_graph, q, cfg)?;
    Ok((0..n).map(|i| ixda[i] + dh[i]).collect())
}

/// Generalized-problem residual by the direct coordinate route:
/// the vertical part of Tα ∘ X − Z_H ∘ α, i.e. (∂a/∂q)·X + ∂H/∂q at p = a(q).
pub fn relatedness_residual(
    sys: &HamiltonianSystem,
    a: &CandidateOneForm,
    q: &[f64],
    cfg: &DiffConfig,
) -> Result<Vec<f64>> {
    let n = sys.dof();
    let z = lift_point(a, q)?;
    sys.hamiltonian().admit(&z)?;
    let g = grad(sys.hamiltonian(), &z, cfg)?;
    let ja = jacobian(a.section.as_map(), q, cfg)?;
    Ok((0..n)
        .map(|i| {
            let conv: f64 = (0..n).map(|j| ja[(i, j)] * g[n + j]).sum();
            conv + g[i]
        })
        .collect())
}

/// Values of H ∘ dW over a grid, their spread, and their mean.
#[derive(Clone, Debug)]
pub struct ClassicalHjReport {
    /// (point, H(q, ∂W/∂q)) per admitted sample.
    pub samples: Vec<(Vec<f64>, f64)>,
    /// max − min of the sampled values; ≤ tol certifies a local solution.
    pub spread: f64,
    /// Mean of the sampled values: the energy constant when spread is small.
    pub energy: f64,
}

/// Evaluate the classical scalar equation H(q, ∂W/∂q) = E over a lattice.
pub fn classical_hj_residual(
    sys: &HamiltonianSystem,
    w: &ScalarField,
    grid: &GridSpec,
    cfg: &DiffConfig,
) -> Result<ClassicalHjReport> {
    assert_eq!(grid.dim(), sys.dof(), "grid must sample the configuration space");
    assert_eq!(w.arity(), sys.dof(), "characteristic function lives on Q");
    let pts = grid.guarded_points(w.guard())?;
    let mut samples = Vec::new();
    for q in pts {
        let dw = grad(w, &q, cfg)?;
        let mut z = q.clone();
        z.extend(dw);
        if sys.hamiltonian().admit(&z).is_err() {
            continue;
        }
        let value = sys.hamiltonian().value(&z)?;
        samples.push((q, value));
    }
    if samples.is_empty() {
        return Err(HjtError::EmptyGrid);
    }
    let (mut lo, mut hi, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
    for (_, v) in &samples {
        lo = lo.min(*v);
        hi = hi.max(*v);
        sum += v;
    }
    Ok(ClassicalHjReport {
        spread: hi - lo,
        energy: sum / samples.len() as f64,
        samples,
    })
}

/// H(q, p) = p·v* − L(q, v*) with v* the fiber inverse of ∂L/∂v = p,
/// found by Newton iteration seeded from a reference section on Q.
///
/// Supports value and first derivative; the gradient uses the envelope
/// identity ∂H/∂q = −∂L/∂q, ∂H/∂p = v*, so no derivative of the Newton
/// solve is ever taken. Second and higher derivatives are a programming
/// error. A failed inversion surfaces as a NaN value, which the field
/// wrapper converts to a non-finite evaluation error.
struct MatchedH {
    lsys: LagrangianSystem,
    seed: Arc<dyn VectorFn>,
    cfg: DiffConfig,
    n: usize,
}

impl MatchedH {
    fn invert(&self, q: &[f64], p: &[f64]) -> Result<Vec<f64>> {
        let seed = self.seed.eval0(q);
        fiber_inverse(&self.lsys, q, p, &seed, &self.cfg)
    }

    fn value_and_grad(&self, z: &[f64]) -> Result<(f64, Vec<f64>)> {
        let n = self.n;
        let (q, p) = z.split_at(n);
        let v = self.invert(q, p)?;
        let mut state = q.to_vec();
        state.extend_from_slice(&v);
        let lval = self.lsys.lagrangian().value(&state)?;
        let lgrad = grad(self.lsys.lagrangian(), &state, &self.cfg)?;
        let h: f64 = p.iter().zip(&v).map(|(pi, vi)| pi * vi).sum::<f64>() - lval;
        let mut dh = Vec::with_capacity(2 * n);
        for i in 0..n {
            dh.push(-lgrad[i]);
        }
        dh.extend_from_slice(&v);
        Ok((h, dh))
    }
}

impl ScalarFn for MatchedH {
    fn eval0(&self, x: &[f64]) -> f64 {
        match self.value_and_grad(x) {
            Ok((h, _)) => h,
            Err(_) => f64::NAN,
        }
    }
    fn eval1(&self, x: &[D1]) -> D1 {
        let primal: Vec<f64> = x.iter().map(|d| d.re).collect();
        match self.value_and_grad(&primal) {
            Ok((h, dh)) => {
                let im = x.iter().zip(&dh).map(|(d, g)| d.im * g).sum();
                D1 { re: h, im }
            }
            Err(_) => D1 {
                re: f64::NAN,
                im: f64::NAN,
            },
        }
    }
    fn eval2(&self, _x: &[D2]) -> D2 {
        panic!("matched Hamiltonian supports value and first derivative only")
    }
    fn eval3(&self, _x: &[D3]) -> D3 {
        panic!("matched Hamiltonian supports value and first derivative only")
    }
}

/// Construct the Hamiltonian matched to a fiber-regular Lagrangian by
/// Legendre inversion, with Newton seeds drawn from `seed` (typically the
/// candidate vector field whose bridge image is under study).
pub fn matched_hamiltonian(
    lsys: &LagrangianSystem,
    seed: &SectionField,
    cfg: &DiffConfig,
) -> HamiltonianSystem {
    let n = lsys.dof();
    assert_eq!(seed.base_dim(), n, "seed section must live on Q");
    let seed_guard = seed.guard().clone();
    let guard = guard_from(move |z: &[f64]| {
        z.len() == 2 * n && seed_guard(&z[..n]) && z[n..].iter().all(|t| t.is_finite())
    });
    let h = ScalarField::with_guard(
        2 * n,
        MatchedH {
            lsys: lsys.clone(),
            seed: seed.as_map().shared(),
            cfg: *cfg,
            n,
        },
        guard,
    );
    HamiltonianSystem::new(n, h)
}

/// Check fiber regularity of L along the graph of X at one point; the
/// Legendre bridge is only meaningful where this holds.
pub fn bridge_regularity_check(
    lsys: &LagrangianSystem,
    x: &CandidateVectorField,
    q: &[f64],
    cfg: &DiffConfig,
) -> Result<()> {
    let w = x.section.value(q)?;
    let mut state = q.to_vec();
    state.extend_from_slice(&w);
    lsys.lagrangian().admit(&state)?;
    let (big_w, _) = crate::dynamics::force_equation(lsys, &state, cfg)?;
    if crate::linalg::cond_1(&big_w) > crate::linalg::SINGULAR_COND {
        return Err(HjtError::SingularHessian);
    }
    Ok(())
}

struct BridgeComps {
    fl: Arc<dyn VectorFn>,
    graph: Arc<dyn VectorFn>,
    n: usize,
}

impl VectorFn for BridgeComps {
    fn eval0(&self, x: &[f64]) -> Vec<f64> {
        self.fl.eval0(&self.graph.eval0(x))[self.n..].to_vec()
    }
    fn eval1(&self, x: &[D1]) -> Vec<D1> {
        self.fl.eval1(&self.graph.eval1(x))[self.n..].to_vec()
    }
    fn eval2(&self, x: &[D2]) -> Vec<D2> {
        self.fl.eval2(&self.graph.eval2(x))[self.n..].to_vec()
    }
    fn eval3(&self, _x: &[D3]) -> Vec<D3> {
        unimplemented!("bridge one-forms support up to second derivatives")
    }
}

/// The one-form matched to a candidate vector field: α = FL ∘ X, i.e.
/// a(q) = ∂L/∂v(q, w(q)). Solves the cotangent-bundle problem for the
/// matched Hamiltonian exactly when X solves the tangent-bundle problem.
pub fn legendre_bridge(lsys: &LagrangianSystem, x: &CandidateVectorField) -> CandidateOneForm {
    let n = lsys.dof();
    assert_eq!(x.section.base_dim(), n, "candidate must live on the system's Q");
    let graph = graph_map(&x.section);
    let lguard = lsys.lagrangian().guard().clone();
    let xguard = x.section.guard().clone();
    let graph_fn = graph.shared();
    let guard_graph = graph_fn.clone();
    let guard = guard_from(move |q: &[f64]| {
        if q.len() != n || !xguard(q) {
            return false;
        }
        let s = guard_graph.eval0(q);
        s.iter().all(|t| t.is_finite()) && lguard(&s)
    });
    let section = SectionField::with_guard(
        n,
        SectionKind::OneForm,
        BridgeComps {
            fl: legendre_map(lsys).shared(),
            graph: graph_fn,
            n,
        },
        guard,
    );
    CandidateOneForm {
        name: format!("bridge({})", x.name),
        params: x.params.clone(),
        section,
    }
}

struct HPointPacket {
    point: Vec<f64>,
    hamiltonian: f64,
    route_gap: f64,
    closedness: f64,
    h_value: f64,
}

/// Verify a candidate one-form over a lattice on Q.
///
/// Channels: `hamiltonian` always; standard mode adds `closedness`
/// (max |dα| entry) and `constancy` (per-sample deviation of H ∘ α from the
/// grid mean). The agreement of the two independent residual routes is
/// recorded as the `route_agreement` diagnostic at every sample.
pub fn verify_h(
    sys: &HamiltonianSystem,
    a: &CandidateOneForm,
    grid: &GridSpec,
    mode: VerifyMode,
    tol: f64,
    cfg: &DiffConfig,
    threads: usize,
) -> Result<ResidualReport> {
    assert_eq!(grid.dim(), sys.dof(), "grid must sample the configuration space");
    assert!(
        mode != VerifyMode::SingularIsotropy,
        "singular-isotropy mode applies to the tangent-bundle problem"
    );
    let candidate_pts = grid.guarded_points(a.section.guard())?;
    let results: Vec<Result<Option<HPointPacket>>> = map_points(&candidate_pts, threads, |q| {
        let z = match lift_point(a, q) {
            Ok(z) => z,
            Err(HjtError::GuardViolation) => return Ok(None),
            Err(e) => return Err(e),
        };
        if sys.hamiltonian().admit(&z).is_err() {
            return Ok(None);
        }
        let geo = hamiltonian_residual(sys, a, q, cfg)?;
        let direct = relatedness_residual(sys, a, q, cfg)?;
        let route_gap = geo
            .iter()
            .zip(&direct)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        let (closedness, h_value) = if mode == VerifyMode::Standard {
            let da = exterior_derivative(&a.section, q, cfg)?;
            (da.max_abs(), sys.hamiltonian().value(&z)?)
        } else {
            (0.0, 0.0)
        };
        Ok(Some(HPointPacket {
            point: q.to_vec(),
            hamiltonian: norm_inf(&geo),
            route_gap,
            closedness,
            h_value,
        }))
    });
    let mut packets = Vec::new();
    for r in results {
        if let Some(p) = r? {
            packets.push(p);
        }
    }
    if packets.is_empty() {
        return Err(HjtError::EmptyGrid);
    }
    let mean = packets.iter().map(|p| p.h_value).sum::<f64>() / packets.len() as f64;
    let samples: Vec<SampleResiduals> = packets
        .into_iter()
        .map(|p| {
            let mut channels = BTreeMap::new();
            channels.insert("hamiltonian".to_string(), p.hamiltonian);
            channels.insert("route_agreement".to_string(), p.route_gap);
            if mode == VerifyMode::Standard {
                channels.insert("closedness".to_string(), p.closedness);
                channels.insert("constancy".to_string(), (p.h_value - mean).abs());
            }
            SampleResiduals {
                point: p.point,
                channels,
            }
        })
        .collect();
    Ok(ResidualReport::assemble(
        mode.as_str(),
        tol,
        samples,
        &["route_agreement"],
    ))
}

/// Sup-distance over t ∈ [0, dt·steps] between the Z_H integral curve from
/// (q₀, a(q₀)) and the graph lift of the associated-field integral curve
/// from q₀. Vanishes to integrator accuracy for generalized solutions.
pub fn projection_deviation_h(
    sys: &HamiltonianSystem,
    a: &CandidateOneForm,
    q0: &[f64],
    dt: f64,
    steps: usize,
    cfg: &DiffConfig,
) -> Result<f64> {
    let n = sys.dof();
    let z0 = lift_point(a, q0)?;
    let base_rhs = |q: &[f64]| associated_field(sys, a, q, cfg);
    let base = integrate(base_rhs, q0, dt, steps, a.section.guard(), None);
    if let Some(k) = base.violation_step {
        return Err(HjtError::GuardViolationAtStep(k));
    }
    let full_rhs = hamiltonian_rhs(sys, *cfg);
    let full = integrate(full_rhs, &z0, dt, steps, sys.hamiltonian().guard(), None);
    if let Some(k) = full.violation_step {
        return Err(HjtError::GuardViolationAtStep(k));
    }
    let mut sup = 0.0_f64;
    for (qk, zk) in base.states.iter().zip(&full.states) {
        let ak = a.section.value(qk)?;
        for i in 0..n {
            sup = sup.max((qk[i] - zk[i]).abs());
            sup = sup.max((ak[i] - zk[n + i]).abs());
        }
    }
    Ok(sup)
}
