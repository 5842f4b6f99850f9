//! The Hamilton-Jacobi problem on the tangent bundle.
//!
//! A candidate is a vector field X: Q → TQ with components w(q). It solves
//! the generalized problem when TX ∘ X = Γ_L ∘ X, i.e. in coordinates
//!
//!   (∂wⁱ/∂qʲ) wʲ = aⁱ(q, w(q))                       (sode channel)
//!
//! or, without ever solving for the accelerations,
//!
//!   Wᵢⱼ (∂wʲ/∂qᵏ) wᵏ + (∂²L/∂vⁱ∂qʲ) wʲ − ∂L/∂qⁱ = 0   (oneform channel)
//!
//! with everything evaluated at v = w(q). The two channels are related by
//! the fiber Hessian: oneform = W · sode, which doubles as an internal
//! consistency check. The standard problem additionally demands a
//! Lagrangian image: X*ω_L = 0, and then d(E_L ∘ X) = 0 follows; both are
//! verified directly by pullback. For singular Lagrangians the sode channel
//! quotients the gauge freedom: only the component of the deviation outside
//! Ker W counts, and X*ω_L = 0 together with the agreement of the two
//! independent isotropy routes (pullback of ω_L versus −d(X*θ_L)) replaces
//! the regular standard checks.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::dual::{D1, D2, D3};
use crate::error::{HjtError, Result};
use crate::field::{MapField, SectionField, SectionKind, VectorFn};
use crate::geometry::{
    compose_scalar, exterior_derivative, grad, jacobian, pullback_oneform_section,
    pullback_twoform, DiffConfig, FormMatrix,
};
use crate::grid::{map_points, GridSpec};
use crate::linalg::{self, project_onto};

/// A named candidate vector field on Q with the parameter values baked in.
#[derive(Clone)]
pub struct CandidateVectorField {
    pub name: String,
    pub params: BTreeMap<String, f64>,
    pub section: SectionField,
}

impl CandidateVectorField {
    pub fn new(name: impl Into<String>, section: SectionField) -> Self {
        assert_eq!(section.kind(), SectionKind::Vector, "candidate must be a vector field");
        CandidateVectorField {
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

/// The graph map Φ: q ↦ (q, s(q)) of a section, as a map ℝⁿ → ℝ²ⁿ.
pub fn graph_map(section: &SectionField) -> MapField {
    struct Graph {
        s: Arc<dyn VectorFn>,
    }
    impl VectorFn for Graph {
        fn eval0(&self, x: &[f64]) -> Vec<f64> {
            let mut out = x.to_vec();
            out.extend(self.s.eval0(x));
            out
        }
        fn eval1(&self, x: &[D1]) -> Vec<D1> {
            let mut out = x.to_vec();
            out.extend(self.s.eval1(x));
            out
        }
        fn eval2(&self, x: &[D2]) -> Vec<D2> {
            let mut out = x.to_vec();
            out.extend(self.s.eval2(x));
            out
        }
        fn eval3(&self, x: &[D3]) -> Vec<D3> {
            let mut out = x.to_vec();
            out.extend(self.s.eval3(x));
            out
        }
    }
    let n = section.base_dim();
    MapField::with_guard(
        n,
        2 * n,
        Graph {
            s: section.as_map().shared(),
        },
        section.guard().clone(),
    )
}

/// Deviation of TX ∘ X from Γ_L ∘ X in the fiber directions.
pub struct SodeResidual {
    /// Gauge-reduced residual: for singular systems the component of the
    /// deviation outside Ker W, otherwise the full deviation.
    pub residual: Vec<f64>,
    /// The raw deviation (∂w/∂q)w − a before any kernel projection.
    pub full_deviation: Vec<f64>,
    /// Whether the force equation was singular at the sample.
    pub singular: bool,
}

/// Evaluate the sode channel at one base point.
pub fn sode_residual(
    sys: &crate::dynamics::LagrangianSystem,
    x: &CandidateVectorField,
    q: &[f64],
    cfg: &DiffConfig,
) -> Result<SodeResidual> {
    let n = sys.dof();
    let w = x.section.value(q)?;
    let mut state = q.to_vec();
    state.extend_from_slice(&w);
    sys.lagrangian().admit(&state)?;
    let sol = crate::dynamics::lagrangian_sode(sys, &state, cfg)?;
    let jw = jacobian(x.section.as_map(), q, cfg)?;
    let full: Vec<f64> = (0..n)
        .map(|i| {
            let conv: f64 = (0..n).map(|j| jw[(i, j)] * w[j]).sum();
            conv - sol.acceleration[i]
        })
        .collect();
    let residual = if sol.singular {
        let in_kernel = project_onto(&full, &sol.kernel);
        full.iter().zip(&in_kernel).map(|(d, k)| d - k).collect()
    } else {
        full.clone()
    };
    Ok(SodeResidual {
        residual,
        full_deviation: full,
        singular: sol.singular,
    })
}

/// Evaluate the oneform channel at one base point, without solving for the
/// accelerations: W·(∂w/∂q · w) + (∂²L/∂v∂q)·w − ∂L/∂q at v = w(q).
pub fn hj_oneform_residual(
    sys: &crate::dynamics::LagrangianSystem,
    x: &CandidateVectorField,
    q: &[f64],
    cfg: &DiffConfig,
) -> Result<Vec<f64>> {
    let n = sys.dof();
    let w = x.section.value(q)?;
    let mut state = q.to_vec();
    state.extend_from_slice(&w);
    sys.lagrangian().admit(&state)?;
    let (big_w, rhs) = crate::dynamics::force_equation(sys, &state, cfg)?;
    let jw = jacobian(x.section.as_map(), q, cfg)?;
    let conv: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| jw[(i, j)] * w[j]).sum())
        .collect();
    let wconv = big_w.matvec(&conv);
    Ok((0..n).map(|i| wconv[i] - rhs[i]).collect())
}

/// Largest discrepancy between the oneform channel and W times the sode
/// deviation; the two agree identically for any twice-differentiable L.
pub fn hessian_relation_check(
    sys: &crate::dynamics::LagrangianSystem,
    x: &CandidateVectorField,
    q: &[f64],
    cfg: &DiffConfig,
) -> Result<f64> {
    let oneform = hj_oneform_residual(sys, x, q, cfg)?;
    let sode = sode_residual(sys, x, q, cfg)?;
    let w = x.section.value(q)?;
    let mut state = q.to_vec();
    state.extend_from_slice(&w);
    let (big_w, _) = crate::dynamics::force_equation(sys, &state, cfg)?;
    let wd = big_w.matvec(&sode.full_deviation);
    Ok(oneform
        .iter()
        .zip(&wd)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// The standard-problem obstructions at one point.
pub struct StandardChecks {
    /// X*ω_L: must vanish for a Lagrangian image.
    pub pullback_omega: FormMatrix,
    /// d(E_L ∘ X): must vanish when the energy is constant on Im X.
    pub d_pullback_energy: Vec<f64>,
}

pub fn standard_checks(
    sys: &crate::dynamics::LagrangianSystem,
    x: &CandidateVectorField,
    q: &[f64],
    cfg: &DiffConfig,
) -> Result<StandardChecks> {
    let phi = graph_map(&x.section);
    let omega = crate::dynamics::cartan_omega_field(sys);
    let pullback_omega = pullback_twoform(&phi, &omega, q, cfg)?;
    let e = crate::dynamics::energy(sys);
    let e_on_image = compose_scalar(&e, &phi);
    let d_pullback_energy = grad(&e_on_image, q, cfg)?;
    Ok(StandardChecks {
        pullback_omega,
        d_pullback_energy,
    })
}

/// Agreement of the two independent isotropy routes: X*ω_L computed by
/// two-form pullback versus −d(X*θ_L) computed by differentiating the
/// pulled-back Cartan one-form. Requires a candidate whose section supports
/// second-order evaluation (closed-form candidates do).
pub fn isotropy_consistency(
    sys: &crate::dynamics::LagrangianSystem,
    x: &CandidateVectorField,
    q: &[f64],
    cfg: &DiffConfig,
) -> Result<f64> {
    let phi = graph_map(&x.section);
    let omega = crate::dynamics::cartan_omega_field(sys);
    let route_a = pullback_twoform(&phi, &omega, q, cfg)?;
    let theta = crate::dynamics::theta_section(sys);
    let pulled = pullback_oneform_section(&phi, &theta);
    let route_b = exterior_derivative(&pulled, q, cfg)?.scaled(-1.0);
    Ok(route_a.max_abs_diff(&route_b))
}

/// Verification mode: which channels gate the verdict.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VerifyMode {
    /// TX ∘ X = Γ_L ∘ X only.
    Generalized,
    /// Generalized plus Lagrangian image (X*ω_L = 0, d(E_L∘X) = 0).
    Standard,
    /// Gauge-aware variant for singular Lagrangians: oneform channel,
    /// isotropy, and the two-route isotropy agreement.
    SingularIsotropy,
}

impl VerifyMode {
    pub fn as_str(self) -> &'static str {
        match self {
            VerifyMode::Generalized => "generalized",
            VerifyMode::Standard => "standard",
            VerifyMode::SingularIsotropy => "singular-isotropy",
        }
    }
}

/// Extremum of one residual channel over the grid.
#[derive(Clone, Debug)]
pub struct ChannelStats {
    pub max: f64,
    pub argmax: Vec<f64>,
}

/// Residuals of one sample point, per channel (∞-norm reductions).
#[derive(Clone, Debug)]
pub struct SampleResiduals {
    pub point: Vec<f64>,
    pub channels: BTreeMap<String, f64>,
}

/// Grid verification report. `channels` gate the verdict; `diagnostics`
/// carry auxiliary magnitudes (gauge components, route agreements) that do
/// not.
#[derive(Clone, Debug)]
pub struct ResidualReport {
    pub mode: &'static str,
    pub tol: f64,
    pub samples: Vec<SampleResiduals>,
    pub channels: BTreeMap<String, ChannelStats>,
    pub diagnostics: BTreeMap<String, ChannelStats>,
    pub pass: bool,
}

impl ResidualReport {
    pub(crate) fn assemble(
        mode: &'static str,
        tol: f64,
        samples: Vec<SampleResiduals>,
        diagnostic_keys: &[&str],
    ) -> ResidualReport {
        let mut channels: BTreeMap<String, ChannelStats> = BTreeMap::new();
        let mut diagnostics: BTreeMap<String, ChannelStats> = BTreeMap::new();
        for s in &samples {
            for (k, &v) in &s.channels {
                let slot = if diagnostic_keys.contains(&k.as_str()) {
                    &mut diagnostics
                } else {
                    &mut channels
                };
                match slot.get_mut(k) {
                    Some(st) if v <= st.max => {}
                    _ => {
                        slot.insert(
                            k.clone(),
                            ChannelStats {
                                max: v,
                                argmax: s.point.clone(),
                            },
                        );
                    }
                }
            }
        }
        let pass = channels.values().all(|c| c.max <= tol);
        ResidualReport {
            mode,
            tol,
            samples,
            channels,
            diagnostics,
            pass,
        }
    }

    pub fn channel_max(&self, name: &str) -> f64 {
        self.channels
            .get(name)
            .or_else(|| self.diagnostics.get(name))
            .map(|c| c.max)
            .unwrap_or(f64::NAN)
    }
}

fn norm_inf(v: &[f64]) -> f64 {
    linalg::norm_inf(v)
}

/// Verify a candidate vector field over a lattice on Q.
///
/// Points are admitted when both the candidate's guard at q and the
/// Lagrangian's guard at (q, w(q)) hold; a lattice with no admitted point is
/// an error. `threads` splits the evaluation; the report is identical for
/// every thread count.
pub fn verify(
    sys: &crate::dynamics::LagrangianSystem,
    x: &CandidateVectorField,
    grid: &GridSpec,
    mode: VerifyMode,
    tol: f64,
    cfg: &DiffConfig,
    threads: usize,
) -> Result<ResidualReport> {
    assert_eq!(grid.dim(), sys.dof(), "grid must sample the configuration space");
    let candidate_pts = grid.guarded_points(x.section.guard())?;
    let results: Vec<Result<Option<SampleResiduals>>> =
        map_points(&candidate_pts, threads, |q| {
            let w = match x.section.value(q) {
                Ok(w) => w,
                Err(HjtError::GuardViolation) => return Ok(None),
                Err(e) => return Err(e),
            };
            let mut state = q.to_vec();
            state.extend_from_slice(&w);
            if sys.lagrangian().admit(&state).is_err() {
                return Ok(None);
            }
            let mut channels = BTreeMap::new();
            match mode {
                VerifyMode::Generalized | VerifyMode::Standard => {
                    let sode = sode_residual(sys, x, q, cfg)?;
                    channels.insert("sode".to_string(), norm_inf(&sode.residual));
                    if sode.singular {
                        channels.insert(
                            "sode_gauge_component".to_string(),
                            norm_inf(&sode.full_deviation),
                        );
                    }
                    let oneform = hj_oneform_residual(sys, x, q, cfg)?;
                    channels.insert("oneform".to_string(), norm_inf(&oneform));
                    if mode == VerifyMode::Standard {
                        let std = standard_checks(sys, x, q, cfg)?;
                        channels.insert(
                            "pullback_omega".to_string(),
                            std.pullback_omega.max_abs(),
                        );
                        channels.insert(
                            "d_pullback_energy".to_string(),
                            norm_inf(&std.d_pullback_energy),
                        );
                    }
                }
                VerifyMode::SingularIsotropy => {
                    let oneform = hj_oneform_residual(sys, x, q, cfg)?;
                    channels.insert("oneform".to_string(), norm_inf(&oneform));
                    let std = standard_checks(sys, x, q, cfg)?;
                    channels.insert("pullback_omega".to_string(), std.pullback_omega.max_abs());
                    channels.insert(
                        "isotropy_consistency".to_string(),
                        isotropy_consistency(sys, x, q, cfg)?,
                    );
                }
            }
            Ok(Some(SampleResiduals {
                point: q.to_vec(),
                channels,
            }))
        });
    let mut samples = Vec::new();
    for r in results {
        if let Some(s) = r? {
            samples.push(s);
        }
    }
    if samples.is_empty() {
        return Err(HjtError::EmptyGrid);
    }
    Ok(ResidualReport::assemble(
        mode.as_str(),
        tol,
        samples,
        &["sode_gauge_component"],
    ))
}

/// Sup-distance over t ∈ [0, dt·steps] between the Γ_L integral curve from
/// (q₀, w(q₀)) and the lift q ↦ (q, w(q)) of the X integral curve from q₀.
/// Solutions of the generalized problem make this vanish to integrator
/// accuracy: trajectories of the dynamics starting on Im X project onto
/// trajectories of X.
pub fn projection_deviation(
    sys: &crate::dynamics::LagrangianSystem,
    x: &CandidateVectorField,
    q0: &[f64],
    dt: f64,
    steps: usize,
    cfg: &DiffConfig,
) -> Result<f64> {
    let n = sys.dof();
    let w0 = x.section.value(q0)?;
    let mut state0 = q0.to_vec();
    state0.extend_from_slice(&w0);

    let base_rhs = |q: &[f64]| x.section.value(q);
    let base = crate::dynamics::integrate(
        base_rhs,
        q0,
        dt,
        steps,
        x.section.guard(),
        None,
    );
    if let Some(k) = base.violation_step {
        return Err(HjtError::GuardViolationAtStep(k));
    }
    let full_rhs = crate::dynamics::sode_rhs(sys, *cfg);
    let full = crate::dynamics::integrate(
        full_rhs,
        &state0,
        dt,
        steps,
        sys.lagrangian().guard(),
        None,
    );
    if let Some(k) = full.violation_step {
        return Err(HjtError::GuardViolationAtStep(k));
    }
    let mut sup = 0.0_f64;
    for (qk, xk) in base.states.iter().zip(&full.states) {
        let wk = x.section.value(qk)?;
        for i in 0..n {
            sup = sup.max((qk[i] - xk[i]).abs());
            sup = sup.max((wk[i] - xk[n + i]).abs());
        }
    }
    Ok(sup)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dual::Real;
    use crate::field::{guard_from, RealMap, RealVecMap, ScalarField};
    use crate::grid::AxisSpec;

    struct FreeL;
    impl RealMap for FreeL {
        fn apply<R: Real>(&self, x: &[R]) -> R {
            R::from_f64(0.5) * (x[2] * x[2] + x[3] * x[3])
        }
    }

    fn free() -> crate::dynamics::LagrangianSystem {
        crate::dynamics::LagrangianSystem::new(2, ScalarField::new(4, FreeL))
    }

    /// X = k ∂/∂q¹ + ((k q² − l)/q¹) ∂/∂q², defined off q¹ = 0.
    struct RatField {
        k: f64,
        l: f64,
    }
    impl RealVecMap for RatField {
        fn apply<R: Real>(&self, x: &[R]) -> Vec<R> {
            let k = R::from_f64(self.k);
            let l = R::from_f64(self.l);
            vec![k, (k * x[1] - l) / x[0]]
        }
    }

    fn rat_candidate(k: f64, l: f64) -> CandidateVectorField {
        let section = SectionField::with_guard(
            2,
            SectionKind::Vector,
            RatField { k, l },
            guard_from(|q| q[0].abs() > 1e-6),
        );
        CandidateVectorField::new("rat", section)
    }

    #[test]
    fn rational_family_solves_the_generalized_problem() {
        let sys = free();
        let x = rat_candidate(1.0, 0.5);
        for q in [[1.0, 1.0], [0.7, -0.4], [-1.3, 2.0]] {
            let s = sode_residual(&sys, &x, &q, &DiffConfig::default()).unwrap();
            assert!(norm_inf(&s.residual) < 1e-12, "sode at {q:?}");
            let o = hj_oneform_residual(&sys, &x, &q, &DiffConfig::default()).unwrap();
            assert!(norm_inf(&o) < 1e-12, "oneform at {q:?}");
        }
    }

    #[test]
    fn rational_family_fails_the_standard_problem_with_known_pullback() {
        let sys = free();
        let (k, l) = (1.0, 0.25);
        let x = rat_candidate(k, l);
        // Point with q¹ ≠ 1 so the squared denominator is exercised.
        let q = [2.0, 1.5];
        let std = standard_checks(&sys, &x, &q, &DiffConfig::default()).unwrap();
        // X*ω_L = dq²∧dw² = ((k q² − l)/(q¹)²) dq¹∧dq².
        let expect = (k * q[1] - l) / (q[0] * q[0]);
        assert!((std.pullback_omega.entry(0, 1) - expect).abs() < 1e-12);
        // E_L ∘ X = ½(k² + ((kq²−l)/q¹)²) is genuinely non-constant.
        assert!(norm_inf(&std.d_pullback_energy) > 0.1);
    }

    #[test]
    fn constant_fields_pass_the_standard_problem() {
        let sys = free();
        let section = SectionField::new(2, SectionKind::Vector, crate::field::ConstantMap(vec![0.4, -1.1]));
        let x = CandidateVectorField::new("const", section);
        let grid = GridSpec::cube(2, -2.0, 2.0, 5);
        let report = verify(
            &sys,
            &x,
            &grid,
            VerifyMode::Standard,
            1e-10,
            &DiffConfig::default(),
            1,
        )
        .unwrap();
        assert!(report.pass, "channels: {:?}", report.channels);
        assert!(report.channel_max("pullback_omega") < 1e-14);
        assert!(report.channel_max("d_pullback_energy") < 1e-14);
        assert!(report.channel_max("sode") < 1e-14);
    }

    #[test]
    fn verify_reports_fail_with_argmax_for_non_solutions() {
        let sys = free();
        // w = (q², q¹) is not a solution of the free dynamics.
        struct Swap;
        impl RealVecMap for Swap {
            fn apply<R: Real>(&self, x: &[R]) -> Vec<R> {
                vec![x[1], x[0]]
            }
        }
        let x = CandidateVectorField::new(
            "swap",
            SectionField::new(2, SectionKind::Vector, Swap),
        );
        let grid = GridSpec::cube(2, 0.5, 1.5, 3);
        let report = verify(
            &sys,
            &x,
            &grid,
            VerifyMode::Generalized,
            1e-8,
            &DiffConfig::default(),
            1,
        )
        .unwrap();
        assert!(!report.pass);
        let st = &report.channels["sode"];
        assert!(st.max > 0.1);
        assert_eq!(st.argmax.len(), 2);
    }

    #[test]
    fn hessian_relation_ties_the_two_channels() {
        let sys = free();
        let x = rat_candidate(0.8, -0.3);
        for q in [[1.1, 0.2], [-0.6, 0.9]] {
            let gap = hessian_relation_check(&sys, &x, &q, &DiffConfig::default()).unwrap();
            assert!(gap < 1e-12);
        }
        // Also for a non-solution, where both residuals are large but still tied.
        struct Swap;
        impl RealVecMap for Swap {
            fn apply<R: Real>(&self, x: &[R]) -> Vec<R> {
                vec![x[1] * x[1], x[0]]
            }
        }
        let bad = CandidateVectorField::new(
            "swap",
            SectionField::new(2, SectionKind::Vector, Swap),
        );
        let gap = hessian_relation_check(&sys, &bad, &[1.2, 0.4], &DiffConfig::default()).unwrap();
        assert!(gap < 1e-12);
    }

    #[test]
    fn isotropy_routes_agree() {
        let sys = free();
        let x = rat_candidate(1.0, 0.5);
        let v = isotropy_consistency(&sys, &x, &[0.9, -0.7], &DiffConfig::default()).unwrap();
        assert!(v < 1e-10, "route disagreement {v}");
    }

    #[test]
    fn empty_guarded_grid_is_an_error() {
        let sys = free();
        let x = rat_candidate(1.0, 0.0);
        // Lattice sitting entirely on the excluded line q¹ = 0.
        let grid = GridSpec::new(vec![AxisSpec::new(0.0, 0.0, 1), AxisSpec::new(-1.0, 1.0, 5)]);
        assert_eq!(
            verify(
                &sys,
                &x,
                &grid,
                VerifyMode::Generalized,
                1e-8,
                &DiffConfig::default(),
                1
            )
            .err(),
            Some(HjtError::EmptyGrid)
        );
    }

    #[test]
    fn projection_property_for_a_generalized_solution() {
        let sys = free();
        let x = rat_candidate(1.0, 0.5);
        let sup = projection_deviation(&sys, &x, &[1.0, 1.0], 1e-3, 1000, &DiffConfig::default())
            .unwrap();
        assert!(sup < 1e-9, "sup distance {sup}");
    }

    #[test]
    fn reports_are_thread_count_independent() {
        let sys = free();
        let x = rat_candidate(0.9, 0.1);
        let grid = GridSpec::cube(2, 0.3, 1.8, 6);
        let a = verify(&sys, &x, &grid, VerifyMode::Standard, 1e-8, &DiffConfig::default(), 1)
            .unwrap();
        let b = verify(&sys, &x, &grid, VerifyMode::Standard, 1e-8, &DiffConfig::default(), 4)
            .unwrap();
        assert_eq!(a.samples.len(), b.samples.len());
        for (sa, sb) in a.samples.iter().zip(&b.samples) {
            assert_eq!(sa.point, sb.point);
            for (k, v) in &sa.channels {
                assert_eq!(sb.channels[k].to_bits(), v.to_bits(), "channel {k}");
            }
        }
    }
}
