//! Geodesic-field checks on a Riemannian patch (ℝⁿ, g). A nonvanishing X is
//! a reparametrized geodesic field when ∇_X X = λX for some function λ, and
//! an exact geodesic field when additionally g(X,X) is constant, in which
//! case the unit version X̂ = X/√(g(X,X)) has closed metric dual d(X̂♭) = 0.
//! The report returned here carries both the autoparallel defect ∇_X X − λX
//! with λ = g(∇_X X, X)/g(X,X) and the closedness defects of X̂♭ and X♭.

use std::sync::Arc;

use crate::dual::{Real, D1, D2, D3};
use crate::error::{HjtError, Result};
use crate::field::{Guard, MapField, SectionField, SectionKind, VectorFn};
use crate::geometry::{exterior_derivative, jacobian, DiffConfig};
use crate::linalg::{dot, Lu, Mat};

/// Metric tensor as a field of row-major n×n component matrices.
#[derive(Clone)]
pub struct MetricField {
    n: usize,
    comps: MapField,
}

impl MetricField {
    pub fn new(n: usize, comps: MapField) -> Self {
        assert_eq!(comps.in_dim(), n, "metric components live over the base");
        assert_eq!(comps.out_dim(), n * n, "metric components form an n by n matrix");
        MetricField { n, comps }
    }

    pub fn euclidean(n: usize) -> Self {
        struct Flat(usize);
        impl crate::field::RealVecMap for Flat {
            fn apply<R: Real>(&self, _x: &[R]) -> Vec<R> {
                let n = self.0;
                let mut g = vec![R::zero(); n * n];
                for i in 0..n {
                    g[i * n + i] = R::one();
                }
                g
            }
        }
        MetricField {
            n,
            comps: MapField::new(n, n * n, Flat(n)),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn comps(&self) -> &MapField {
        &self.comps
    }

    pub fn guard(&self) -> &Guard {
        self.comps.guard()
    }

    /// Symmetrized component matrix at a point.
    pub fn at(&self, q: &[f64]) -> Result<Mat> {
        let raw = self.comps.value(q)?;
        let n = self.n;
        let mut g = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                g[(i, j)] = 0.5 * (raw[i * n + j] + raw[j * n + i]);
            }
        }
        Ok(g)
    }
}

/// Christoffel symbols Γ^k_ij as a flat n³ array indexed k*n*n + i*n + j:
/// Γ^k_ij = ½ g^{kl} (∂_i g_lj + ∂_j g_li − ∂_l g_ij).
pub fn christoffel(metric: &MetricField, q: &[f64], cfg: &DiffConfig) -> Result<Vec<f64>> {
    let n = metric.n;
    let g = metric.at(q)?;
    let lu = Lu::factor(&g)?;
    let jac = jacobian(&metric.comps, q, cfg)?;
    let dg = |l: usize, j: usize, i: usize| {
        0.5 * (jac[(l * n + j, i)] + jac[(j * n + l, i)])
    };
    let mut gamma = vec![0.0; n * n * n];
    for i in 0..n {
        for j in 0..n {
            let mut rhs = vec![0.0; n];
            for l in 0..n {
                rhs[l] = 0.5 * (dg(l, j, i) + dg(l, i, j) - dg(i, j, l));
            }
            let col = lu.solve(&rhs);
            for k in 0..n {
                gamma[k * n * n + i * n + j] = col[k];
            }
        }
    }
    Ok(gamma)
}

/// Covariant acceleration (∇_X X)^k = (J_X · X)^k + Γ^k_ij X^i X^j.
pub fn covariant_acceleration(
    metric: &MetricField,
    x_field: &SectionField,
    q: &[f64],
    cfg: &DiffConfig,
) -> Result<Vec<f64>> {
    assert_eq!(x_field.kind(), SectionKind::Vector);
    let n = metric.n;
    let xv = x_field.value(q)?;
    let jx = jacobian(x_field.as_map(), q, cfg)?;
    let gamma = christoffel(metric, q, cfg)?;
    let mut out = jx.matvec(&xv);
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                out[k] += gamma[k * n * n + i * n + j] * xv[i] * xv[j];
            }
        }
    }
    Ok(out)
}

/// Metric dual β = g·X of a vector field, optionally normalized so the
/// underlying vector has unit g-length. Evaluates through the dual tower so
/// exterior derivatives of β see exact component derivatives.
struct BetaComps {
    n: usize,
    g: Arc<dyn VectorFn>,
    x: Arc<dyn VectorFn>,
    unit: bool,
}

impl BetaComps {
    fn combine<R: Real>(&self, gv: Vec<R>, xv: Vec<R>) -> Vec<R> {
        let n = self.n;
        let mut beta = vec![R::zero(); n];
        for i in 0..n {
            let mut s = R::zero();
            for j in 0..n {
                s = s + R::from_f64(0.5) * (gv[i * n + j] + gv[j * n + i]) * xv[j];
            }
            beta[i] = s;
        }
        if self.unit {
            let mut norm2 = R::zero();
            for i in 0..n {
                norm2 = norm2 + beta[i] * xv[i];
            }
            let scale = norm2.sqrt().recip();
            for b in beta.iter_mut() {
                *b = *b * scale;
            }
        }
        beta
    }
}

impl VectorFn for BetaComps {
    fn eval0(&self, x: &[f64]) -> Vec<f64> {
        self.combine(self.g.eval0(x), self.x.eval0(x))
    }
    fn eval1(&self, x: &[D1]) -> Vec<D1> {
        self.combine(self.g.eval1(x), self.x.eval1(x))
    }
    fn eval2(&self, x: &[D2]) -> Vec<D2> {
        self.combine(self.g.eval2(x), self.x.eval2(x))
    }
    fn eval3(&self, x: &[D3]) -> Vec<D3> {
        self.combine(self.g.eval3(x), self.x.eval3(x))
    }
}

/// One-form section β = g·X (or its unit-normalized version).
pub fn metric_dual(metric: &MetricField, x_field: &SectionField, unit: bool) -> SectionField {
    assert_eq!(x_field.kind(), SectionKind::Vector);
    assert_eq!(metric.n, x_field.base_dim());
    let guard = crate::field::guard_and(metric.guard(), x_field.as_map().guard());
    SectionField::with_guard(
        metric.n,
        SectionKind::OneForm,
        BetaComps {
            n: metric.n,
            g: metric.comps.shared(),
            x: x_field.as_map().shared(),
            unit,
        },
        guard,
    )
}

#[derive(Debug, Clone)]
pub struct GeodeticReport {
    /// ∇_X X at the sample.
    pub nabla_xx: Vec<f64>,
    /// λ = g(∇_X X, X)/g(X,X).
    pub lambda: f64,
    /// ‖∇_X X − λX‖ in the Euclidean norm of components.
    pub nabla_residual: f64,
    /// max |d(X̂♭)| for the unit-normalized field.
    pub closedness_unit: f64,
    /// max |d(X♭)| for the raw field.
    pub closedness_raw: f64,
}

/// Evaluate the reparametrized-geodesic conditions for X at one point.
/// Errors with NullVector when g(X,X) is not positive there.
pub fn geodetic_solution_check(
    metric: &MetricField,
    x_field: &SectionField,
    q: &[f64],
    cfg: &DiffConfig,
) -> Result<GeodeticReport> {
    let g = metric.at(q)?;
    let xv = x_field.value(q)?;
    let gx = g.matvec(&xv);
    let norm2 = dot(&gx, &xv);
    if norm2 <= 0.0 {
        return Err(HjtError::NullVector);
    }
    let nabla_xx = covariant_acceleration(metric, x_field, q, cfg)?;
    let lambda = dot(&g.matvec(&nabla_xx), &xv) / norm2;
    let resid: f64 = nabla_xx
        .iter()
        .zip(&xv)
        .map(|(a, x)| (a - lambda * x) * (a - lambda * x))
        .sum::<f64>()
        .sqrt();
    let unit_dual = metric_dual(metric, x_field, true);
    let raw_dual = metric_dual(metric, x_field, false);
    let closedness_unit = exterior_derivative(&unit_dual, q, cfg)?.max_abs();
    let closedness_raw = exterior_derivative(&raw_dual, q, cfg)?.max_abs();
    Ok(GeodeticReport {
        nabla_xx,
        lambda,
        nabla_residual: resid,
        closedness_unit,
        closedness_raw,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{guard_from, RealVecMap};

    struct Radial;
    impl RealVecMap for Radial {
        fn apply<R: Real>(&self, q: &[R]) -> Vec<R> {
            let r = (q[0] * q[0] + q[1] * q[1]).sqrt();
            vec![q[0] / r, q[1] / r]
        }
    }

    struct Rotational;
    impl RealVecMap for Rotational {
        fn apply<R: Real>(&self, q: &[R]) -> Vec<R> {
            let r = (q[0] * q[0] + q[1] * q[1]).sqrt();
            vec![R::zero() - q[1] / r, q[0] / r]
        }
    }

    fn off_origin() -> Guard {
        guard_from(|q: &[f64]| q[0] * q[0] + q[1] * q[1] > 1e-12)
    }

    #[test]
    fn constant_field_is_geodesic_in_the_flat_metric() {
        let metric = MetricField::euclidean(2);
        let x = SectionField::new(
            2,
            SectionKind::Vector,
            crate::field::ConstantMap(vec![1.0, 0.0]),
        );
        let rep =
            geodetic_solution_check(&metric, &x, &[0.3, -0.7], &DiffConfig::default()).unwrap();
        assert!(rep.nabla_residual < 1e-12);
        assert!(rep.lambda.abs() < 1e-12);
        assert!(rep.closedness_unit < 1e-12);
        assert!(rep.closedness_raw < 1e-12);
    }

    #[test]
    fn radial_unit_field_is_geodesic_with_closed_dual() {
        let metric = MetricField::euclidean(2);
        let x = SectionField::with_guard(2, SectionKind::Vector, Radial, off_origin());
        let rep =
            geodetic_solution_check(&metric, &x, &[0.6, 0.8], &DiffConfig::default()).unwrap();
        assert!(rep.nabla_xx.iter().all(|a| a.abs() < 1e-10));
        assert!(rep.nabla_residual < 1e-10);
        // X♭ = dr is exact, so both duals are closed.
        assert!(rep.closedness_unit < 1e-10);
        assert!(rep.closedness_raw < 1e-10);
    }

    #[test]
    fn rotational_field_fails_the_autoparallel_condition() {
        let metric = MetricField::euclidean(2);
        let x = SectionField::with_guard(2, SectionKind::Vector, Rotational, off_origin());
        let q = [1.0, 0.0];
        let rep = geodetic_solution_check(&metric, &x, &q, &DiffConfig::default()).unwrap();
        // ∇_X X = −q̂ is orthogonal to X, so λ = 0 and the defect has norm 1.
        assert!(rep.lambda.abs() < 1e-10);
        assert!((rep.nabla_xx[0] + 1.0).abs() < 1e-10);
        assert!(rep.nabla_xx[1].abs() < 1e-10);
        assert!((rep.nabla_residual - 1.0).abs() < 1e-10);
    }

    #[test]
    fn polar_metric_reproduces_the_hand_christoffel_contraction() {
        struct PolarComps;
        impl RealVecMap for PolarComps {
            fn apply<R: Real>(&self, q: &[R]) -> Vec<R> {
                vec![R::one(), R::zero(), R::zero(), q[0] * q[0]]
            }
        }
        let metric = MetricField::new(
            2,
            MapField::with_guard(2, 4, PolarComps, guard_from(|q: &[f64]| q[0] > 1e-9)),
        );
        struct Angular;
        impl RealVecMap for Angular {
            fn apply<R: Real>(&self, q: &[R]) -> Vec<R> {
                vec![R::zero(), q[0].recip()]
            }
        }
        let x = SectionField::with_guard(
            2,
            SectionKind::Vector,
            Angular,
            guard_from(|q: &[f64]| q[0] > 1e-9),
        );
        let q = [2.0, 0.4];
        let acc =
            covariant_acceleration(&metric, &x, &q, &DiffConfig::default()).unwrap();
        // Γ^r_φφ = −r, X^φ = 1/r, so ∇_X X = (−1/r, 0).
        assert!((acc[0] + 0.5).abs() < 1e-10, "got {:?}", acc);
        assert!(acc[1].abs() < 1e-10);
    }

    #[test]
    fn null_vector_is_rejected() {
        struct LorentzComps;
        impl RealVecMap for LorentzComps {
            fn apply<R: Real>(&self, _q: &[R]) -> Vec<R> {
                vec![R::one(), R::zero(), R::zero(), R::zero() - R::one()]
            }
        }
        let metric = MetricField::new(2, MapField::new(2, 4, LorentzComps));
        let x = SectionField::new(
            2,
            SectionKind::Vector,
            crate::field::ConstantMap(vec![1.0, 1.0]),
        );
        let err = geodetic_solution_check(&metric, &x, &[0.0, 0.0], &DiffConfig::default())
            .unwrap_err();
        assert_eq!(err, HjtError::NullVector);
    }
}
