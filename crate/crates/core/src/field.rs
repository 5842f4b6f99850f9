//! Type-erased scalar and vector fields evaluable at dual-number points.
//!
//! Concrete fields are written once, generically over [`Real`], by
//! implementing [`RealMap`] or [`RealVecMap`]; blanket impls then provide
//! evaluation at plain floats and at first-, second- and third-order dual
//! points behind the object-safe [`ScalarFn`] / [`VectorFn`] traits. Derived
//! fields (gradient sections, pullbacks) implement the object-safe traits
//! directly for the orders they can support.
//!
//! Domain guards are explicit predicates on the primal point: `sqrt`, `log`
//! and quotients never see out-of-domain arguments, they are fenced before
//! evaluation.

use std::sync::Arc;

use crate::dual::{Real, D1, D2, D3};
use crate::error::{HjtError, Result};

/// A scalar function written generically over the scalar type.
pub trait RealMap: Send + Sync {
    fn apply<R: Real>(&self, x: &[R]) -> R;
}

/// A vector-valued function written generically over the scalar type.
pub trait RealVecMap: Send + Sync {
    fn apply<R: Real>(&self, x: &[R]) -> Vec<R>;
}

/// Object-safe scalar evaluation at each supported differentiation order.
pub trait ScalarFn: Send + Sync {
    fn eval0(&self, x: &[f64]) -> f64;
    fn eval1(&self, x: &[D1]) -> D1;
    fn eval2(&self, x: &[D2]) -> D2;
    fn eval3(&self, x: &[D3]) -> D3;
}

/// Object-safe vector evaluation at each supported differentiation order.
pub trait VectorFn: Send + Sync {
    fn eval0(&self, x: &[f64]) -> Vec<f64>;
    fn eval1(&self, x: &[D1]) -> Vec<D1>;
    fn eval2(&self, x: &[D2]) -> Vec<D2>;
    fn eval3(&self, x: &[D3]) -> Vec<D3>;
}

impl<T: RealMap> ScalarFn for T {
    fn eval0(&self, x: &[f64]) -> f64 {
        self.apply(x)
    }
    fn eval1(&self, x: &[D1]) -> D1 {
        self.apply(x)
    }
    fn eval2(&self, x: &[D2]) -> D2 {
        self.apply(x)
    }
    fn eval3(&self, x: &[D3]) -> D3 {
        self.apply(x)
    }
}

impl<T: RealVecMap> VectorFn for T {
    fn eval0(&self, x: &[f64]) -> Vec<f64> {
        self.apply(x)
    }
    fn eval1(&self, x: &[D1]) -> Vec<D1> {
        self.apply(x)
    }
    fn eval2(&self, x: &[D2]) -> Vec<D2> {
        self.apply(x)
    }
    fn eval3(&self, x: &[D3]) -> Vec<D3> {
        self.apply(x)
    }
}

/// Domain predicate on primal points.
pub type Guard = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;

/// Guard accepting every point.
pub fn guard_all() -> Guard {
    Arc::new(|_| true)
}

pub fn guard_from(f: impl Fn(&[f64]) -> bool + Send + Sync + 'static) -> Guard {
    Arc::new(f)
}

/// Intersection of two guards.
pub fn guard_and(a: &Guard, b: &Guard) -> Guard {
    let a = a.clone();
    let b = b.clone();
    Arc::new(move |x| a(x) && b(x))
}

/// A real-valued field on a guarded open subset of ℝᵐ.
#[derive(Clone)]
pub struct ScalarField {
    arity: usize,
    f: Arc<dyn ScalarFn>,
    guard: Guard,
}

impl ScalarField {
    pub fn new(arity: usize, f: impl ScalarFn + 'static) -> Self {
        ScalarField {
            arity,
            f: Arc::new(f),
            guard: guard_all(),
        }
    }

    pub fn with_guard(arity: usize, f: impl ScalarFn + 'static, guard: Guard) -> Self {
        ScalarField {
            arity,
            f: Arc::new(f),
            guard,
        }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn guard(&self) -> &Guard {
        &self.guard
    }

    /// Check dimension and guard for a primal point.
    pub fn admit(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.arity {
            return Err(HjtError::DimensionMismatch {
                expected: self.arity,
                got: x.len(),
            });
        }
        if !(self.guard)(x) {
            return Err(HjtError::GuardViolation);
        }
        Ok(())
    }

    /// Guarded evaluation with a finiteness check.
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.admit(x)?;
        let v = self.f.eval0(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(HjtError::NonFinite)
        }
    }

    /// Unguarded evaluation entry points used by differentiation kernels,
    /// which check the guard once at the primal point.
    pub fn raw(&self) -> &dyn ScalarFn {
        self.f.as_ref()
    }

    pub fn shared(&self) -> Arc<dyn ScalarFn> {
        self.f.clone()
    }
}

/// Whether a section assigns tangent vectors or covectors.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SectionKind {
    Vector,
    OneForm,
}

/// A smooth map ℝⁿ → ℝᵐ on a guarded open subset.
#[derive(Clone)]
pub struct MapField {
    in_dim: usize,
    out_dim: usize,
    f: Arc<dyn VectorFn>,
    guard: Guard,
}

impl MapField {
    pub fn new(in_dim: usize, out_dim: usize, f: impl VectorFn + 'static) -> Self {
        MapField {
            in_dim,
            out_dim,
            f: Arc::new(f),
            guard: guard_all(),
        }
    }

    pub fn with_guard(
        in_dim: usize,
        out_dim: usize,
        f: impl VectorFn + 'static,
        guard: Guard,
    ) -> Self {
        MapField {
            in_dim,
            out_dim,
            f: Arc::new(f),
            guard,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn guard(&self) -> &Guard {
        &self.guard
    }

    pub fn admit(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.in_dim {
            return Err(HjtError::DimensionMismatch {
                expected: self.in_dim,
                got: x.len(),
            });
        }
        if !(self.guard)(x) {
            return Err(HjtError::GuardViolation);
        }
        Ok(())
    }

    pub fn value(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.admit(x)?;
        let v = self.f.eval0(x);
        if v.len() != self.out_dim {
            return Err(HjtError::DimensionMismatch {
                expected: self.out_dim,
                got: v.len(),
            });
        }
        if v.iter().all(|c| c.is_finite()) {
            Ok(v)
        } else {
            Err(HjtError::NonFinite)
        }
    }

    pub fn raw(&self) -> &dyn VectorFn {
        self.f.as_ref()
    }

    pub fn shared(&self) -> Arc<dyn VectorFn> {
        self.f.clone()
    }
}

/// A vector field or one-form on a guarded open subset of ℝⁿ: `n`
/// components over an `n`-dimensional base.
#[derive(Clone)]
pub struct SectionField {
    map: MapField,
    kind: SectionKind,
}

impl SectionField {
    pub fn new(base_dim: usize, kind: SectionKind, f: impl VectorFn + 'static) -> Self {
        SectionField {
            map: MapField::new(base_dim, base_dim, f),
            kind,
        }
    }

    pub fn with_guard(
        base_dim: usize,
        kind: SectionKind,
        f: impl VectorFn + 'static,
        guard: Guard,
    ) -> Self {
        SectionField {
            map: MapField::with_guard(base_dim, base_dim, f, guard),
            kind,
        }
    }

    pub fn base_dim(&self) -> usize {
        self.map.in_dim()
    }

    pub fn kind(&self) -> SectionKind {
        self.kind
    }

    pub fn guard(&self) -> &Guard {
        self.map.guard()
    }

    pub fn admit(&self, x: &[f64]) -> Result<()> {
        self.map.admit(x)
    }

    pub fn value(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.map.value(x)
    }

    pub fn as_map(&self) -> &MapField {
        &self.map
    }
}

/// Constant vector value as a field.
pub struct ConstantMap(pub Vec<f64>);

impl RealVecMap for ConstantMap {
    fn apply<R: Real>(&self, _x: &[R]) -> Vec<R> {
        self.0.iter().map(|&c| R::from_f64(c)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Rosen;
    impl RealMap for Rosen {
        fn apply<R: Real>(&self, x: &[R]) -> R {
            let one = R::one();
            let a = one - x[0];
            let b = x[1] - x[0] * x[0];
            a * a + R::from_f64(100.0) * b * b
        }
    }

    #[test]
    fn scalar_field_evaluates_and_guards() {
        let f = ScalarField::with_guard(2, Rosen, guard_from(|x| x[0] > 0.0));
        assert!((f.value(&[1.0, 1.0]).unwrap()).abs() < 1e-15);
        assert_eq!(f.value(&[-1.0, 1.0]), Err(HjtError::GuardViolation));
        assert_eq!(
            f.value(&[1.0]),
            Err(HjtError::DimensionMismatch {
                expected: 2,
                got: 1
            })
        );
    }

    struct InvNorm;
    impl RealMap for InvNorm {
        fn apply<R: Real>(&self, x: &[R]) -> R {
            (x[0] * x[0] + x[1] * x[1]).sqrt().recip()
        }
    }

    #[test]
    fn non_finite_values_are_reported() {
        let f = ScalarField::new(2, InvNorm);
        assert_eq!(f.value(&[0.0, 0.0]), Err(HjtError::NonFinite));
    }

    #[test]
    fn constant_map_lifts_to_duals() {
        let c = ConstantMap(vec![2.0, -1.0]);
        let at_dual = c.eval1(&[D1 { re: 0.0, im: 1.0 }]);
        assert_eq!(at_dual[0].re, 2.0);
        assert_eq!(at_dual[0].im, 0.0);
    }
}
