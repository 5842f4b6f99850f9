//! Differential-geometric kernel: derivatives, differential forms, pullbacks.
//!
//! Two independent differentiation paths are kept side by side. The default
//! path propagates dual numbers and is exact to machine precision for the
//! closed-form fields in this crate; the central-difference path exists as a
//! cross-check oracle (step 1e-6, optional Richardson extrapolation). Tests
//! hold the two against each other.
//!
//! Conventions, fixed once here and relied on everywhere:
//! * the Jacobian of φ has J[(r,c)] = ∂φʳ/∂xᶜ;
//! * a two-form is the antisymmetric matrix F with ω(u,v) = uᵀFv, so the
//!   coefficient of dxʲ∧dxⁱ (j < i) sits at F[(j,i)];
//! * dβ has entries ∂ⱼβᵢ − ∂ᵢβⱼ at (j,i);
//! * the interior product (i_vω)ᵢ = vʲωⱼᵢ.

use std::sync::Arc;

use crate::dual::{seed, Real, D1, D2};
use crate::error::{HjtError, Result};
use crate::field::{Guard, MapField, ScalarField, ScalarFn, SectionField, SectionKind, VectorFn};
use crate::linalg::Mat;

/// Which differentiation kernel to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiffMode {
    /// Forward-mode dual numbers (exact for the fields in this crate).
    Dual,
    /// Central finite differences (truncation-limited oracle).
    Central,
}

/// Differentiation settings.
#[derive(Clone, Copy, Debug)]
pub struct DiffConfig {
    pub mode: DiffMode,
    /// First-derivative step for the central kernel.
    pub step: f64,
    /// Richardson-extrapolate central first derivatives (h and h/2).
    pub richardson: bool,
}

impl Default for DiffConfig {
    fn default() -> Self {
        DiffConfig {
            mode: DiffMode::Dual,
            step: 1e-6,
            richardson: false,
        }
    }
}

impl DiffConfig {
    pub fn central() -> Self {
        DiffConfig {
            mode: DiffMode::Central,
            ..Default::default()
        }
    }
}

fn ensure_finite_vec(v: Vec<f64>) -> Result<Vec<f64>> {
    if v.iter().all(|c| c.is_finite()) {
        Ok(v)
    } else {
        Err(HjtError::NonFinite)
    }
}

// ---------------------------------------------------------------------------
// Dual-mode inner kernels, one per tower level. These skip guard checks; the
// public entry points check the guard once at the primal point.
// ---------------------------------------------------------------------------

pub(crate) fn grad0(f: &dyn ScalarFn, x: &[f64]) -> Vec<f64> {
    (0..x.len()).map(|i| f.eval1(&seed(x, i)).im).collect()
}

pub(crate) fn grad1(f: &dyn ScalarFn, x: &[D1]) -> Vec<D1> {
    (0..x.len()).map(|i| f.eval2(&seed(x, i)).im).collect()
}

pub(crate) fn grad2(f: &dyn ScalarFn, x: &[D2]) -> Vec<D2> {
    (0..x.len()).map(|i| f.eval3(&seed(x, i)).im).collect()
}

pub(crate) fn jac0(f: &dyn VectorFn, x: &[f64], out_dim: usize) -> Mat {
    let mut j = Mat::zeros(out_dim, x.len());
    for c in 0..x.len() {
        let col = f.eval1(&seed(x, c));
        for r in 0..out_dim {
            j[(r, c)] = col[r].im;
        }
    }
    j
}

pub(crate) fn jac1(f: &dyn VectorFn, x: &[D1], out_dim: usize) -> Vec<Vec<D1>> {
    let mut j = vec![vec![D1::from_f64(0.0); x.len()]; out_dim];
    for c in 0..x.len() {
        let col = f.eval2(&seed(x, c));
        for r in 0..out_dim {
            j[r][c] = col[r].im;
        }
    }
    j
}

// ---------------------------------------------------------------------------
// Central-difference kernels.
// ---------------------------------------------------------------------------

fn central_grad_step(f: &dyn ScalarFn, x: &[f64], h: f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            let xi = x[i];
            xp[i] = xi + h;
            let fp = f.eval0(&xp);
            xp[i] = xi - h;
            let fm = f.eval0(&xp);
            xp[i] = xi;
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

fn central_grad(f: &dyn ScalarFn, x: &[f64], cfg: &DiffConfig) -> Vec<f64> {
    let d = central_grad_step(f, x, cfg.step);
    if !cfg.richardson {
        return d;
    }
    let d2 = central_grad_step(f, x, cfg.step / 2.0);
    d.iter()
        .zip(&d2)
        .map(|(c, c2)| (4.0 * c2 - c) / 3.0)
        .collect()
}

fn central_jac_step(f: &dyn VectorFn, x: &[f64], out_dim: usize, h: f64) -> Mat {
    let mut j = Mat::zeros(out_dim, x.len());
    let mut xp = x.to_vec();
    for c in 0..x.len() {
        let xc = x[c];
        xp[c] = xc + h;
        let fp = f.eval0(&xp);
        xp[c] = xc - h;
        let fm = f.eval0(&xp);
        xp[c] = xc;
        for r in 0..out_dim {
            j[(r, c)] = (fp[r] - fm[r]) / (2.0 * h);
        }
    }
    j
}

fn central_jac(f: &dyn VectorFn, x: &[f64], out_dim: usize, cfg: &DiffConfig) -> Mat {
    let j = central_jac_step(f, x, out_dim, cfg.step);
    if !cfg.richardson {
        return j;
    }
    let j2 = central_jac_step(f, x, out_dim, cfg.step / 2.0);
    let mut out = Mat::zeros(out_dim, x.len());
    for r in 0..out_dim {
        for c in 0..x.len() {
            out[(r, c)] = (4.0 * j2[(r, c)] - j[(r, c)]) / 3.0;
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Public derivative operations.
// ---------------------------------------------------------------------------

/// Gradient of a scalar field at a guarded point.
pub fn grad(f: &ScalarField, x: &[f64], cfg: &DiffConfig) -> Result<Vec<f64>> {
    f.admit(x)?;
    let g = match cfg.mode {
        DiffMode::Dual => grad0(f.raw(), x),
        DiffMode::Central => central_grad(f.raw(), x, cfg),
    };
    ensure_finite_vec(g)
}

/// Hessian with its raw asymmetry diagnostic. Every ordered pair (i,j) is
/// computed independently; the returned matrix is the symmetrization
/// (M + Mᵀ)/2 and `raw_asymmetry` is max|Mᵢⱼ − Mⱼᵢ| before symmetrizing,
/// which doubles as a smoothness check on the field.
pub struct Hessian {
    pub matrix: Mat,
    pub raw_asymmetry: f64,
}

pub fn hessian(f: &ScalarField, x: &[f64], cfg: &DiffConfig) -> Result<Hessian> {
    f.admit(x)?;
    let m = x.len();
    let mut raw = Mat::zeros(m, m);
    match cfg.mode {
        DiffMode::Dual => {
            for i in 0..m {
                for j in 0..m {
                    raw[(i, j)] = f.raw().eval2(&crate::dual::seed2(x, i, j)).im.im;
                }
            }
        }
        DiffMode::Central => {
            // Second differences need a larger step than first differences
            // before roundoff dominates.
            let h = cfg.step.max(1e-4);
            let mut xp = x.to_vec();
            let f0 = f.raw().eval0(x);
            for i in 0..m {
                for j in 0..m {
                    if i == j {
                        let xi = x[i];
                        xp[i] = xi + h;
                        let fp = f.raw().eval0(&xp);
                        xp[i] = xi - h;
                        let fm = f.raw().eval0(&xp);
                        xp[i] = xi;
                        raw[(i, i)] = (fp - 2.0 * f0 + fm) / (h * h);
                    } else {
                        let (xi, xj) = (x[i], x[j]);
                        xp[i] = xi + h;
                        xp[j] = xj + h;
                        let fpp = f.raw().eval0(&xp);
                        xp[j] = xj - h;
                        let fpm = f.raw().eval0(&xp);
                        xp[i] = xi - h;
                        xp[j] = xj + h;
                        let fmp = f.raw().eval0(&xp);
                        xp[j] = xj - h;
                        let fmm = f.raw().eval0(&xp);
                        xp[i] = xi;
                        xp[j] = xj;
                        raw[(i, j)] = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
                    }
                }
            }
        }
    }
    if !raw.is_finite() {
        return Err(HjtError::NonFinite);
    }
    let mut asym = 0.0_f64;
    let mut sym = Mat::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            asym = asym.max((raw[(i, j)] - raw[(j, i)]).abs());
            sym[(i, j)] = 0.5 * (raw[(i, j)] + raw[(j, i)]);
        }
    }
    Ok(Hessian {
        matrix: sym,
        raw_asymmetry: asym,
    })
}

/// Jacobian of a map at a guarded point, J[(r,c)] = ∂φʳ/∂xᶜ.
pub fn jacobian(phi: &MapField, x: &[f64], cfg: &DiffConfig) -> Result<Mat> {
    phi.admit(x)?;
    let j = match cfg.mode {
        DiffMode::Dual => jac0(phi.raw(), x, phi.out_dim()),
        DiffMode::Central => central_jac(phi.raw(), x, phi.out_dim(), cfg),
    };
    if j.is_finite() {
        Ok(j)
    } else {
        Err(HjtError::NonFinite)
    }
}

// ---------------------------------------------------------------------------
// Differential forms.
// ---------------------------------------------------------------------------

/// Antisymmetric coefficient matrix of a two-form, exact by construction:
/// the strict upper triangle is stored and mirrored with a sign.
#[derive(Clone, Debug)]
pub struct FormMatrix {
    dim: usize,
    mat: Mat,
}

impl FormMatrix {
    /// Build from the strict upper triangle: `f(j, i)` for j < i is the
    /// coefficient of dxʲ∧dxⁱ.
    pub fn from_upper(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut mat = Mat::zeros(dim, dim);
        for j in 0..dim {
            for i in j + 1..dim {
                let v = f(j, i);
                mat[(j, i)] = v;
                mat[(i, j)] = -v;
            }
        }
        FormMatrix { dim, mat }
    }

    pub fn zeros(dim: usize) -> Self {
        FormMatrix {
            dim,
            mat: Mat::zeros(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, j: usize, i: usize) -> f64 {
        self.mat[(j, i)]
    }

    pub fn as_mat(&self) -> &Mat {
        &self.mat
    }

    /// ω(u, v) = uᵀ F v.
    pub fn apply(&self, u: &[f64], v: &[f64]) -> f64 {
        let fv = self.mat.matvec(v);
        u.iter().zip(&fv).map(|(a, b)| a * b).sum()
    }

    /// Interior product: (i_vω)ᵢ = vʲ ωⱼᵢ.
    pub fn interior(&self, v: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| v[j] * self.mat[(j, i)]).sum())
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.mat.max_abs()
    }

    pub fn scaled(&self, s: f64) -> FormMatrix {
        FormMatrix::from_upper(self.dim, |j, i| s * self.mat[(j, i)])
    }

    /// Entrywise difference, largest magnitude.
    pub fn max_abs_diff(&self, other: &FormMatrix) -> f64 {
        assert_eq!(self.dim, other.dim, "form dimension mismatch");
        let mut m = 0.0_f64;
        for j in 0..self.dim {
            for i in 0..self.dim {
                m = m.max((self.mat[(j, i)] - other.mat[(j, i)]).abs());
            }
        }
        m
    }
}

/// Interior product of a vector with a two-form.
pub fn interior_product(v: &[f64], omega: &FormMatrix) -> Vec<f64> {
    omega.interior(v)
}

/// Exterior derivative of a one-form at a point:
/// (dβ)ⱼᵢ = ∂ⱼβᵢ − ∂ᵢβⱼ.
pub fn exterior_derivative(beta: &SectionField, x: &[f64], cfg: &DiffConfig) -> Result<FormMatrix> {
    assert_eq!(
        beta.kind(),
        SectionKind::OneForm,
        "exterior derivative acts on one-form sections"
    );
    beta.admit(x)?;
    let n = beta.base_dim();
    let j = match cfg.mode {
        DiffMode::Dual => jac0(beta.as_map().raw(), x, n),
        DiffMode::Central => central_jac(beta.as_map().raw(), x, n, cfg),
    };
    if !j.is_finite() {
        return Err(HjtError::NonFinite);
    }
    Ok(FormMatrix::from_upper(n, |a, b| j[(b, a)] - j[(a, b)]))
}

/// Pullback of a one-form along φ: (φ*β)ⱼ = βₖ(φ(x)) ∂φᵏ/∂xʲ.
pub fn pullback_oneform(
    phi: &MapField,
    beta: &SectionField,
    x: &[f64],
    cfg: &DiffConfig,
) -> Result<Vec<f64>> {
    if beta.base_dim() != phi.out_dim() {
        return Err(HjtError::DimensionMismatch {
            expected: phi.out_dim(),
            got: beta.base_dim(),
        });
    }
    let y = phi.value(x)?;
    let b = beta.value(&y)?;
    let j = jacobian(phi, x, cfg)?;
    let n = phi.in_dim();
    let out = (0..n)
        .map(|c| (0..phi.out_dim()).map(|r| b[r] * j[(r, c)]).sum())
        .collect();
    ensure_finite_vec(out)
}

/// A two-form field: coefficients of dxᵃ∧dxᵇ (a < b, lexicographic pair
/// order) as a smooth map, so the field itself can be differentiated.
#[derive(Clone)]
pub struct TwoFormField {
    dim: usize,
    comps: Arc<dyn VectorFn>,
    guard: Guard,
}

/// Index of the pair (a, b), a < b, in lexicographic order.
pub fn pair_index(dim: usize, a: usize, b: usize) -> usize {
    debug_assert!(a < b && b < dim);
    a * dim - a * (a + 1) / 2 + (b - a - 1)
}

impl TwoFormField {
    pub fn new(dim: usize, comps: impl VectorFn + 'static, guard: Guard) -> Self {
        TwoFormField {
            dim,
            comps: Arc::new(comps),
            guard,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn admit(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(HjtError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        if !(self.guard)(x) {
            return Err(HjtError::GuardViolation);
        }
        Ok(())
    }

    /// Coefficient matrix at a point.
    pub fn at(&self, x: &[f64]) -> Result<FormMatrix> {
        self.admit(x)?;
        let vals = self.comps.eval0(x);
        if !vals.iter().all(|v| v.is_finite()) {
            return Err(HjtError::NonFinite);
        }
        Ok(FormMatrix::from_upper(self.dim, |a, b| {
            vals[pair_index(self.dim, a, b)]
        }))
    }

    /// Largest coefficient of the exterior derivative (a three-form):
    /// (dω)ⱼₖₗ = ∂ⱼωₖₗ − ∂ₖωⱼₗ + ∂ₗωⱼₖ over j < k < l. Zero certifies
    /// closedness at the point.
    pub fn d_max(&self, x: &[f64], cfg: &DiffConfig) -> Result<f64> {
        self.admit(x)?;
        let n = self.dim;
        let m = n * (n - 1) / 2;
        let j = match cfg.mode {
            DiffMode::Dual => jac0(self.comps.as_ref(), x, m),
            DiffMode::Central => central_jac(self.comps.as_ref(), x, m, cfg),
        };
        if !j.is_finite() {
            return Err(HjtError::NonFinite);
        }
        let mut worst = 0.0_f64;
        for a in 0..n {
            for b in a + 1..n {
                for c in b + 1..n {
                    let v = j[(pair_index(n, b, c), a)] - j[(pair_index(n, a, c), b)]
                        + j[(pair_index(n, a, b), c)];
                    worst = worst.max(v.abs());
                }
            }
        }
        Ok(worst)
    }
}

/// Entries of dβ (or −dβ) as a two-form field, for a one-form section β.
pub fn oneform_differential_field(beta: &SectionField, negate: bool) -> TwoFormField {
    struct Comps {
        section: Arc<dyn VectorFn>,
        dim: usize,
        sign: f64,
    }
    impl VectorFn for Comps {
        fn eval0(&self, x: &[f64]) -> Vec<f64> {
            let j = jac0(self.section.as_ref(), x, self.dim);
            let mut out = Vec::with_capacity(self.dim * (self.dim - 1) / 2);
            for a in 0..self.dim {
                for b in a + 1..self.dim {
                    out.push(self.sign * (j[(b, a)] - j[(a, b)]));
                }
            }
            out
        }
        fn eval1(&self, x: &[D1]) -> Vec<D1> {
            let j = jac1(self.section.as_ref(), x, self.dim);
            let s = D1::from_f64(self.sign);
            let mut out = Vec::with_capacity(self.dim * (self.dim - 1) / 2);
            for a in 0..self.dim {
                for b in a + 1..self.dim {
                    out.push(s * (j[b][a] - j[a][b]));
                }
            }
            out
        }
        fn eval2(&self, _x: &[D2]) -> Vec<D2> {
            unimplemented!("second derivatives of a derived two-form field are not supported")
        }
        fn eval3(&self, _x: &[crate::dual::D3]) -> Vec<crate::dual::D3> {
            unimplemented!("third derivatives of a derived two-form field are not supported")
        }
    }
    TwoFormField {
        dim: beta.base_dim(),
        comps: Arc::new(Comps {
            section: beta.as_map().shared(),
            dim: beta.base_dim(),
            sign: if negate { -1.0 } else { 1.0 },
        }),
        guard: beta.guard().clone(),
    }
}

/// Pullback of a two-form along φ: φ*Ω = Jᵀ Ω(φ(x)) J, re-antisymmetrized
/// exactly so roundoff cannot break the form structure.
pub fn pullback_twoform(
    phi: &MapField,
    omega: &TwoFormField,
    x: &[f64],
    cfg: &DiffConfig,
) -> Result<FormMatrix> {
    if omega.dim() != phi.out_dim() {
        return Err(HjtError::DimensionMismatch {
            expected: phi.out_dim(),
            got: omega.dim(),
        });
    }
    let y = phi.value(x)?;
    let om = omega.at(&y)?;
    let j = jacobian(phi, x, cfg)?;
    let m = j.transpose().matmul(om.as_mat()).matmul(&j);
    Ok(FormMatrix::from_upper(phi.in_dim(), |a, b| {
        0.5 * (m[(a, b)] - m[(b, a)])
    }))
}

// ---------------------------------------------------------------------------
// Derived fields.
// ---------------------------------------------------------------------------

/// Gradient of a scalar field as a one-form section (dW).
pub fn differential_section(f: &ScalarField) -> SectionField {
    struct GradComps {
        f: Arc<dyn ScalarFn>,
    }
    impl VectorFn for GradComps {
        fn eval0(&self, x: &[f64]) -> Vec<f64> {
            grad0(self.f.as_ref(), x)
        }
        fn eval1(&self, x: &[D1]) -> Vec<D1> {
            grad1(self.f.as_ref(), x)
        }
        fn eval2(&self, x: &[D2]) -> Vec<D2> {
            grad2(self.f.as_ref(), x)
        }
        fn eval3(&self, _x: &[crate::dual::D3]) -> Vec<crate::dual::D3> {
            unimplemented!("fourth derivatives are not supported")
        }
    }
    let comps = GradComps { f: f.shared() };
    SectionField::with_guard(
        f.arity(),
        SectionKind::OneForm,
        comps,
        f.guard().clone(),
    )
}

/// Composition f ∘ φ as a scalar field on the source of φ.
pub fn compose_scalar(f: &ScalarField, phi: &MapField) -> ScalarField {
    struct Comp {
        f: Arc<dyn ScalarFn>,
        phi: Arc<dyn VectorFn>,
    }
    impl ScalarFn for Comp {
        fn eval0(&self, x: &[f64]) -> f64 {
            self.f.eval0(&self.phi.eval0(x))
        }
        fn eval1(&self, x: &[D1]) -> D1 {
            self.f.eval1(&self.phi.eval1(x))
        }
        fn eval2(&self, x: &[D2]) -> D2 {
            self.f.eval2(&self.phi.eval2(x))
        }
        fn eval3(&self, x: &[crate::dual::D3]) -> crate::dual::D3 {
            self.f.eval3(&self.phi.eval3(x))
        }
    }
    ScalarField::with_guard(
        phi.in_dim(),
        Comp {
            f: f.shared(),
            phi: phi.shared(),
        },
        phi.guard().clone(),
    )
}

/// Pullback φ*β as a one-form section on the source of φ, evaluable at dual
/// points up to first order (enough to take its exterior derivative once).
pub fn pullback_oneform_section(phi: &MapField, beta: &SectionField) -> SectionField {
    struct Pb {
        phi: Arc<dyn VectorFn>,
        beta: Arc<dyn VectorFn>,
        in_dim: usize,
        out_dim: usize,
    }
    impl VectorFn for Pb {
        fn eval0(&self, x: &[f64]) -> Vec<f64> {
            let y = self.phi.eval0(x);
            let b = self.beta.eval0(&y);
            let j = jac0(self.phi.as_ref(), x, self.out_dim);
            (0..self.in_dim)
                .map(|c| (0..self.out_dim).map(|r| b[r] * j[(r, c)]).sum())
                .collect()
        }
        fn eval1(&self, x: &[D1]) -> Vec<D1> {
            let y = self.phi.eval1(x);
            let b = self.beta.eval1(&y);
            let j = jac1(self.phi.as_ref(), x, self.out_dim);
            (0..self.in_dim)
                .map(|c| {
                    let mut acc = D1::from_f64(0.0);
                    for r in 0..self.out_dim {
                        acc = acc + b[r] * j[r][c];
                    }
                    acc
                })
                .collect()
        }
        fn eval2(&self, _x: &[D2]) -> Vec<D2> {
            unimplemented!("second derivatives of a pullback section are not supported")
        }
        fn eval3(&self, _x: &[crate::dual::D3]) -> Vec<crate::dual::D3> {
            unimplemented!("third derivatives of a pullback section are not supported")
        }
    }
    SectionField::with_guard(
        phi.in_dim(),
        SectionKind::OneForm,
        Pb {
            phi: phi.shared(),
            beta: beta.as_map().shared(),
            in_dim: phi.in_dim(),
            out_dim: phi.out_dim(),
        },
        phi.guard().clone(),
    )
}
