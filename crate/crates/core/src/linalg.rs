//! Small dense linear algebra.
//!
//! Every matrix in this crate is tiny (dimension ≤ 16: tangent and cotangent
//! spaces of the worked systems), so a direct LU factorization with partial
//! pivoting and a cyclic Jacobi eigensolver for symmetric matrices cover all
//! needs. Conditioning is estimated as ‖A‖₁‖A⁻¹‖₁ with the explicit inverse.

use crate::error::{HjtError, Result};

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut m = Mat::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged rows");
            for (j, &v) in row.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matvec dimension mismatch");
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)] * x[j]).sum())
            .collect()
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Column-sum norm ‖·‖₁.
    pub fn norm_1(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// LU factorization with partial pivoting, PA = LU.
pub struct Lu {
    n: usize,
    lu: Mat,
    perm: Vec<usize>,
    sign: f64,
}

impl Lu {
    pub fn factor(a: &Mat) -> Result<Lu> {
        assert_eq!(a.rows, a.cols, "LU requires a square matrix");
        let n = a.rows;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        for k in 0..n {
            let mut p = k;
            let mut best = lu[(k, k)].abs();
            for i in k + 1..n {
                let v = lu[(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                return Err(HjtError::NumericallySingular);
            }
            if p != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let m = lu[(i, k)] / pivot;
                lu[(i, k)] = m;
                for j in k + 1..n {
                    lu[(i, j)] -= m * lu[(k, j)];
                }
            }
        }
        Ok(Lu { n, lu, perm, sign })
    }

    pub fn det(&self) -> f64 {
        (0..self.n).map(|i| self.lu[(i, i)]).product::<f64>() * self.sign
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n, "solve dimension mismatch");
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 1..self.n {
            for j in 0..i {
                x[i] -= self.lu[(i, j)] * x[j];
            }
        }
        for i in (0..self.n).rev() {
            for j in i + 1..self.n {
                x[i] -= self.lu[(i, j)] * x[j];
            }
            x[i] /= self.lu[(i, i)];
        }
        x
    }

    pub fn inverse(&self) -> Mat {
        let mut inv = Mat::zeros(self.n, self.n);
        let mut e = vec![0.0; self.n];
        for j in 0..self.n {
            e[j] = 1.0;
            let col = self.solve(&e);
            e[j] = 0.0;
            for i in 0..self.n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }
}

/// Determinant of a square matrix; zero when the factorization collapses.
pub fn det(a: &Mat) -> f64 {
    match Lu::factor(a) {
        Ok(lu) => lu.det(),
        Err(_) => 0.0,
    }
}

/// ‖A‖₁‖A⁻¹‖₁ condition estimate; infinite when A does not factor.
pub fn cond_1(a: &Mat) -> f64 {
    match Lu::factor(a) {
        Ok(lu) => a.norm_1() * lu.inverse().norm_1(),
        Err(_) => f64::INFINITY,
    }
}

/// Condition threshold beyond which a matrix is treated as singular and the
/// rank-revealing path is taken instead of plain LU.
pub const SINGULAR_COND: f64 = 1e12;

/// Solve A x = b for a well-conditioned square A.
pub fn solve(a: &Mat, b: &[f64]) -> Result<Vec<f64>> {
    let lu = Lu::factor(a)?;
    if a.norm_1() * lu.inverse().norm_1() > SINGULAR_COND {
        return Err(HjtError::NumericallySingular);
    }
    Ok(lu.solve(b))
}

/// Eigendecomposition A = Q diag(λ) Qᵀ of a symmetric matrix by cyclic
/// Jacobi rotations. Columns of Q are the eigenvectors.
pub fn sym_eigen(a: &Mat) -> (Vec<f64>, Mat) {
    assert_eq!(a.rows, a.cols, "sym_eigen requires a square matrix");
    let n = a.rows;
    let mut m = a.clone();
    let mut q = Mat::identity(n);
    for _sweep in 0..64 {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += m[(i, j)] * m[(i, j)];
            }
        }
        if off.sqrt() < 1e-15 * (1.0 + m.max_abs()) {
            break;
        }
        for p in 0..n {
            for qq in p + 1..n {
                let apq = m[(p, qq)];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (m[(qq, qq)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, qq)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, qq)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(qq, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(qq, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let qkp = q[(k, p)];
                    let qkq = q[(k, qq)];
                    q[(k, p)] = c * qkp - s * qkq;
                    q[(k, qq)] = s * qkp + c * qkq;
                }
            }
        }
    }
    let vals = (0..n).map(|i| m[(i, i)]).collect();
    (vals, q)
}

/// Minimum-norm solution of the symmetric system A x = b along with the
/// residual ‖A x − b‖∞ left in the null directions. Eigenvalues below
/// `rank_tol` (relative to the largest) are treated as zero.
pub struct MinNormSolution {
    pub x: Vec<f64>,
    pub inconsistency: f64,
    pub rank: usize,
    /// Orthonormal basis of the numerical kernel, as columns.
    pub kernel: Vec<Vec<f64>>,
}

pub fn min_norm_solve_sym(a: &Mat, b: &[f64], rank_tol: f64) -> MinNormSolution {
    let n = a.rows();
    let (vals, q) = sym_eigen(a);
    let scale = vals.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let cut = rank_tol * scale.max(1e-300);
    let mut x = vec![0.0; n];
    let mut rank = 0;
    let mut kernel = Vec::new();
    let mut resid = vec![0.0; n];
    resid.copy_from_slice(b);
    for k in 0..n {
        let col: Vec<f64> = (0..n).map(|i| q[(i, k)]).collect();
        let proj: f64 = (0..n).map(|i| col[i] * b[i]).sum();
        if vals[k].abs() > cut {
            rank += 1;
            for i in 0..n {
                x[i] += col[i] * proj / vals[k];
                resid[i] -= col[i] * proj;
            }
        } else {
            kernel.push(col);
        }
    }
    let inconsistency = resid.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    MinNormSolution {
        x,
        inconsistency,
        rank,
        kernel,
    }
}

/// Project `v` onto the span of the orthonormal columns in `basis`.
pub fn project_onto(v: &[f64], basis: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for col in basis {
        let c: f64 = col.iter().zip(v).map(|(a, b)| a * b).sum();
        for (o, bi) in out.iter_mut().zip(col) {
            *o += c * bi;
        }
    }
    out
}

/// Polar projection onto the orthogonal/unitary factor: given nearly
/// orthogonal A, returns U = A (AᵀA)^(-1/2) via the symmetric eigensolver.
/// Used to re-project group elements after each integration step.
pub fn polar_orthogonalize(a: &Mat) -> Result<Mat> {
    let ata = a.transpose().matmul(a);
    let (vals, q) = sym_eigen(&ata);
    if vals.iter().any(|&v| v <= 0.0) {
        return Err(HjtError::NumericallySingular);
    }
    // (AᵀA)^(-1/2) = Q diag(1/√λ) Qᵀ
    let n = ata.rows();
    let mut inv_sqrt = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                s += q[(i, k)] * q[(j, k)] / vals[k].sqrt();
            }
            inv_sqrt[(i, j)] = s;
        }
    }
    Ok(a.matmul(&inv_sqrt))
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn norm_2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_solves_a_fixed_system() {
        // A = [[2,1,1],[4,-6,0],[-2,7,2]], b = (5,-2,9) → x = (1,1,2)
        let a = Mat::from_rows(&[
            vec![2.0, 1.0, 1.0],
            vec![4.0, -6.0, 0.0],
            vec![-2.0, 7.0, 2.0],
        ]);
        let x = solve(&a, &[5.0, -2.0, 9.0]).unwrap();
        for (xi, ei) in x.iter().zip([1.0, 1.0, 2.0]) {
            assert!((xi - ei).abs() < 1e-12);
        }
        assert!((det(&a) - (-16.0)).abs() < 1e-10);
    }

    #[test]
    fn det_sign_tracks_permutations() {
        let a = Mat::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert!((det(&a) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let a = Mat::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(solve(&a, &[1.0, 1.0]).is_err());
        assert_eq!(det(&a), 0.0);
    }

    #[test]
    fn jacobi_recovers_known_spectrum() {
        // Symmetric matrix with eigenvalues 1 and 3: [[2,1],[1,2]]
        let a = Mat::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let (mut vals, q) = sym_eigen(&a);
        vals.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert!((vals[0] - 1.0).abs() < 1e-12);
        assert!((vals[1] - 3.0).abs() < 1e-12);
        // Q orthogonal
        let qtq = q.transpose().matmul(&q);
        for i in 0..2 {
            for j in 0..2 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((qtq[(i, j)] - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn min_norm_solution_of_a_rank_one_system() {
        // W = diag(0, 1): solutions of W x = (0, 3) are (t, 3); min-norm is (0, 3).
        let w = Mat::from_rows(&[vec![0.0, 0.0], vec![0.0, 1.0]]);
        let sol = min_norm_solve_sym(&w, &[0.0, 3.0], 1e-10);
        assert!(sol.inconsistency < 1e-14);
        assert_eq!(sol.rank, 1);
        assert!((sol.x[0]).abs() < 1e-14);
        assert!((sol.x[1] - 3.0).abs() < 1e-14);
        // Inconsistent right-hand side leaves a residual in the kernel direction.
        let bad = min_norm_solve_sym(&w, &[2.0, 3.0], 1e-10);
        assert!((bad.inconsistency - 2.0).abs() < 1e-14);
    }

    #[test]
    fn polar_projection_restores_orthogonality() {
        // Perturb a rotation, re-project, check UᵀU = I and closeness.
        let t = 0.4_f64;
        let mut a = Mat::from_rows(&[
            vec![t.cos(), -t.sin(), 0.0],
            vec![t.sin(), t.cos(), 0.0],
            vec![0.0, 0.0, 1.0],
        ]);
        a[(0, 1)] += 1e-3;
        a[(2, 0)] -= 2e-3;
        let u = polar_orthogonalize(&a).unwrap();
        let utu = u.transpose().matmul(&u);
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((utu[(i, j)] - e).abs() < 1e-12);
            }
        }
        let mut diff = 0.0_f64;
        for i in 0..3 {
            for j in 0..3 {
                diff = diff.max((u[(i, j)] - a[(i, j)]).abs());
            }
        }
        assert!(diff < 5e-3);
    }

    #[test]
    fn condition_estimate_flags_near_singular() {
        let a = Mat::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0 + 1e-14]]);
        assert!(cond_1(&a) > SINGULAR_COND);
        let b = Mat::identity(4);
        assert!((cond_1(&b) - 1.0).abs() < 1e-12);
    }
}
