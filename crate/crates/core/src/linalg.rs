//! Small dense linear algebra: the matrices in this crate are at most a few
//! hundred rows, so everything here is straightforward O(n^3) code.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major data. Panics if the length does not match.
    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length mismatch");
        Self { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "dimension mismatch in product");
        let mut out = Matrix::zeros(self.rows, other.cols);
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

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(
            self.cols,
            v.len(),
            "dimension mismatch in matrix-vector product"
        );
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn scale(&self, c: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * c).collect(),
        }
    }

    /// Extracts the submatrix with the given row and column indices.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Matrix {
        Matrix::from_fn(rows.len(), cols.len(), |i, j| self[(rows[i], cols[j])])
    }

    pub fn max_abs_asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// Cholesky factor `L` with `A = L L^T`, or `None` when a pivot is not
    /// strictly positive.
    pub fn cholesky(&self) -> Option<Matrix> {
        debug_assert!(self.is_square());
        let n = self.rows;
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > 0.0) || !d.is_finite() {
                return None;
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in (j + 1)..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
        }
        Some(l)
    }

    /// Log-determinant of a symmetric positive-definite matrix.
    pub fn ln_det_spd(&self) -> Option<f64> {
        let l = self.cholesky()?;
        Some((0..self.rows).map(|i| 2.0 * l[(i, i)].ln()).sum())
    }

    /// Determinant by LU decomposition with partial pivoting.
    pub fn det(&self) -> f64 {
        assert!(self.is_square());
        let n = self.rows;
        let mut a = self.clone();
        let mut det = 1.0;
        for c in 0..n {
            let p = (c..n)
                .max_by(|&x, &y| a[(x, c)].abs().total_cmp(&a[(y, c)].abs()))
                .unwrap_or(c);
            if a[(p, c)] == 0.0 {
                return 0.0;
            }
            if p != c {
                a.swap_rows(p, c);
                det = -det;
            }
            let pivot = a[(c, c)];
            det *= pivot;
            for r in (c + 1)..n {
                let f = a[(r, c)] / pivot;
                if f != 0.0 {
                    for k in c..n {
                        let v = a[(c, k)];
                        a[(r, k)] -= f * v;
                    }
                }
            }
        }
        det
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    /// Inverse by Gauss-Jordan elimination with partial pivoting. Returns
    /// `None` if a pivot falls below `tol` times the largest absolute entry.
    pub fn inverse(&self, tol: f64) -> Option<Matrix> {
        assert!(self.is_square());
        let n = self.rows;
        let scale = self.data.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        if scale == 0.0 {
            return None;
        }
        let mut a = self.clone();
        let mut inv = Matrix::identity(n);
        for c in 0..n {
            let p = (c..n)
                .max_by(|&x, &y| a[(x, c)].abs().total_cmp(&a[(y, c)].abs()))
                .unwrap_or(c);
            if a[(p, c)].abs() <= tol * scale {
                return None;
            }
            a.swap_rows(p, c);
            inv.swap_rows(p, c);
            let pivot = a[(c, c)];
            for k in 0..n {
                a[(c, k)] /= pivot;
                inv[(c, k)] /= pivot;
            }
            for r in 0..n {
                if r == c {
                    continue;
                }
                let f = a[(r, c)];
                if f != 0.0 {
                    for k in 0..n {
                        let av = a[(c, k)];
                        let iv = inv[(c, k)];
                        a[(r, k)] -= f * av;
                        inv[(r, k)] -= f * iv;
                    }
                }
            }
        }
        Some(inv)
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Eigen-decomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// Eigenvalues in descending order.
    pub values: Vec<f64>,
    /// Column `k` is the unit eigenvector of `values[k]`.
    pub vectors: Matrix,
}

/// Cyclic Jacobi rotations. Accurate to machine precision for the small
/// symmetric matrices used here.
pub fn symmetric_eigen(a: &Matrix) -> SymmetricEigen {
    assert!(a.is_square());
    let n = a.rows();
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    for _sweep in 0..100 {
        let mut off = 0.0;
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                let x = m[(i, j)] * m[(i, j)];
                total += x;
                if i != j {
                    off += x;
                }
            }
        }
        if off <= 1e-30 * total.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| m[(y, y)].total_cmp(&m[(x, x)]).then(x.cmp(&y)));
    let values = order.iter().map(|&k| m[(k, k)]).collect();
    let vectors = Matrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    SymmetricEigen { values, vectors }
}

/// Householder QR least squares.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub coefficients: Vec<f64>,
    /// `(X^T X)^{-1}`, recovered from the triangular factor.
    pub xtx_inverse: Matrix,
}

/// Error from [`least_squares`]: the column at this index is (numerically) a
/// linear combination of the preceding ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankDeficient {
    pub column: usize,
}

/// Solves `min ||X b - y||` by Householder QR. Columns are processed in
/// order; a column whose remaining norm is below `tol` times its original
/// norm is reported as collinear.
pub fn least_squares(x: &Matrix, y: &[f64], tol: f64) -> Result<LeastSquares, RankDeficient> {
    let (n, k) = (x.rows(), x.cols());
    assert_eq!(n, y.len());
    let mut a = x.clone();
    let mut b = y.to_vec();
    for j in 0..k {
        let col_norm = (0..n).map(|i| x[(i, j)] * x[(i, j)]).sum::<f64>().sqrt();
        let norm = (j..n).map(|i| a[(i, j)] * a[(i, j)]).sum::<f64>().sqrt();
        if col_norm == 0.0 || norm <= tol * col_norm {
            return Err(RankDeficient { column: j });
        }
        let alpha = if a[(j, j)] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (j..n).map(|i| a[(i, j)]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|t| t * t).sum();
        if vnorm2 > 0.0 {
            for c in j..k {
                let dot: f64 = (j..n).map(|i| v[i - j] * a[(i, c)]).sum();
                let f = 2.0 * dot / vnorm2;
                for i in j..n {
                    a[(i, c)] -= f * v[i - j];
                }
            }
            let dot: f64 = (j..n).map(|i| v[i - j] * b[i]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in j..n {
                b[i] -= f * v[i - j];
            }
        }
    }
    // back substitution on R
    let mut coef = vec![0.0; k];
    for j in (0..k).rev() {
        let mut s = b[j];
        for c in (j + 1)..k {
            s -= a[(j, c)] * coef[c];
        }
        coef[j] = s / a[(j, j)];
    }
    // R^{-1}, then (X^T X)^{-1} = R^{-1} R^{-T}
    let mut rinv = Matrix::zeros(k, k);
    for j in 0..k {
        rinv[(j, j)] = 1.0 / a[(j, j)];
        for i in (0..j).rev() {
            let mut s = 0.0;
            for c in (i + 1)..=j {
                s += a[(i, c)] * rinv[(c, j)];
            }
            rinv[(i, j)] = -s / a[(i, i)];
        }
    }
    let xtx_inverse = rinv.mul(&rinv.transpose());
    Ok(LeastSquares {
        coefficients: coef,
        xtx_inverse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn determinant_and_inverse_of_small_matrix() {
        let a = Matrix::from_rows(3, 3, vec![4.0, 1.0, 2.0, 1.0, 3.0, 0.5, 2.0, 0.5, 5.0]);
        // det by cofactor expansion
        let expected = 4.0 * (3.0 * 5.0 - 0.25) - 1.0 * (5.0 - 1.0) + 2.0 * (0.5 - 6.0);
        assert!(close(a.det(), expected, 1e-12));
        assert!(close(a.ln_det_spd().unwrap(), expected.ln(), 1e-12));
        let inv = a.inverse(1e-14).unwrap();
        let prod = a.mul(&inv);
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!(close(prod[(i, j)], e, 1e-12));
            }
        }
    }

    #[test]
    fn singular_matrix_has_no_inverse_or_cholesky() {
        let a = Matrix::from_rows(2, 2, vec![1.0, 1.0, 1.0, 1.0]);
        assert!(a.inverse(1e-12).is_none());
        assert!(a.cholesky().is_none());
        assert_eq!(a.det(), 0.0);
    }

    #[test]
    fn jacobi_recovers_known_spectrum() {
        // path graph on 3 nodes: eigenvalues sqrt2, 0, -sqrt2
        let a = Matrix::from_rows(3, 3, vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        let e = symmetric_eigen(&a);
        let s2 = 2.0_f64.sqrt();
        assert!(close(e.values[0], s2, 1e-12));
        assert!(close(e.values[1], 0.0, 1e-12));
        assert!(close(e.values[2], -s2, 1e-12));
        let v0: Vec<f64> = (0..3).map(|i| e.vectors[(i, 0)].abs()).collect();
        assert!(close(v0[0], 0.5, 1e-12) && close(v0[1], s2 / 2.0, 1e-12));
    }

    #[test]
    fn least_squares_matches_normal_equations() {
        let x = Matrix::from_rows(4, 2, vec![1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let y = [1.0, 3.0, 2.0, 5.0];
        let fit = least_squares(&x, &y, 1e-12).unwrap();
        // slope = Sxy/Sxx with xbar 1.5, ybar 2.75
        let slope = (-1.5 * -1.75 + -0.5 * 0.25 + 0.5 * -0.75 + 1.5 * 2.25) / 5.0;
        assert!(close(fit.coefficients[1], slope, 1e-12));
        assert!(close(fit.coefficients[0], 2.75 - slope * 1.5, 1e-12));
        let xtx = x.transpose().mul(&x);
        let prod = xtx.mul(&fit.xtx_inverse);
        assert!(close(prod[(0, 0)], 1.0, 1e-12) && close(prod[(0, 1)], 0.0, 1e-12));
    }

    #[test]
    fn least_squares_names_collinear_column() {
        let x = Matrix::from_rows(3, 3, vec![1.0, 1.0, 2.0, 1.0, 2.0, 3.0, 1.0, 3.0, 4.0]);
        let err = least_squares(&x, &[1.0, 2.0, 3.0], 1e-10).unwrap_err();
        assert_eq!(err.column, 2);
    }
}
