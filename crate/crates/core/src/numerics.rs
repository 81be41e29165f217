//! Dense linear algebra for the handful of small matrices the rate formulas
//! need: Cholesky, symmetric 2x2 eigendecomposition, SPD inverses and the
//! clamped base-2 logarithm.
//!
//! Nothing here pivots or regularizes. Every matrix that reaches
//! [`cholesky_lower`] is of the form `I + PSD`, so a failing pivot points at
//! a bug upstream and is reported rather than patched.

use std::fmt;
use std::ops::{Index, IndexMut, Mul};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major dense real matrix.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Matrix::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from row-major data; fails if the length is wrong or
    /// an entry is not finite.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(&bad) = data.iter().find(|x| !x.is_finite()) {
            return Err(Error::DomainError(bad));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch(format!(
                    "ragged rows: expected {cols} columns, found {}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Matrix::from_vec(rows.len(), cols, data)
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

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn trace(&self) -> f64 {
        self.diag().iter().sum()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        self.add(&other.scale(-1.0))
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
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

    /// Matrix-vector product.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        let tol = rel_tol * self.max_abs().max(f64::MIN_POSITIVE);
        (0..self.rows).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }

    pub fn is_lower_triangular(&self) -> bool {
        (0..self.rows).all(|i| (i + 1..self.cols).all(|j| self[(i, j)] == 0.0))
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &Matrix {
    type Output = Matrix;

    fn mul(self, rhs: &Matrix) -> Matrix {
        self.matmul(rhs)
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

/// Lower-triangular Cholesky factor `G` with `G Gᵀ = M` and positive diagonal.
pub fn cholesky_lower(m: &Matrix) -> Result<Matrix> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "cholesky of a {}x{} matrix",
            m.rows, m.cols
        )));
    }
    let n = m.rows;
    let mut g = Matrix::zeros(n, n);
    for j in 0..n {
        let mut pivot = m[(j, j)];
        for k in 0..j {
            pivot -= g[(j, k)] * g[(j, k)];
        }
        if !(pivot > 0.0) {
            return Err(Error::NotPositiveDefinite { pivot: j, value: pivot });
        }
        let d = pivot.sqrt();
        g[(j, j)] = d;
        for i in j + 1..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= g[(i, k)] * g[(j, k)];
            }
            g[(i, j)] = s / d;
        }
    }
    Ok(g)
}

/// Inverse of a symmetric positive-definite matrix via its Cholesky factor.
pub fn spd_inverse(m: &Matrix) -> Result<Matrix> {
    let g = cholesky_lower(m)?;
    let n = g.rows;
    // Invert the triangular factor column by column, then form G⁻ᵀ G⁻¹.
    let mut ginv = Matrix::zeros(n, n);
    for c in 0..n {
        for i in c..n {
            let mut s = if i == c { 1.0 } else { 0.0 };
            for k in c..i {
                s -= g[(i, k)] * ginv[(k, c)];
            }
            ginv[(i, c)] = s / g[(i, i)];
        }
    }
    let mut inv = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = 0.0;
            for k in i..n {
                s += ginv[(k, i)] * ginv[(k, j)];
            }
            inv[(i, j)] = s;
            inv[(j, i)] = s;
        }
    }
    Ok(inv)
}

/// `vᵀ M⁻¹ v` for symmetric positive-definite `M`, by forward substitution
/// against the Cholesky factor.
pub fn spd_inverse_quadratic(m: &Matrix, v: &[f64]) -> Result<f64> {
    let g = cholesky_lower(m)?;
    let n = g.rows;
    assert_eq!(v.len(), n);
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = v[i];
        for k in 0..i {
            s -= g[(i, k)] * y[k];
        }
        y[i] = s / g[(i, i)];
    }
    Ok(norm_sq(&y))
}

/// `log₂ det M` for symmetric positive-definite `M`.
pub fn log2_det_spd(m: &Matrix) -> Result<f64> {
    let g = cholesky_lower(m)?;
    Ok(g.diag().iter().map(|d| 2.0 * d.log2()).sum())
}

/// Eigendecomposition of a symmetric 2x2 matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymEig2 {
    /// Eigenvectors as columns: `vectors[i][j]` is entry `i` of eigenvector `j`.
    pub vectors: [[f64; 2]; 2],
    /// Eigenvalues, largest first.
    pub values: [f64; 2],
}

impl SymEig2 {
    pub fn column(&self, j: usize) -> [f64; 2] {
        [self.vectors[0][j], self.vectors[1][j]]
    }

    /// `U diag(d) Uᵀ`.
    pub fn reconstruct_with(&self, d: [f64; 2]) -> [[f64; 2]; 2] {
        let u = &self.vectors;
        let mut out = [[0.0; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, x) in row.iter_mut().enumerate() {
                *x = u[i][0] * d[0] * u[j][0] + u[i][1] * d[1] * u[j][1];
            }
        }
        out
    }
}

/// Closed-form eigendecomposition of `[[a, b], [b, c]]`.
///
/// Eigenvalues come out in descending order. Each eigenvector is flipped so
/// its largest-magnitude entry is positive (first entry wins a tie), and a
/// repeated eigenvalue of a diagonal matrix returns the identity basis.
pub fn sym_eig2(m: [[f64; 2]; 2]) -> SymEig2 {
    let (a, c) = (m[0][0], m[1][1]);
    let b = 0.5 * (m[0][1] + m[1][0]);

    if b == 0.0 {
        return if a >= c {
            SymEig2 {
                vectors: [[1.0, 0.0], [0.0, 1.0]],
                values: [a, c],
            }
        } else {
            SymEig2 {
                vectors: [[0.0, 1.0], [1.0, 0.0]],
                values: [c, a],
            }
        };
    }

    let mean = 0.5 * (a + c);
    let radius = (0.5 * (a - c)).hypot(b);
    let hi = mean + radius;
    // The product of the eigenvalues is the determinant; dividing avoids the
    // cancellation in `mean - radius` when one eigenvalue dwarfs the other.
    let det = a * c - b * b;
    let lo = if hi != 0.0 && hi.abs() > radius { det / hi } else { mean - radius };

    let v = if a >= c { [hi - c, b] } else { [b, hi - a] };
    let n = v[0].hypot(v[1]);
    let v1 = canonical_sign([v[0] / n, v[1] / n]);
    let v2 = canonical_sign([-v1[1], v1[0]]);
    SymEig2 {
        vectors: [[v1[0], v2[0]], [v1[1], v2[1]]],
        values: [hi, lo],
    }
}

fn canonical_sign(v: [f64; 2]) -> [f64; 2] {
    let lead = if v[1].abs() > v[0].abs() { v[1] } else { v[0] };
    if lead < 0.0 {
        [-v[0], -v[1]]
    } else {
        v
    }
}

/// `max(0, log₂ x)`.
pub fn log2_plus(x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::DomainError(x));
    }
    Ok(x.log2().max(0.0))
}

/// `2^(2c) - 1`, accurate for small `c`.
pub(crate) fn exp2_2c_m1(c: f64) -> f64 {
    (2.0 * c * std::f64::consts::LN_2).exp_m1()
}
