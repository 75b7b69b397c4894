//! Dense row-major matrices and the small linear-algebra kernel set used by
//! the rest of the crate: products, transposes, and a ridge-stabilized
//! normal-equation least-squares solver.

use crate::error::{FaeError, Result};

/// Dense `rows x cols` matrix of `f64`, row-major.
///
/// Holds data matrices (samples by features) as well as encoder/decoder
/// weights. Row-major storage keeps sample rows contiguous.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "MatrixRepr", into = "MatrixRepr")]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Serialization shape of [`Matrix`]; deserialization re-validates the
/// length invariant.
#[derive(serde::Serialize, serde::Deserialize)]
struct MatrixRepr {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TryFrom<MatrixRepr> for Matrix {
    type Error = FaeError;

    fn try_from(r: MatrixRepr) -> Result<Matrix> {
        Matrix::from_vec(r.rows, r.cols, r.data)
    }
}

impl From<Matrix> for MatrixRepr {
    fn from(m: Matrix) -> MatrixRepr {
        MatrixRepr {
            rows: m.rows,
            cols: m.cols,
            data: m.data,
        }
    }
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
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major data. The length must equal
    /// `rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(FaeError::InvalidArgument(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(FaeError::dim(
                "from_vec",
                format!("{} values for a {rows}x{cols} matrix", data.len()),
            ));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    /// Standard matrix product `self * other`.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(FaeError::dim(
                "matmul",
                format!(
                    "{}x{} * {}x{}",
                    self.rows, self.cols, other.rows, other.cols
                ),
            ));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        gemm_into(1.0, self, false, other, false, 0.0, &mut out);
        Ok(out)
    }

    /// Entrywise difference `self - other`.
    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(FaeError::dim(
                "sub",
                format!(
                    "{}x{} - {}x{}",
                    self.rows, self.cols, other.rows, other.cols
                ),
            ));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    /// Squared Frobenius norm.
    pub fn frob_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// Returns a copy with column `j` scaled by `w[j]`.
    pub fn scale_cols(&self, w: &[f64]) -> Result<Matrix> {
        if w.len() != self.cols {
            return Err(FaeError::dim(
                "scale_cols",
                format!("{} weights for {} columns", w.len(), self.cols),
            ));
        }
        let mut out = self.clone();
        for i in 0..self.rows {
            let row = out.row_mut(i);
            for (x, s) in row.iter_mut().zip(w) {
                *x *= s;
            }
        }
        Ok(out)
    }

    /// Returns a copy with row `i` scaled by `w[i]`.
    pub fn scale_rows(&self, w: &[f64]) -> Result<Matrix> {
        if w.len() != self.rows {
            return Err(FaeError::dim(
                "scale_rows",
                format!("{} weights for {} rows", w.len(), self.rows),
            ));
        }
        let mut out = self.clone();
        for (i, &s) in w.iter().enumerate() {
            for x in out.row_mut(i) {
                *x *= s;
            }
        }
        Ok(out)
    }

    /// Gathers the given columns, in order, into a new matrix.
    pub fn select_cols(&self, idx: &[usize]) -> Result<Matrix> {
        if let Some(&bad) = idx.iter().find(|&&j| j >= self.cols) {
            return Err(FaeError::InvalidArgument(format!(
                "column index {bad} out of range for {} columns",
                self.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, idx.len());
        for i in 0..self.rows {
            let src = self.row(i);
            let dst = out.row_mut(i);
            for (d, &j) in dst.iter_mut().zip(idx) {
                *d = src[j];
            }
        }
        Ok(out)
    }

    /// Gathers the given rows, in order, into a new matrix.
    pub fn select_rows(&self, idx: &[usize]) -> Result<Matrix> {
        if let Some(&bad) = idx.iter().find(|&&i| i >= self.rows) {
            return Err(FaeError::InvalidArgument(format!(
                "row index {bad} out of range for {} rows",
                self.rows
            )));
        }
        let mut out = Matrix::zeros(idx.len(), self.cols);
        for (r, &i) in idx.iter().enumerate() {
            out.row_mut(r).copy_from_slice(self.row(i));
        }
        Ok(out)
    }
}

/// `c = alpha * op(a) * op(b) + beta * c`, where `op` optionally transposes.
///
/// Transposition is handled through strides, so no copies are made. Shapes
/// are checked by debug assertions only; public entry points validate.
pub(crate) fn gemm_into(
    alpha: f64,
    a: &Matrix,
    trans_a: bool,
    b: &Matrix,
    trans_b: bool,
    beta: f64,
    c: &mut Matrix,
) {
    let (am, ak) = if trans_a {
        (a.cols, a.rows)
    } else {
        (a.rows, a.cols)
    };
    let (bk, bn) = if trans_b {
        (b.cols, b.rows)
    } else {
        (b.rows, b.cols)
    };
    debug_assert_eq!(ak, bk, "gemm inner dimensions");
    debug_assert_eq!(c.rows, am, "gemm output rows");
    debug_assert_eq!(c.cols, bn, "gemm output cols");

    let (rsa, csa) = if trans_a {
        (1, a.cols as isize)
    } else {
        (a.cols as isize, 1)
    };
    let (rsb, csb) = if trans_b {
        (1, b.cols as isize)
    } else {
        (b.cols as isize, 1)
    };

    unsafe {
        matrixmultiply::dgemm(
            am,
            ak,
            bn,
            alpha,
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            beta,
            c.data.as_mut_ptr(),
            c.cols as isize,
            1,
        );
    }
}

/// Convenience wrapper returning a fresh `op(a) * op(b)`.
pub(crate) fn gemm(a: &Matrix, trans_a: bool, b: &Matrix, trans_b: bool) -> Matrix {
    let m = if trans_a { a.cols } else { a.rows };
    let n = if trans_b { b.rows } else { b.cols };
    let mut c = Matrix::zeros(m, n);
    gemm_into(1.0, a, trans_a, b, trans_b, 0.0, &mut c);
    c
}

/// Solves `min_W ||a W - b||_F^2 + ridge ||W||_F^2` through the normal
/// equations `(A^T A + ridge I) W = A^T b` and a Cholesky factorization.
///
/// The systems this crate builds are small (`a.cols` is the number of
/// selected features), so the normal equations are accurate enough; `ridge`
/// defaults to `1e-8` at call sites purely for conditioning.
pub fn lstsq(a: &Matrix, b: &Matrix, ridge: f64) -> Result<Matrix> {
    if a.rows != b.rows {
        return Err(FaeError::dim(
            "lstsq",
            format!("a has {} rows, b has {} rows", a.rows, b.rows),
        ));
    }
    if ridge < 0.0 {
        return Err(FaeError::InvalidArgument(format!(
            "ridge must be non-negative, got {ridge}"
        )));
    }
    let p = a.cols;
    let mut gram = gemm(a, true, a, false); // A^T A, p x p
    for i in 0..p {
        gram.data[i * p + i] += ridge;
    }
    let rhs = gemm(a, true, b, false); // A^T b, p x q

    let chol = cholesky(&gram).map_err(|diag| {
        let max_d = diag.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min_d = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        FaeError::Numerical(format!(
            "lstsq normal equations not positive definite (ridge {ridge:.1e}); \
             gram diagonal range [{min_d:.3e}, {max_d:.3e}]"
        ))
    })?;
    Ok(chol_solve(&chol, &rhs))
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
/// On failure returns the diagonal of the input for error reporting.
fn cholesky(g: &Matrix) -> std::result::Result<Matrix, Vec<f64>> {
    let n = g.rows;
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = g.data[i * n + j];
            for t in 0..j {
                sum -= l.data[i * n + t] * l.data[j * n + t];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return Err((0..n).map(|t| g.data[t * n + t]).collect());
                }
                l.data[i * n + i] = sum.sqrt();
            } else {
                l.data[i * n + j] = sum / l.data[j * n + j];
            }
        }
    }
    Ok(l)
}

/// Solves `L L^T x = rhs` column by column.
fn chol_solve(l: &Matrix, rhs: &Matrix) -> Matrix {
    let n = l.rows;
    let q = rhs.cols;
    let mut x = rhs.clone();
    // forward substitution: L y = rhs
    for i in 0..n {
        for t in 0..i {
            let lit = l.data[i * n + t];
            for c in 0..q {
                x.data[i * q + c] -= lit * x.data[t * q + c];
            }
        }
        let lii = l.data[i * n + i];
        for c in 0..q {
            x.data[i * q + c] /= lii;
        }
    }
    // back substitution: L^T x = y
    for i in (0..n).rev() {
        for t in (i + 1)..n {
            let lti = l.data[t * n + i];
            for c in 0..q {
                x.data[i * q + c] -= lti * x.data[t * q + c];
            }
        }
        let lii = l.data[i * n + i];
        for c in 0..q {
            x.data[i * q + c] /= lii;
        }
    }
    x
}
