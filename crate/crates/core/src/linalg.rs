//! Dense linear-algebra kernel.
//!
//! Row-major matrices, vector helpers, the spectral norm, and a power-iteration
//! eigensolver for the top of a symmetric PSD spectrum. All reductions sum
//! left to right in index order so results are bit-reproducible.

use crate::error::{Error, Result};

/// Dense row-major matrix with finite entries and at least one row and column.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    /// # Panics
    /// If either dimension is zero.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix dimensions must be positive");
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = Mat::zeros(n, n);
        for (i, &v) in values.iter().enumerate() {
            m.data[i * n + i] = v;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidInput(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::InvalidInput(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("matrix has non-finite entries".into()));
        }
        Ok(Mat { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidInput("ragged rows".into()));
        }
        Mat::from_vec(rows.len(), cols, rows.concat())
    }

    /// Builds an `n x columns.len()` matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::InvalidInput("columns differ in length".into()));
        }
        let cols = columns.len();
        let mut data = vec![0.0; rows * cols];
        for (j, c) in columns.iter().enumerate() {
            for (i, &v) in c.iter().enumerate() {
                data[i * cols + j] = v;
            }
        }
        Mat::from_vec(rows, cols, data)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Mat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.data[i * cols + j] = f(i, j);
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

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn columns(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.cols).map(|c| self.column(c))
    }

    /// Columns `indices` of `self`, in the given order.
    pub fn select_columns(&self, indices: &[usize]) -> Result<Mat> {
        let cols: Vec<Vec<f64>> = indices.iter().map(|&c| self.column(c)).collect();
        Mat::from_columns(&cols)
    }

    /// Horizontal concatenation.
    pub fn hstack(blocks: &[&Mat]) -> Result<Mat> {
        let cols: Vec<Vec<f64>> = blocks.iter().flat_map(|b| b.columns()).collect();
        Mat::from_columns(&cols)
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, other: &Mat) -> Result<Mat> {
        if self.cols != other.rows {
            return Err(Error::InvalidInput(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `A x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `A^T x`.
    pub fn tr_matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a * xi;
            }
        }
        out
    }

    /// `A A^T`, computed on the upper triangle and mirrored so the result is
    /// exactly symmetric.
    pub fn outer_gram(&self) -> Mat {
        let n = self.rows;
        let mut g = Mat::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = dot(self.row(i), self.row(j));
                g.data[i * n + j] = v;
                g.data[j * n + i] = v;
            }
        }
        g
    }

    pub fn add(&self, other: &Mat) -> Result<Mat> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Mat) -> Result<Mat> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Mat, f: impl Fn(f64, f64) -> f64) -> Result<Mat> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::InvalidInput("matrix shapes differ".into()));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Mat {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn add_assign(&mut self, other: &Mat) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&self, s: f64) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm2(&self.data)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Scales `v` to unit length in place and returns its original norm. A zero
/// vector is left untouched.
pub fn normalize(v: &mut [f64]) -> f64 {
    let n = norm2(v);
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
    n
}

/// `y += a x`
#[inline]
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn outer(u: &[f64], v: &[f64]) -> Mat {
    Mat::from_fn(u.len(), v.len(), |i, j| u[i] * v[j])
}

/// Deterministic, generic start vector for power iterations: a fixed
/// low-discrepancy sequence that is not orthogonal to any coordinate axis.
fn start_vector(dim: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..dim)
        .map(|i| 1.0 + ((i as f64 + 1.0) * 0.618_033_988_749_895).fract())
        .collect();
    normalize(&mut v);
    v
}

/// Largest singular value, by power iteration on `A^T A` until the Rayleigh
/// quotient changes by less than 1e-12 (relative) or 10 000 iterations.
pub fn spectral_norm(a: &Mat) -> Result<f64> {
    if !a.is_finite() {
        return Err(Error::InvalidInput(
            "spectral norm of non-finite matrix".into(),
        ));
    }
    let mut x = start_vector(a.cols());
    let mut prev = f64::NAN;
    for _ in 0..10_000 {
        let ax = a.matvec(&x);
        let rq = dot(&ax, &ax);
        let mut next = a.tr_matvec(&ax);
        if normalize(&mut next) == 0.0 {
            // x is in the null space; that only happens for A = 0 from this start.
            return Ok(if rq == 0.0 { 0.0 } else { rq.sqrt() });
        }
        x = next;
        if (rq - prev).abs() <= 1e-12 * rq {
            break;
        }
        prev = rq;
    }
    let ax = a.matvec(&x);
    Ok(norm2(&ax))
}

/// Top of the spectrum of a symmetric PSD matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    /// Unit-norm dominant eigenvector.
    pub vector: Vec<f64>,
    /// Second-largest eigenvalue, from one deflation step.
    pub second_value: f64,
    /// Set when `value` and `second_value` agree to 1e-12 (relative to
    /// `max(1, value)`); `vector` is then only one member of the eigenspace.
    pub degenerate: bool,
}

impl EigenPair {
    pub fn gap_ratio(&self) -> f64 {
        if self.value > 0.0 {
            self.second_value / self.value
        } else {
            1.0
        }
    }

    pub fn residual(&self, m: &Mat) -> f64 {
        let mut r = m.matvec(&self.vector);
        axpy(-self.value, &self.vector, &mut r);
        norm2(&r)
    }
}

const EIG_TOL: f64 = 1e-14;
const EIG_MAX_ITERS: usize = 100_000;

/// Dominant eigenpair of a symmetric PSD matrix plus the second eigenvalue.
///
/// Power iteration stops once successive unit iterates move by less than
/// 1e-14 (floored at the rounding level of the dimension) or after 100 000
/// iterations; the second eigenvalue comes from the same iteration on the
/// deflated matrix `M - l1 u u^T`, kept orthogonal to `u`.
pub fn reference_top_eigenpair(m: &Mat) -> Result<EigenPair> {
    if !m.is_square() {
        return Err(Error::InvalidInput(format!(
            "eigenproblem needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    if !m.is_finite() {
        return Err(Error::InvalidInput(
            "eigenproblem on non-finite matrix".into(),
        ));
    }
    let scale = m.max_abs().max(1.0);
    if m.max_asymmetry() > 1e-10 * scale {
        return Err(Error::InvalidInput("matrix is not symmetric".into()));
    }
    let n = m.rows();
    let tol = EIG_TOL.max(32.0 * f64::EPSILON * (n as f64).sqrt());

    let (value, vector) = power_iterate(m, start_vector(n), None, tol);

    let second_value = if n == 1 {
        0.0
    } else {
        let deflated = m.sub(&outer(&vector, &vector).scale(value))?;
        let mut start = start_vector(n);
        project_out(&mut start, &vector);
        if normalize(&mut start) == 0.0 {
            start = vec![0.0; n];
            start[n - 1] = 1.0;
            project_out(&mut start, &vector);
            normalize(&mut start);
        }
        power_iterate(&deflated, start, Some(&vector), tol).0
    };
    if value < -1e-10 * scale || second_value < -1e-10 * scale {
        return Err(Error::InvalidInput(
            "matrix is not positive semidefinite".into(),
        ));
    }
    let degenerate = (value - second_value).abs() <= 1e-12 * value.abs().max(1.0);
    Ok(EigenPair {
        value,
        vector,
        second_value,
        degenerate,
    })
}

/// Dominant left singular vector of `a`, by the same power iteration on the
/// smaller of `a a^T` and `a^T a`. `None` when `a` is zero.
pub fn top_left_singular_vector(a: &Mat) -> Option<Vec<f64>> {
    let (rows, cols) = (a.rows(), a.cols());
    let tol = EIG_TOL.max(32.0 * f64::EPSILON * (rows.min(cols) as f64).sqrt());
    let mut u = if cols < rows {
        let (_, v) = power_iterate(&a.transpose().outer_gram(), start_vector(cols), None, tol);
        a.matvec(&v)
    } else {
        power_iterate(&a.outer_gram(), start_vector(rows), None, tol).1
    };
    (normalize(&mut u) > 0.0).then_some(u)
}

fn project_out(v: &mut [f64], u: &[f64]) {
    let c = dot(v, u);
    axpy(-c, u, v);
}

/// Returns the Rayleigh quotient and the final unit iterate.
fn power_iterate(m: &Mat, mut q: Vec<f64>, orth: Option<&[f64]>, tol: f64) -> (f64, Vec<f64>) {
    let mut prev_rq = f64::NAN;
    for _ in 0..EIG_MAX_ITERS {
        let mut v = m.matvec(&q);
        if let Some(u) = orth {
            project_out(&mut v, u);
        }
        let rq = dot(&q, &v);
        if normalize(&mut v) == 0.0 {
            return (0.0, q);
        }
        // Align signs so the step length measures convergence, not flips.
        if dot(&v, &q) < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        let step = q
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        q = v;
        let rq_settled = (rq - prev_rq).abs() <= EIG_TOL * rq.abs().max(f64::MIN_POSITIVE);
        if step <= tol || (orth.is_some() && rq_settled) {
            break;
        }
        prev_rq = rq;
    }
    let mq = m.matvec(&q);
    (dot(&q, &mq), q)
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix,
/// or `None` if a pivot is not positive.
pub fn cholesky(a: &Mat) -> Option<Mat> {
    let n = a.rows();
    let mut l = Mat::zeros(n, n);
    for j in 0..n {
        let mut d = a.get(j, j);
        for k in 0..j {
            d -= l.get(j, k) * l.get(j, k);
        }
        if d <= 0.0 || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        l.set(j, j, d);
        for i in (j + 1)..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / d);
        }
    }
    Some(l)
}

/// Solves `L L^T x = b` given the Cholesky factor `L`.
pub fn cholesky_solve(l: &Mat, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l.get(i, k) * y[k];
        }
        y[i] = s / l.get(i, i);
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l.get(k, i) * x[k];
        }
        x[i] = s / l.get(i, i);
    }
    x
}

/// Smallest eigenvalue of a symmetric PSD matrix by inverse iteration.
/// Returns 0 when the matrix is numerically singular.
pub fn min_eigenvalue_psd(a: &Mat) -> f64 {
    let Some(l) = cholesky(a) else {
        return 0.0;
    };
    let mut q = start_vector(a.rows());
    let mut prev = f64::NAN;
    for _ in 0..10_000 {
        let mut v = cholesky_solve(&l, &q);
        let inv_rq = dot(&q, &v);
        if normalize(&mut v) == 0.0 || !inv_rq.is_finite() {
            return 0.0;
        }
        q = v;
        if (inv_rq - prev).abs() <= 1e-15 * inv_rq.abs() {
            break;
        }
        prev = inv_rq;
    }
    let aq = a.matvec(&q);
    dot(&q, &aq).max(0.0)
}
