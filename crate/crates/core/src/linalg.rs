//! Dense real matrices and a cyclic Jacobi eigensolver for symmetric input.
//!
//! Only the handful of operations the generator, the mixture model and the
//! spectral embedding need are provided here.

use std::fmt;
use std::ops::{Index, IndexMut};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix dimension must be at least 1")]
    EmptyMatrix,
    #[error("Jacobi iteration did not converge after {sweeps} sweeps (max off-diagonal {off_diagonal:e})")]
    NoConvergence { sweeps: usize, off_diagonal: f64 },
    #[error("matrix is not positive semi-definite: eigenvalue {eigenvalue:e} below tolerance {tolerance:e}")]
    NotPsd { eigenvalue: f64, tolerance: f64 },
    #[error("shape mismatch: {0}")]
    Shape(String),
}

/// Row-major dense matrix.
#[derive(Clone, PartialEq)]
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

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        for i in 0..dim {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::Shape(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(LinalgError::Shape(format!(
                    "row {i} has {} columns, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact panics on a zero chunk size
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
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

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix, LinalgError> {
        if self.cols != other.rows {
            return Err(LinalgError::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self · selfᵀ`, symmetric by construction.
    pub fn gram(&self) -> SymmetricMatrix {
        let mut s = SymmetricMatrix::zeros(self.rows);
        for i in 0..self.rows {
            for j in 0..=i {
                let v = dot(self.row(i), self.row(j));
                s.set(i, j, v);
            }
        }
        s
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for r in self.row_iter() {
            writeln!(f, "  {r:?}")?;
        }
        write!(f, "]")
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn manhattan(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Square matrix whose symmetry holds exactly: every write mirrors.
#[derive(Clone, PartialEq)]
pub struct SymmetricMatrix {
    inner: Matrix,
}

impl SymmetricMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            inner: Matrix::zeros(dim, dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            inner: Matrix::identity(dim),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut s = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            s.set(i, i, d);
        }
        s
    }

    /// Builds from the lower triangle of `m`; the upper triangle is ignored.
    pub fn from_lower(m: &Matrix) -> Result<Self, LinalgError> {
        if m.rows() != m.cols() {
            return Err(LinalgError::Shape(format!(
                "{}x{} is not square",
                m.rows(),
                m.cols()
            )));
        }
        let mut s = Self::zeros(m.rows());
        for i in 0..m.rows() {
            for j in 0..=i {
                s.set(i, j, m[(i, j)]);
            }
        }
        Ok(s)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.inner.rows
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner[(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.inner[(i, j)] = v;
        self.inner[(j, i)] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.inner.row(i)
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.inner
    }

    pub fn into_matrix(self) -> Matrix {
        self.inner
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Maximum absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        self.inner
            .row_iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.inner.data.iter_mut().for_each(|v| *v *= factor);
        out
    }
}

impl fmt::Debug for SymmetricMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Symmetric{:?}", self.inner)
    }
}

/// Eigenpairs with values ascending; column `k` of `vectors` pairs with `values[k]`.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl EigenDecomposition {
    pub fn vector(&self, k: usize) -> Vec<f64> {
        (0..self.vectors.rows()).map(|i| self.vectors[(i, k)]).collect()
    }

    /// `V · diag(values) · Vᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for i in 0..n {
            for k in 0..n {
                scaled[(i, k)] *= self.values[k];
            }
        }
        scaled
            .matmul(&self.vectors.transpose())
            .expect("square factors")
    }
}

pub const JACOBI_MAX_SWEEPS: usize = 100;
const JACOBI_REL_TOL: f64 = 1e-12;

/// Full symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Converged once every off-diagonal magnitude falls below
/// `1e-12 · ‖A‖_F`. Eigenvalues are returned ascending.
pub fn eigh(m: &SymmetricMatrix) -> Result<EigenDecomposition, LinalgError> {
    let n = m.dim();
    if n == 0 {
        return Err(LinalgError::EmptyMatrix);
    }
    let mut a = m.inner.data.clone();
    // rows of `vt` are eigenvectors, kept contiguous for the rotation updates
    let mut vt = Matrix::identity(n).data;
    let threshold = JACOBI_REL_TOL * m.frobenius_norm();

    let max_off = |a: &[f64]| {
        let mut worst = 0.0f64;
        for p in 0..n {
            for q in p + 1..n {
                worst = worst.max(a[p * n + q].abs());
            }
        }
        worst
    };

    let mut sweeps = 0;
    loop {
        let off = max_off(&a);
        if off <= threshold || n == 1 {
            break;
        }
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(LinalgError::NoConvergence {
                sweeps,
                off_diagonal: off,
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() <= threshold {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    let new_kp = c * akp - s * akq;
                    let new_kq = s * akp + c * akq;
                    a[k * n + p] = new_kp;
                    a[p * n + k] = new_kp;
                    a[k * n + q] = new_kq;
                    a[q * n + k] = new_kq;
                }
                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;

                let (head, tail) = vt.split_at_mut(q * n);
                let vp = &mut head[p * n..(p + 1) * n];
                let vq = &mut tail[..n];
                for (x, y) in vp.iter_mut().zip(vq.iter_mut()) {
                    let (xp, xq) = (*x, *y);
                    *x = c * xp - s * xq;
                    *y = s * xp + c * xq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        for row in 0..n {
            vectors[(row, col)] = vt[src * n + row];
        }
    }
    Ok(EigenDecomposition { values, vectors })
}

/// Full symmetric eigendecomposition by Householder reduction to tridiagonal
/// form followed by implicit QL iterations (the EISPACK `tred2`/`tql2` pair).
///
/// Same contract as [`eigh`], roughly an order of magnitude faster for
/// dimensions in the hundreds.
pub fn eigh_ql(m: &SymmetricMatrix) -> Result<EigenDecomposition, LinalgError> {
    let n = m.dim();
    if n == 0 {
        return Err(LinalgError::EmptyMatrix);
    }
    let mut v = m.inner.data.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(n, &mut v, &mut d, &mut e);

    // QL rotates pairs of eigenvector columns; transpose so they are rows
    let mut vt = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            vt[j * n + i] = v[i * n + j];
        }
    }
    tridiagonal_ql(n, &mut vt, &mut d, &mut e)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| d[i]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        for row in 0..n {
            vectors[(row, col)] = vt[src * n + row];
        }
    }
    Ok(EigenDecomposition { values, vectors })
}

fn tridiagonalize(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) {
    let at = |i: usize, j: usize| i * n + j;
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
    }
    for i in (1..n).rev() {
        let scale: f64 = d[..i].iter().map(|x| x.abs()).sum();
        let mut h = 0.0;
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
                v[at(j, i)] = 0.0;
            }
        } else {
            for x in d[..i].iter_mut() {
                *x /= scale;
                h += *x * *x;
            }
            let mut f = d[i - 1];
            let mut g = if f > 0.0 { -h.sqrt() } else { h.sqrt() };
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            e[..i].iter_mut().for_each(|x| *x = 0.0);
            for j in 0..i {
                f = d[j];
                v[at(j, i)] = f;
                g = e[j] + v[at(j, j)] * f;
                for k in j + 1..i {
                    g += v[at(k, j)] * d[k];
                    e[k] += v[at(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[at(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }

    // accumulate the Householder reflections
    for i in 0..n - 1 {
        v[at(n - 1, i)] = v[at(i, i)];
        v[at(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[at(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[at(k, i + 1)] * v[at(k, j)];
                }
                for k in 0..=i {
                    v[at(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[at(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
        v[at(n - 1, j)] = 0.0;
    }
    v[at(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

/// Diagonalizes the tridiagonal `(d, e)`; `vt` holds eigenvectors as rows.
fn tridiagonal_ql(n: usize, vt: &mut [f64], d: &mut [f64], e: &mut [f64]) -> Result<(), LinalgError> {
    const MAX_ITER_PER_VALUE: usize = 60;
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > f64::EPSILON * tst1 {
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_ITER_PER_VALUE {
                    return Err(LinalgError::NoConvergence {
                        sweeps: iter,
                        off_diagonal: e[l].abs(),
                    });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for x in d[l + 2..].iter_mut() {
                    *x -= h;
                }
                f += h;

                p = d[m];
                let (mut c, mut c2, mut c3) = (1.0, 1.0, 1.0);
                let el1 = e[l + 1];
                let (mut s, mut s2) = (0.0, 0.0);
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    let (head, tail) = vt.split_at_mut((i + 1) * n);
                    let vi = &mut head[i * n..];
                    let vi1 = &mut tail[..n];
                    for (a, b) in vi.iter_mut().zip(vi1.iter_mut()) {
                        let hb = *b;
                        *b = s * *a + c * hb;
                        *a = c * *a - s * hb;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= f64::EPSILON * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Negative eigenvalues down to `-PSD_REL_TOL · max diagonal` count as zero.
pub const PSD_REL_TOL: f64 = 1e-8;

pub fn psd_tolerance(m: &SymmetricMatrix) -> f64 {
    let max_diag = m.diagonal().into_iter().fold(0.0, f64::max);
    PSD_REL_TOL * max_diag
}

/// Symmetric square root `S = V·√Λ⁺·Vᵀ`, so that `S·Sᵀ = m`.
pub fn psd_sqrt(m: &SymmetricMatrix) -> Result<Matrix, LinalgError> {
    let eig = eigh(m)?;
    let tol = psd_tolerance(m);
    if let Some(&lowest) = eig.values.first() {
        if lowest < -tol {
            return Err(LinalgError::NotPsd {
                eigenvalue: lowest,
                tolerance: tol,
            });
        }
    }
    let n = m.dim();
    let roots: Vec<f64> = eig.values.iter().map(|&v| v.max(0.0).sqrt()).collect();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v: f64 = (0..n)
                .map(|k| eig.vectors[(i, k)] * roots[k] * eig.vectors[(j, k)])
                .sum();
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok(out)
}

/// Lower-triangular `L` with `L·Lᵀ = m`; fails unless `m` is positive definite.
pub fn cholesky(m: &SymmetricMatrix) -> Result<Matrix, LinalgError> {
    let n = m.dim();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = m.get(j, j);
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) {
            return Err(LinalgError::NotPsd {
                eigenvalue: d,
                tolerance: 0.0,
            });
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = m.get(i, j);
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

/// Solves `L·y = b` in place for lower-triangular `L`.
pub fn forward_substitute(l: &Matrix, b: &mut [f64]) {
    for i in 0..b.len() {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * b[k];
        }
        b[i] = s / l[(i, i)];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(n: usize, rng: &mut impl Rng) -> SymmetricMatrix {
        let mut s = SymmetricMatrix::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                s.set(i, j, rng.random_range(-1.0..1.0));
            }
        }
        s
    }

    fn assert_invariants(m: &SymmetricMatrix, eig: &EigenDecomposition) {
        let n = m.dim();
        let norm = m.inf_norm();
        for k in 0..n {
            let v = eig.vector(k);
            for i in 0..n {
                let av = dot(m.row(i), &v);
                assert!(
                    (av - eig.values[k] * v[i]).abs() <= 1e-8 * norm.max(1e-300),
                    "residual too large for pair {k}"
                );
            }
        }
        let vtv = eig.vectors.transpose().matmul(&eig.vectors).unwrap();
        assert!(vtv.max_abs_diff(&Matrix::identity(n)) <= 1e-10);
        assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn identity_has_unit_spectrum() {
        let m = SymmetricMatrix::identity(3);
        let eig = eigh(&m).unwrap();
        assert_eq!(eig.values, vec![1.0, 1.0, 1.0]);
        assert_invariants(&m, &eig);
    }

    #[test]
    fn diagonal_is_sorted_with_axis_vectors() {
        let m = SymmetricMatrix::from_diagonal(&[3.0, 1.0, 2.0]);
        let eig = eigh(&m).unwrap();
        assert_eq!(eig.values, vec![1.0, 2.0, 3.0]);
        for (k, axis) in [1usize, 2, 0].into_iter().enumerate() {
            let v = eig.vector(k);
            assert_eq!(v[axis].abs(), 1.0);
        }
    }

    #[test]
    fn random_20x20_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = random_symmetric(20, &mut rng);
        let eig = eigh(&m).unwrap();
        assert_invariants(&m, &eig);
        assert!(eig.reconstruct().max_abs_diff(m.as_matrix()) <= 1e-8);
    }

    #[test]
    fn trace_is_preserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..100 {
            let n = 1 + (trial * 97) % 100;
            let m = random_symmetric(n, &mut rng);
            let eig = eigh(&m).unwrap();
            let sum: f64 = eig.values.iter().sum();
            let tr = m.trace();
            assert!((tr - sum).abs() <= 1e-9 * tr.abs().max(1.0), "n={n}");
        }
    }

    #[test]
    fn zero_and_one_by_one() {
        let eig = eigh(&SymmetricMatrix::zeros(4)).unwrap();
        assert_eq!(eig.values, vec![0.0; 4]);
        let eig = eigh(&SymmetricMatrix::from_diagonal(&[-2.5])).unwrap();
        assert_eq!(eig.values, vec![-2.5]);
        assert_eq!(eigh(&SymmetricMatrix::zeros(0)).unwrap_err(), LinalgError::EmptyMatrix);
    }

    #[test]
    fn sqrt_of_identity_and_diagonal() {
        let s = psd_sqrt(&SymmetricMatrix::identity(3)).unwrap();
        assert_eq!(s, Matrix::identity(3));
        let s = psd_sqrt(&SymmetricMatrix::from_diagonal(&[4.0, 9.0])).unwrap();
        assert_eq!(s, Matrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 3.0]]).unwrap());
    }

    #[test]
    fn sqrt_reconstructs_gram_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = Matrix::from_vec(10, 10, (0..100).map(|_| rng.random_range(-1.0..1.0)).collect())
            .unwrap();
        let r = g.gram();
        let s = psd_sqrt(&r).unwrap();
        let ss = s.matmul(&s.transpose()).unwrap();
        assert!(ss.max_abs_diff(r.as_matrix()) <= 1e-8);
    }

    #[test]
    fn sqrt_of_singular_psd() {
        // rank one
        let g = Matrix::from_rows(&[vec![1.0], vec![2.0], vec![-1.0]]).unwrap();
        let r = g.gram();
        let s = psd_sqrt(&r).unwrap();
        let ss = s.matmul(&s.transpose()).unwrap();
        assert!(ss.max_abs_diff(r.as_matrix()) <= 1e-8);
    }

    #[test]
    fn cholesky_factor_and_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let g = Matrix::from_vec(6, 8, (0..48).map(|_| rng.random_range(-1.0..1.0)).collect())
            .unwrap();
        let r = g.gram();
        let l = cholesky(&r).unwrap();
        let llt = l.matmul(&l.transpose()).unwrap();
        assert!(llt.max_abs_diff(r.as_matrix()) <= 1e-12);
        let b = vec![1.0, -2.0, 0.5, 3.0, 0.0, 1.0];
        let mut y = b.clone();
        forward_substitute(&l, &mut y);
        for i in 0..6 {
            let back: f64 = (0..=i).map(|k| l[(i, k)] * y[k]).sum();
            assert!((back - b[i]).abs() < 1e-12);
        }
        assert!(cholesky(&SymmetricMatrix::from_diagonal(&[1.0, 0.0])).is_err());
    }

    #[test]
    fn sqrt_rejects_indefinite() {
        let m = SymmetricMatrix::from_diagonal(&[1.0, -0.5]);
        assert!(matches!(psd_sqrt(&m), Err(LinalgError::NotPsd { .. })));
    }

    #[test]
    fn ql_agrees_with_jacobi() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for n in [1usize, 2, 3, 7, 20, 64] {
            let m = random_symmetric(n, &mut rng);
            let a = eigh(&m).unwrap();
            let b = eigh_ql(&m).unwrap();
            for (x, y) in a.values.iter().zip(&b.values) {
                assert!((x - y).abs() < 1e-10, "n={n}: {x} vs {y}");
            }
            assert_invariants(&m, &b);
        }
    }

    #[test]
    fn ql_handles_repeated_and_zero_spectra() {
        let m = SymmetricMatrix::from_diagonal(&[2.0, 2.0, 0.0, 2.0]);
        let e = eigh_ql(&m).unwrap();
        assert_eq!(e.values, vec![0.0, 2.0, 2.0, 2.0]);
        assert_invariants(&m, &e);
        let z = SymmetricMatrix::zeros(5);
        assert!(eigh_ql(&z).unwrap().values.iter().all(|&v| v == 0.0));
    }
}
