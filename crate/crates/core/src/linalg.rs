//! Dense symmetric linear algebra used by every other module: cyclic-Jacobi
//! eigendecomposition, PSD projection, tangent-space projectors, norms, and
//! a small Cholesky solver for the solver's normal equations.
//!
//! Matrices here are small (n <= 256) and dense by construction, so the
//! implementation favors determinism and simplicity over blocking.

use crate::error::{Error, Result};

/// Dense row-major rectangular matrix. Rows of a measurement matrix are the
/// vectors `a_i^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
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

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in &rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Mat {
            rows: r,
            cols: c,
            data,
        }
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// `self * x` for a column vector `x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }
}

/// Dense symmetric matrix; storage keeps `entries[i][j] == entries[j][i]`
/// exactly because every mutation writes both triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        SymMatrix {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = SymMatrix::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = 1.0;
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = SymMatrix::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            m.data[i * values.len() + i] = v;
        }
        m
    }

    /// Build from a function of (i, j); evaluated once per unordered pair so
    /// the two triangles are bitwise equal.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = SymMatrix::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                let v = f(i, j);
                m.data[i * dim + j] = v;
                m.data[j * dim + i] = v;
            }
        }
        m
    }

    /// Rank-one outer product `scale * v v^T`.
    pub fn outer(v: &[f64], scale: f64) -> Self {
        SymMatrix::from_fn(v.len(), |i, j| scale * v[i] * v[j])
    }

    /// Symmetrized rank-two product `x y^T + y x^T`.
    pub fn sym_outer_pair(x: &[f64], y: &[f64]) -> Self {
        assert_eq!(x.len(), y.len());
        SymMatrix::from_fn(x.len(), |i, j| x[i] * y[j] + y[i] * x[j])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    /// Write entry (i, j) and its mirror.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
        self.data[j * self.dim + i] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim);
        (0..self.dim).map(|i| dot(self.row(i), x)).collect()
    }

    /// Quadratic form `v^T M v`.
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        dot(&self.mul_vec(v), v)
    }

    pub fn scale(&self, c: f64) -> SymMatrix {
        let mut out = self.clone();
        out.scale_in_place(c);
        out
    }

    /// Multiply every entry by `c`; symmetry is preserved bitwise.
    pub fn scale_in_place(&mut self, c: f64) {
        for v in self.data.iter_mut() {
            *v *= c;
        }
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.dim, other.dim);
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        out
    }

    pub fn sub(&self, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.dim, other.dim);
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a -= b;
        }
        out
    }

    pub fn add_assign(&mut self, other: &SymMatrix) {
        assert_eq!(self.dim, other.dim);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// Frobenius inner product `<self, other>_F`.
    pub fn frob_dot(&self, other: &SymMatrix) -> f64 {
        assert_eq!(self.dim, other.dim);
        dot(&self.data, &other.data)
    }

    fn check_finite(&self) -> Result<()> {
        for i in 0..self.dim {
            for j in 0..self.dim {
                let v = self.get(i, j);
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        row: i,
                        col: j,
                        value: v,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Eigendecomposition `M = Q diag(values) Q^T` with `values` nonincreasing
/// and orthonormal columns in `vectors`.
#[derive(Debug, Clone)]
pub struct EigenDecomp {
    pub values: Vec<f64>,
    /// Column k of the n x n array is the eigenvector for `values[k]`.
    pub vectors: Mat,
}

impl EigenDecomp {
    /// Eigenvector for `values[k]`.
    pub fn vector(&self, k: usize) -> Vec<f64> {
        (0..self.vectors.rows)
            .map(|i| self.vectors.get(i, k))
            .collect()
    }

    /// Rebuild `Q diag(f(lambda)) Q^T`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let n = self.values.len();
        let mapped: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        SymMatrix::from_fn(n, |i, j| {
            (0..n)
                .map(|k| mapped[k] * self.vectors.get(i, k) * self.vectors.get(j, k))
                .sum()
        })
    }
}

/// Tangent space of the lifted rank-one manifold at a unit anchor `x0`:
/// symmetric matrices of the form `x x0^T + x0 x^T`.
#[derive(Debug, Clone)]
pub struct TangentSpace {
    anchor: Vec<f64>,
}

impl TangentSpace {
    pub fn new(anchor: Vec<f64>) -> Result<Self> {
        let norm = norm2(&anchor);
        let deviation = (norm - 1.0).abs();
        if deviation > 1e-12 {
            return Err(Error::NonUnitAnchor { deviation });
        }
        Ok(TangentSpace { anchor })
    }

    pub fn anchor(&self) -> &[f64] {
        &self.anchor
    }
}

/// Symmetric eigendecomposition by cyclic Jacobi sweeps.
///
/// Contract: `||Q L Q^T - M||_F <= 1e-10 * max(1, ||M||_F)` and
/// `||Q^T Q - I||_F <= 1e-10 * n`; eigenvalues sorted nonincreasing.
pub fn eig_sym(m: &SymMatrix) -> Result<EigenDecomp> {
    m.check_finite()?;
    let n = m.dim;
    if n == 0 {
        return Ok(EigenDecomp {
            values: vec![],
            vectors: Mat::zeros(0, 0),
        });
    }
    let mut a = m.data.clone();
    let mut q = Mat::zeros(n, n);
    for i in 0..n {
        q.set(i, i, 1.0);
    }

    let frob: f64 = dot(&a, &a).sqrt();
    let stop = 1e-15 * frob.max(1e-300);
    const MAX_SWEEPS: usize = 64;

    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[i * n + j] * a[i * n + j];
            }
        }
        if (2.0 * off).sqrt() <= stop {
            break;
        }
        for p in 0..n {
            for r in (p + 1)..n {
                let apr = a[p * n + r];
                if apr == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let arr = a[r * n + r];
                let tau = (arr - app) / (2.0 * apr);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // rotate rows/cols p and r of A
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akr = a[k * n + r];
                    a[k * n + p] = c * akp - s * akr;
                    a[k * n + r] = s * akp + c * akr;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let ark = a[r * n + k];
                    a[p * n + k] = c * apk - s * ark;
                    a[r * n + k] = s * apk + c * ark;
                }
                // accumulate eigenvectors
                for k in 0..n {
                    let qkp = q.get(k, p);
                    let qkr = q.get(k, r);
                    q.set(k, p, c * qkp - s * qkr);
                    q.set(k, r, s * qkp + c * qkr);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    order.sort_by(|&i, &j| diag[j].partial_cmp(&diag[i]).unwrap());

    let values: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let mut vectors = Mat::zeros(n, n);
    for (new_col, &old_col) in order.iter().enumerate() {
        for i in 0..n {
            vectors.set(i, new_col, q.get(i, old_col));
        }
    }
    Ok(EigenDecomp { values, vectors })
}

/// Frobenius-nearest PSD matrix: eigenvalue clipping at zero.
pub fn psd_project(m: &SymMatrix) -> Result<SymMatrix> {
    let eig = eig_sym(m)?;
    if eig.values.iter().all(|&l| l >= 0.0) {
        return Ok(m.clone());
    }
    if eig.values.iter().all(|&l| l <= 0.0) {
        return Ok(SymMatrix::zeros(m.dim));
    }
    Ok(eig.reconstruct_with(|l| l.max(0.0)))
}

/// Split `M` into its tangent-space component at `x0` and the complement:
/// `M_T = x x0^T + x0 x^T` with `x = M x0 - (x0^T M x0 / 2) x0`, and
/// `M_Tperp = M - M_T` (equivalently `P0 M P0` with `P0 = I - x0 x0^T`).
pub fn project_tangent(m: &SymMatrix, t: &TangentSpace) -> (SymMatrix, SymMatrix) {
    let x0 = t.anchor();
    assert_eq!(m.dim, x0.len(), "tangent anchor dimension");
    let mx0 = m.mul_vec(x0);
    let corner = dot(&mx0, x0);
    let x: Vec<f64> = mx0
        .iter()
        .zip(x0)
        .map(|(&mi, &x0i)| mi - 0.5 * corner * x0i)
        .collect();
    let m_t = SymMatrix::sym_outer_pair(&x, x0);
    let m_tperp = m.sub(&m_t);
    (m_t, m_tperp)
}

/// `||M_T||_F^2` via the scalar identity
/// `(x0^T M x0)^2 + 2 ||P0 M x0||^2`, cheaper than forming the projection.
pub fn tangent_norm_sq(m: &SymMatrix, x0: &[f64]) -> f64 {
    let mx0 = m.mul_vec(x0);
    let corner = dot(&mx0, x0);
    let proj_sq: f64 = mx0
        .iter()
        .zip(x0)
        .map(|(&mi, &x0i)| {
            let r = mi - corner * x0i;
            r * r
        })
        .sum();
    corner * corner + 2.0 * proj_sq
}

/// Operator (spectral) norm; for symmetric input this is max |eigenvalue|.
pub fn op_norm(m: &SymMatrix) -> f64 {
    match eig_sym(m) {
        Ok(eig) => eig
            .values
            .iter()
            .fold(0.0_f64, |acc, &l| acc.max(l.abs())),
        Err(_) => f64::NAN,
    }
}

pub fn frob_norm(m: &SymMatrix) -> f64 {
    dot(&m.data, &m.data).sqrt()
}

pub fn l1_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

pub fn linf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |acc, &x| acc.max(x.abs()))
}

pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

pub fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    debug_assert_eq!(y.len(), x.len());
    for i in 0..y.len() {
        y[i] += alpha * x[i];
    }
}

/// Cholesky factor of a symmetric positive-definite matrix (lower L with
/// `L L^T = M`).
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    pub fn factor(m: &SymMatrix) -> Result<Self> {
        m.check_finite()?;
        let n = m.dim;
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut d = m.get(j, j);
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if d <= 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "matrix not positive definite at pivot {j} (d = {d:e})"
                )));
            }
            let dj = d.sqrt();
            l[j * n + j] = dj;
            for i in (j + 1)..n {
                let mut s = m.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / dj;
            }
        }
        Ok(Cholesky { n, l })
    }

    /// Solve `M x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                y[i] -= self.l[i * n + k] * y[k];
            }
            y[i] /= self.l[i * n + i];
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                y[i] -= self.l[k * n + i] * y[k];
            }
            y[i] /= self.l[i * n + i];
        }
        y
    }
}

/// Reconstruction residual used by tests: `||Q L Q^T - M||_F`.
pub fn eig_reconstruction_error(m: &SymMatrix, eig: &EigenDecomp) -> f64 {
    frob_norm(&eig.reconstruct_with(|l| l).sub(m))
}

/// Orthonormality residual `||Q^T Q - I||_F`.
pub fn eig_orthonormality_error(eig: &EigenDecomp) -> f64 {
    let n = eig.values.len();
    let q = &eig.vectors;
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                s += q.get(k, i) * q.get(k, j);
            }
            let target = if i == j { 1.0 } else { 0.0 };
            acc += (s - target) * (s - target);
        }
    }
    acc.sqrt()
}
