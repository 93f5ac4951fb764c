//! Dense complex linear algebra.
//!
//! [`CMatrix`] is a row-major dense matrix of [`C64`]; [`CVector`] is a plain
//! complex column vector. Everything here is sized for desk-scale problems
//! (dimensions up to about a hundred).

mod eigen;
mod expm;
mod lu;
pub mod random;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

pub use eigen::{hermitian_eigen, HermitianEigen};
pub use expm::{expm_pade, expm_skew_hermitian, matrix_exponential};
pub use lu::solve;

pub type C64 = num_complex::Complex64;

/// Default tolerance for structural checks (unitarity, orthonormality).
pub const STRUCT_TOL: f64 = 1e-10;
/// Default tolerance for algebraic identities on small dimensions.
pub const ALGEBRA_TOL: f64 = 1e-12;

#[inline]
pub(crate) fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Dense complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMatrix {
    /// Builds a matrix from row-major entries, rejecting wrong lengths and
    /// non-finite values.
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension(format!("empty shape {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!("{} entries for a {rows}x{cols} matrix", data.len())));
        }
        if let Some(i) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![C64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Real matrix from nested rows. Panics on ragged input.
    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let cl = rows[0].len();
        Self::from_fn(r, cl, |i, j| {
            assert_eq!(rows[i].len(), cl, "ragged rows");
            C64::new(rows[i][j], 0.0)
        })
    }

    /// Complex matrix from nested rows. Panics on ragged input.
    pub fn from_rows(rows: &[&[C64]]) -> Self {
        let r = rows.len();
        let cl = rows[0].len();
        Self::from_fn(r, cl, |i, j| {
            assert_eq!(rows[i].len(), cl, "ragged rows");
            rows[i][j]
        })
    }

    pub fn diagonal(d: &[C64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, z) in d.iter().enumerate() {
            m[(i, i)] = *z;
        }
        m
    }

    /// `|u⟩⟨v|`.
    pub fn outer(u: &CVector, v: &CVector) -> Self {
        Self::from_fn(u.dim(), v.dim(), |i, j| u[i] * v[j].conj())
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(cols: &[CVector]) -> Result<Self> {
        let n = cols.first().ok_or_else(|| Error::Dimension("no columns".into()))?.dim();
        if cols.iter().any(|v| v.dim() != n) {
            return Err(Error::Dimension("columns of unequal length".into()));
        }
        Ok(Self::from_fn(n, cols.len(), |i, j| cols[j][i]))
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
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn column(&self, j: usize) -> CVector {
        CVector::from_vec((0..self.rows).map(|i| self[(i, j)]).collect())
    }

    pub fn ensure_square(&self) -> Result<usize> {
        if self.is_square() {
            Ok(self.rows)
        } else {
            Err(Error::NotSquare { rows: self.rows, cols: self.cols })
        }
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> Self {
        self.map(|z| z.conj())
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| f(*z)).collect() }
    }

    pub fn scale(&self, s: C64) -> Self {
        self.map(|z| z * s)
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.map(|z| z * s)
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        (0..self.cols).map(|j| (0..self.rows).map(|i| self[(i, j)].norm()).sum::<f64>()).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `‖self - other‖_F`; panics on shape mismatch.
    pub fn distance(&self, other: &CMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "shape mismatch");
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn matmul(&self, rhs: &CMatrix) -> Result<CMatrix> {
        if self.cols != rhs.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = CMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                let dst = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (d, b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &CVector) -> Result<CVector> {
        if self.cols != v.dim() {
            return Err(Error::Dimension(format!(
                "cannot apply {}x{} to vector of length {}",
                self.rows,
                self.cols,
                v.dim()
            )));
        }
        Ok(CVector::from_vec((0..self.rows).map(|i| (0..self.cols).map(|j| self[(i, j)] * v[j]).sum()).collect()))
    }

    /// Kronecker product: entry `(i·rows_b + k, j·cols_b + l) = a[i,j]·b[k,l]`.
    pub fn kron(&self, b: &CMatrix) -> CMatrix {
        let (rb, cb) = (b.rows, b.cols);
        CMatrix::from_fn(self.rows * rb, self.cols * cb, |r, s| self[(r / rb, s / cb)] * b[(r % rb, s % cb)])
    }

    /// `‖m m† - I‖_F ≤ tol` and `‖m† m - I‖_F ≤ tol`.
    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_residual().is_some_and(|r| r <= tol)
    }

    /// Larger of `‖m m† - I‖_F` and `‖m† m - I‖_F`; `None` when not square.
    pub fn unitarity_residual(&self) -> Option<f64> {
        if !self.is_square() {
            return None;
        }
        let id = CMatrix::identity(self.rows);
        let a = self.adjoint();
        let r1 = (self * &a).distance(&id);
        let r2 = (&a * self).distance(&id);
        Some(r1.max(r2))
    }

    pub fn hermiticity_residual(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        self.distance(&self.adjoint())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_residual() <= tol
    }

    /// Checks Hermitian, positive semidefinite (eigenvalue floor `-tol`) and
    /// unit trace.
    pub fn check_density(&self, tol: f64) -> Result<()> {
        self.ensure_square()?;
        let h = self.hermiticity_residual();
        if h > tol {
            return Err(Error::NotDensity(format!("hermiticity residual {h:.3e}")));
        }
        let tr = self.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > tol {
            return Err(Error::NotDensity(format!("trace {} + {}i", tr.re, tr.im)));
        }
        let eig = hermitian_eigen(self)?;
        let min = eig.values.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -tol {
            return Err(Error::NotDensity(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(())
    }

    pub fn commutator(&self, other: &CMatrix) -> CMatrix {
        &(self * other) - &(other * self)
    }

    /// Sub-block `[r0, r0+nr) x [c0, c0+nc)`.
    pub fn block(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> CMatrix {
        CMatrix::from_fn(nr, nc, |i, j| self[(r0 + i, c0 + j)])
    }

    /// Row-major vectorisation.
    pub fn vec_rows(&self) -> CVector {
        CVector::from_vec(self.data.clone())
    }

    /// Inverse of [`vec_rows`](Self::vec_rows).
    pub fn from_vec_rows(rows: usize, cols: usize, v: &CVector) -> Result<CMatrix> {
        CMatrix::new(rows, cols, v.as_slice().to_vec())
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    /// Panics on incompatible shapes; use [`CMatrix::matmul`] for a `Result`.
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        self.matmul(rhs).expect("incompatible shapes in matrix product")
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch");
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch");
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Neg for &CMatrix {
    type Output = CMatrix;
    fn neg(self) -> CMatrix {
        self.map(|z| -z)
    }
}

impl AddAssign<&CMatrix> for CMatrix {
    fn add_assign(&mut self, rhs: &CMatrix) {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

/// `a ⊗ b` with the system-first block convention.
pub fn tensor_product(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kron(b)
}

/// `Tr_K(m)` for `m` acting on `H ⊗ K`, `dim H = dim_sys`, `dim K = dim_env`.
pub fn partial_trace_env(m: &CMatrix, dim_sys: usize, dim_env: usize) -> Result<CMatrix> {
    let n = dim_sys * dim_env;
    if m.rows() != n || m.cols() != n {
        return Err(Error::Dimension(format!("partial trace expects {n}x{n}, got {}x{}", m.rows(), m.cols())));
    }
    Ok(CMatrix::from_fn(dim_sys, dim_sys, |s, t| (0..dim_env).map(|e| m[(s * dim_env + e, t * dim_env + e)]).sum()))
}

/// `(I ⊗ ⟨a|) m (I ⊗ |b⟩)`, the `H`-operator block of `m` between
/// environment vectors `a` and `b`.
pub fn env_matrix_element(m: &CMatrix, dim_sys: usize, a: &CVector, b: &CVector) -> Result<CMatrix> {
    let de = a.dim();
    if b.dim() != de || m.rows() != dim_sys * de || m.cols() != dim_sys * de {
        return Err(Error::Dimension("environment matrix element shape".into()));
    }
    Ok(CMatrix::from_fn(dim_sys, dim_sys, |s, t| {
        let mut acc = C64::new(0.0, 0.0);
        for e in 0..de {
            let ae = a[e].conj();
            if ae == C64::new(0.0, 0.0) {
                continue;
            }
            for f in 0..de {
                acc += ae * m[(s * de + e, t * de + f)] * b[f];
            }
        }
        acc
    }))
}

/// Complex column vector.
#[derive(Clone, Debug, PartialEq)]
pub struct CVector(Vec<C64>);

impl CVector {
    pub fn new(entries: Vec<C64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Dimension("empty vector".into()));
        }
        if let Some(i) = entries.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self(entries))
    }

    pub(crate) fn from_vec(entries: Vec<C64>) -> Self {
        Self(entries)
    }

    pub fn from_real(entries: &[f64]) -> Self {
        Self(entries.iter().map(|x| C64::new(*x, 0.0)).collect())
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![C64::new(0.0, 0.0); n])
    }

    /// Canonical basis vector `e_i` of `C^n`.
    pub fn basis(n: usize, i: usize) -> Self {
        let mut v = Self::zeros(n);
        v.0[i] = C64::new(1.0, 0.0);
        v
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.0
    }

    pub fn iter(&self) -> core::slice::Iter<'_, C64> {
        self.0.iter()
    }

    /// `⟨self, other⟩`, conjugate-linear in `self`.
    pub fn inner(&self, other: &CVector) -> C64 {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch in inner product");
        self.0.iter().zip(&other.0).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self(self.0.iter().map(|z| z * s).collect())
    }

    pub fn conj(&self) -> Self {
        Self(self.0.iter().map(|z| z.conj()).collect())
    }

    pub fn axpy(&mut self, a: C64, x: &CVector) {
        for (y, xi) in self.0.iter_mut().zip(&x.0) {
            *y += a * xi;
        }
    }

    pub fn distance(&self, other: &CVector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt()
    }
}

impl Index<usize> for CVector {
    type Output = C64;
    #[inline]
    fn index(&self, i: usize) -> &C64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for CVector {
    #[inline]
    fn index_mut(&mut self, i: usize) -> &mut C64 {
        &mut self.0[i]
    }
}

/// Largest deviation from orthonormality, `max |⟨u_i, u_j⟩ - δ_ij|`.
pub fn orthonormality_residual(vs: &[CVector]) -> f64 {
    let mut worst = 0.0f64;
    for (i, a) in vs.iter().enumerate() {
        for (j, b) in vs.iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((a.inner(b) - C64::new(target, 0.0)).norm());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn pseudo_random(rows: usize, cols: usize, seed: u64) -> CMatrix {
        let mut s = seed;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        CMatrix::from_fn(rows, cols, |_, _| C64::new(next(), next()))
    }

    #[test]
    fn identity_kron_identity() {
        let i2 = CMatrix::identity(2);
        assert_eq!(tensor_product(&i2, &i2), CMatrix::identity(4));
    }

    #[test]
    fn kron_block_convention() {
        let x = CMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let k = tensor_product(&x, &CMatrix::identity(2));
        let expected = CMatrix::from_real_rows(&[
            &[0.0, 0.0, 1.0, 0.0],
            &[0.0, 0.0, 0.0, 1.0],
            &[1.0, 0.0, 0.0, 0.0],
            &[0.0, 1.0, 0.0, 0.0],
        ]);
        assert_eq!(k, expected);
    }

    #[test]
    fn kron_mixed_product() {
        let a = pseudo_random(2, 2, 1);
        let b = pseudo_random(3, 3, 2);
        let cm = pseudo_random(2, 2, 3);
        let d = pseudo_random(3, 3, 4);
        let lhs = &a.kron(&b) * &cm.kron(&d);
        let rhs = (&a * &cm).kron(&(&b * &d));
        assert!(lhs.distance(&rhs) < 1e-12);
    }

    #[test]
    fn partial_trace_of_product_state() {
        let rho = CMatrix::from_real_rows(&[&[0.7, 0.1], &[0.1, 0.3]]);
        let omega = pseudo_random(3, 3, 9);
        let pt = partial_trace_env(&rho.kron(&omega), 2, 3).unwrap();
        assert!(pt.distance(&rho.scale(omega.trace())) < 1e-14);
    }

    #[test]
    fn partial_trace_of_bell_projector() {
        let s = 0.5f64.sqrt();
        let bell = CVector::from_real(&[s, 0.0, 0.0, s]);
        let pt = partial_trace_env(&CMatrix::outer(&bell, &bell), 2, 2).unwrap();
        assert!(pt.distance(&CMatrix::identity(2).scale_re(0.5)) < 1e-15);
    }

    #[test]
    fn partial_trace_preserves_trace() {
        let g = pseudo_random(4, 4, 17);
        let m = &g * &g.adjoint();
        let pt = partial_trace_env(&m, 2, 2).unwrap();
        assert!((pt.trace() - m.trace()).norm() < 1e-12);
    }

    #[test]
    fn partial_trace_rejects_bad_shape() {
        assert!(partial_trace_env(&CMatrix::identity(5), 2, 2).is_err());
    }

    #[test]
    fn unitary_checks() {
        assert!(CMatrix::identity(3).is_unitary(1e-12));
        assert!(!CMatrix::identity(3).scale_re(2.0).is_unitary(1e-12));
        assert!(!pseudo_random(2, 3, 1).is_unitary(1.0));
    }

    #[test]
    fn new_rejects_nan_and_bad_len() {
        assert!(CMatrix::new(1, 2, vec![C64::new(0.0, 0.0)]).is_err());
        assert!(CMatrix::new(1, 1, vec![C64::new(f64::NAN, 0.0)]).is_err());
    }

    #[test]
    fn env_matrix_element_picks_blocks() {
        let u = pseudo_random(6, 6, 5);
        let e1 = CVector::basis(3, 1);
        let e2 = CVector::basis(3, 2);
        let blk = env_matrix_element(&u, 2, &e1, &e2).unwrap();
        for s in 0..2 {
            for t in 0..2 {
                assert_eq!(blk[(s, t)], u[(s * 3 + 1, t * 3 + 2)]);
            }
        }
    }
}
