//! The 3-tensor of an obtuse random variable.
//!
//! For an obtuse random variable `X` on `C^N`, with `X^0 ≡ 1`, the products
//! of coordinates close on the span of `{X^0, …, X^N}`:
//!
//! ```text
//! X^i X^j       = Σ_k S^{ij}_k X^k
//! conj(X^i) X^j = Σ_k conj(S^{ik}_j) X^k
//! ```
//!
//! with `S^{ij}_k = E[X^i X^j conj(X^k)]`. The family `{X^k}` is orthonormal
//! in `L²(p)`, so the multiplication operators are represented by normal
//! `(N+1)×(N+1)` matrices.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::numerics::{hermitian_eigen, CMatrix, CVector, C64};
use crate::obtuse::{validate_obtuse_with_tol, ObtuseRV};

/// Dense `(N+1)³` complex tensor `S^{ij}_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct ThreeTensor {
    n: usize,
    coeffs: Vec<C64>,
}

impl ThreeTensor {
    pub fn zeros(n: usize) -> Self {
        let m = n + 1;
        Self { n, coeffs: alloc::vec![C64::new(0.0, 0.0); m * m * m] }
    }

    /// Tensor from a flat `(i, j, k)`-major array of length `(N+1)³`.
    pub fn from_flat(n: usize, coeffs: Vec<C64>) -> Result<Self> {
        let m = n + 1;
        if coeffs.len() != m * m * m {
            return Err(Error::Dimension(format!(
                "expected {} coefficients for N = {n}, got {}",
                m * m * m,
                coeffs.len()
            )));
        }
        if let Some(bad) = coeffs.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite(bad));
        }
        Ok(Self { n, coeffs })
    }

    /// Index bound `N`; indices run over `0..=N`.
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        let m = self.n + 1;
        (i * m + j) * m + k
    }

    /// `S^{ij}_k`.
    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> C64 {
        self.coeffs[self.offset(i, j, k)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, value: C64) {
        let o = self.offset(i, j, k);
        self.coeffs[o] = value;
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.coeffs
    }

    /// Entries with modulus above `threshold`, as `(i, j, k, value)`.
    pub fn nonzero(&self, threshold: f64) -> Vec<(usize, usize, usize, C64)> {
        let m = self.n + 1;
        let mut out = Vec::new();
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    let z = self.get(i, j, k);
                    if z.norm() > threshold {
                        out.push((i, j, k, z));
                    }
                }
            }
        }
        out
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i > self.n {
            return Err(Error::IndexOutOfRange { index: i, max: self.n });
        }
        Ok(())
    }
}

/// `S^{ij}_k = Σ_m p_m X^i(m) X^j(m) conj(X^k(m))`.
pub fn tensor_from_rv(rv: &ObtuseRV) -> ThreeTensor {
    let sys = rv.system();
    let n = sys.dim();
    let mut t = ThreeTensor::zeros(n);
    for (w, p) in sys.probabilities().iter().enumerate() {
        for i in 0..=n {
            let xi = sys.coordinate(w, i);
            for j in 0..=n {
                let xij = xi * sys.coordinate(w, j) * *p;
                for k in 0..=n {
                    let o = t.offset(i, j, k);
                    t.coeffs[o] += xij * sys.coordinate(w, k).conj();
                }
            }
        }
    }
    t
}

/// The four symmetry families of a doubly symmetric tensor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SymmetryFamily {
    /// `S^{i0}_k = δ_ik`.
    Unit,
    /// `S^{ij}_k = S^{ji}_k`.
    Swap,
    /// `Σ_m S^{im}_j S^{kl}_m` symmetric in `(i, k)`.
    Associativity,
    /// `Σ_m S^{im}_j conj(S^{lm}_k)` symmetric in `(i, k)`.
    ConjugateAssociativity,
}

impl SymmetryFamily {
    pub const ALL: [SymmetryFamily; 4] = [
        SymmetryFamily::Unit,
        SymmetryFamily::Swap,
        SymmetryFamily::Associativity,
        SymmetryFamily::ConjugateAssociativity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SymmetryFamily::Unit => "unit",
            SymmetryFamily::Swap => "swap",
            SymmetryFamily::Associativity => "associativity",
            SymmetryFamily::ConjugateAssociativity => "conjugate-associativity",
        }
    }
}

impl fmt::Display for SymmetryFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Largest violation of each symmetry family. Violations of the quadratic
/// families are relative to `max(1, |lhs|, |rhs|)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetryReport {
    pub tol: f64,
    pub unit: f64,
    pub swap: f64,
    pub associativity: f64,
    pub conjugate_associativity: f64,
}

impl SymmetryReport {
    pub fn violation(&self, family: SymmetryFamily) -> f64 {
        match family {
            SymmetryFamily::Unit => self.unit,
            SymmetryFamily::Swap => self.swap,
            SymmetryFamily::Associativity => self.associativity,
            SymmetryFamily::ConjugateAssociativity => self.conjugate_associativity,
        }
    }

    /// Families whose violation exceeds the tolerance (NaN counts as failure).
    pub fn failing(&self) -> Vec<SymmetryFamily> {
        SymmetryFamily::ALL.into_iter().filter(|f| !(self.violation(*f) <= self.tol)).collect()
    }

    pub fn passes(&self) -> bool {
        self.failing().is_empty()
    }

    pub fn max_violation(&self) -> f64 {
        SymmetryFamily::ALL.iter().map(|f| self.violation(*f)).fold(0.0, f64::max)
    }
}

impl fmt::Display for SymmetryReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for fam in SymmetryFamily::ALL {
            let v = self.violation(fam);
            let verdict = if v <= self.tol { "ok" } else { "FAIL" };
            writeln!(f, "{:<24} {:.3e}  {verdict}", fam.name(), v)?;
        }
        Ok(())
    }
}

fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / 1f64.max(a.norm()).max(b.norm())
}

/// Checks the unit, swap and both associativity families.
pub fn verify_double_symmetry(t: &ThreeTensor, tol: f64) -> SymmetryReport {
    let m = t.n + 1;
    let mut unit = 0.0f64;
    let mut swap = 0.0f64;
    for i in 0..m {
        for k in 0..m {
            let delta = if i == k { 1.0 } else { 0.0 };
            unit = unit.max((t.get(i, 0, k) - C64::new(delta, 0.0)).norm());
            for j in 0..m {
                swap = swap.max(rel(t.get(i, j, k), t.get(j, i, k)));
            }
        }
    }

    // P[(i, j, k, l)] = Σ_m S^{im}_j S^{kl}_m and Q likewise with the
    // conjugate; both must be invariant under i <-> k.
    let mut assoc = 0.0f64;
    let mut conj_assoc = 0.0f64;
    let p = |i: usize, j: usize, k: usize, l: usize| -> C64 { (0..m).map(|r| t.get(i, r, j) * t.get(k, l, r)).sum() };
    let q = |i: usize, j: usize, k: usize, l: usize| -> C64 {
        (0..m).map(|r| t.get(i, r, j) * t.get(l, r, k).conj()).sum()
    };
    for i in 0..m {
        for k in i..m {
            for j in 0..m {
                for l in 0..m {
                    assoc = assoc.max(rel(p(i, j, k, l), p(k, j, i, l)));
                    conj_assoc = conj_assoc.max(rel(q(i, j, k, l), q(k, j, i, l)));
                }
            }
        }
    }
    SymmetryReport { tol, unit, swap, associativity: assoc, conjugate_associativity: conj_assoc }
}

/// Worst pointwise residuals of the two product expansions.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductReport {
    pub tol: f64,
    /// `max |X^i X^j - Σ_k S^{ij}_k X^k|`, relative.
    pub plain: f64,
    /// `max |conj(X^i) X^j - Σ_k conj(S^{ik}_j) X^k|`, relative.
    pub conjugate: f64,
}

impl ProductReport {
    pub fn max_residual(&self) -> f64 {
        self.plain.max(self.conjugate)
    }

    pub fn passes(&self) -> bool {
        self.max_residual() <= self.tol
    }
}

/// Checks both product expansions on every outcome for all `i, j ∈ 0..=N`.
/// Residuals are relative to `max(1, |lhs|, Σ_k |term_k|)`.
pub fn verify_product_relation(t: &ThreeTensor, rv: &ObtuseRV, tol: f64) -> Result<ProductReport> {
    let sys = rv.system();
    if sys.dim() != t.n {
        return Err(Error::Dimension(format!("tensor has N = {}, random variable has N = {}", t.n, sys.dim())));
    }
    let m = t.n + 1;
    let mut plain = 0.0f64;
    let mut conjugate = 0.0f64;
    for w in 0..sys.outcomes() {
        let x: Vec<C64> = (0..m).map(|k| sys.coordinate(w, k)).collect();
        for i in 0..m {
            for j in 0..m {
                let lhs = x[i] * x[j];
                let mut rhs = C64::new(0.0, 0.0);
                let mut mag = lhs.norm().max(1.0);
                let mut mag_c = mag;
                let lhs_c = x[i].conj() * x[j];
                let mut rhs_c = C64::new(0.0, 0.0);
                for k in 0..m {
                    let term = t.get(i, j, k) * x[k];
                    let term_c = t.get(i, k, j).conj() * x[k];
                    mag += term.norm();
                    mag_c += term_c.norm();
                    rhs += term;
                    rhs_c += term_c;
                }
                plain = plain.max((lhs - rhs).norm() / mag);
                conjugate = conjugate.max((lhs_c - rhs_c).norm() / mag_c);
            }
        }
    }
    Ok(ProductReport { tol, plain, conjugate })
}

/// Matrix of multiplication by `X^i` in the basis `{X^0, …, X^N}`:
/// entry `(k, j)` is `S^{ij}_k`.
pub fn multiplication_matrix(t: &ThreeTensor, i: usize) -> Result<CMatrix> {
    t.check_index(i)?;
    let m = t.n + 1;
    Ok(CMatrix::from_fn(m, m, |k, j| t.get(i, j, k)))
}

/// Matrix of multiplication by `conj(X^i)`: entry `(k, j)` is
/// `conj(S^{ik}_j)`. For a tensor built from a random variable this is the
/// adjoint of [`multiplication_matrix`].
pub fn conjugate_multiplication_matrix(t: &ThreeTensor, i: usize) -> Result<CMatrix> {
    t.check_index(i)?;
    let m = t.n + 1;
    Ok(CMatrix::from_fn(m, m, |k, j| t.get(i, k, j).conj()))
}

// Fixed, irregular weights for the Hermitian probe; a few alternatives are
// tried in case a choice happens to merge two eigenvalues.
const PROBE_WEIGHTS: [(f64, f64); 4] =
    [(0.7548776662, 0.5698402910), (0.3248, -0.8141), (-0.5772156649, 0.2718281828), (0.9183, 0.1416)];

/// Recovers an obtuse random variable from its tensor by simultaneous
/// diagonalisation of the commuting normal family `{M_{X^i}}`.
///
/// The joint eigenvector of outcome `m` is `√p_m (1, conj(v_m))`, so
/// `p_m = |u_m[0]|²` and `v_m^j = conj(u_m[j] / u_m[0])`. Outcomes come out in
/// eigenvalue order of the probe matrix, not in any canonical order.
pub fn rv_from_tensor(t: &ThreeTensor, tol: f64) -> Result<ObtuseRV> {
    let report = verify_double_symmetry(t, tol);
    if !report.passes() {
        let names: Vec<&str> = report.failing().iter().map(|f| f.name()).collect();
        return Err(Error::Consistency(format!("tensor is not doubly symmetric ({})", names.join(", "))));
    }
    let n = t.n;
    let m = n + 1;
    let mats: Vec<CMatrix> = (1..m).map(|i| multiplication_matrix(t, i)).collect::<Result<Vec<_>>>()?;
    let mut last_err = String::new();
    for attempt in 0..PROBE_WEIGHTS.len() {
        let mut probe = CMatrix::zeros(m, m);
        for (idx, mi) in mats.iter().enumerate() {
            let (a, b) = PROBE_WEIGHTS[(idx + attempt) % PROBE_WEIGHTS.len()];
            let scale = 1.0 + idx as f64 * 0.61803398875;
            let c = C64::new(a, b) * scale;
            probe += &mi.scale(c);
            probe += &mi.adjoint().scale(c.conj());
        }
        let eig = hermitian_eigen(&probe)?;
        let vecs = &eig.vectors;
        // Every multiplication matrix must be diagonal in the probe basis.
        let off_diag = mats
            .iter()
            .map(|mi| {
                let d = &(&vecs.adjoint() * mi) * vecs;
                let mut off = 0.0f64;
                for r in 0..m {
                    for s in 0..m {
                        if r != s {
                            off = off.max(d[(r, s)].norm());
                        }
                    }
                }
                off / mi.max_abs().max(1.0)
            })
            .fold(0.0, f64::max);
        if off_diag > tol.max(1e-9) {
            last_err = format!("probe basis does not diagonalise the family ({off_diag:.2e})");
            continue;
        }
        let mut vectors = Vec::with_capacity(m);
        for col in 0..m {
            let u = vecs.column(col);
            let u0 = u[0];
            if u0.norm() < 1e-12 {
                return Err(Error::VanishingOverlap(col + 1));
            }
            vectors.push(CVector::new((1..m).map(|j| (u[j] / u0).conj()).collect())?);
        }
        match validate_obtuse_with_tol(vectors, tol.max(1e-9)) {
            Ok(sys) => return Ok(sys.random_variable()),
            Err(e) => last_err = format!("{e}"),
        }
    }
    Err(Error::Consistency(format!("could not diagonalise tensor: {last_err}")))
}
