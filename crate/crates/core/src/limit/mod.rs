//! Continuous-time limits of classical unitary walks.
//!
//! An h-family is a map `h ↦ U(h)` of classical unitaries. Writing the walk
//! increment as
//!
//! ```text
//! V_{n+1} - V_n = (A(h) - I) V_n + Σ_j B_j(h) X^j V_n,
//! ```
//!
//! the limit `V_{⌊t/h⌋} → U_t` exists when `(A - I)/h → Ã`, `B_j/√h → B̃_j`
//! and the rescaled tensor has limits `M^{ij}_0 = lim S^{ij}_0(h)`,
//! `M^{ij}_k = lim √h S^{ij}_k(h)`. The driving martingales `Z^j` then obey
//!
//! ```text
//! [Z^i, Z^j]_t       = M^{ij}_0 t + Σ_k M^{ij}_k Z^k_t
//! [conj(Z^i), Z^j]_t = δ_ij t + Σ_k conj(M^{ik}_j) Z^k_t
//! ```
//!
//! and `dU = Ã U dt + Σ_j B̃_j U dZ^j`.
//!
//! Limits are extracted numerically by polynomial extrapolation in `√h` to
//! zero over a decreasing set of probe step sizes.

mod driver;
mod sde;
mod weak;

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::channel::ClassicalUnitary;
use crate::error::{Error, Result};
use crate::numerics::{CMatrix, C64};
use crate::tensor3::tensor_from_rv;

pub use driver::{
    bracket_residual, synthesize_driver, verify_brackets, BracketEntry, BracketReport, DriverSpec, DriverTemplate,
};
pub use sde::{integrate_sde, integrate_sde_trial, mean_conjugation_exact, mean_unitary_exact, SdeModel, SdePath};
pub use weak::{
    first_jump_ks, weak_convergence_study, KsReport, LevelSummary, Observable, SdeReference, Sequential, TrialRunner,
    WeakConvergenceConfig, WeakConvergenceReport, WeakRow,
};

/// Default probe step sizes: geometric with ratio 1/4.
pub const DEFAULT_PROBE_HS: [f64; 4] = [0.1, 0.025, 0.00625, 0.0015625];

/// `Ã` and `B̃_j` of a limit equation.
#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    pub a_tilde: CMatrix,
    pub b_tilde: Vec<CMatrix>,
}

/// A family `h ↦ U(h)` of classical unitaries.
pub trait HFamily {
    fn name(&self) -> String;
    fn dim_sys(&self) -> usize;
    /// `N + 1`.
    fn dim_env(&self) -> usize;
    fn build(&self, h: f64) -> Result<ClassicalUnitary>;
    /// `Ã`, `B̃_j` in closed form, when known.
    fn analytic_generator(&self) -> Option<Generator> {
        None
    }
    /// `M^{ij}_k` in closed form, when known.
    fn analytic_tensors(&self) -> Option<LimitTensors> {
        None
    }
}

/// [`HFamily`] from a closure.
pub struct FnFamily {
    name: String,
    dim_sys: usize,
    dim_env: usize,
    builder: Box<dyn Fn(f64) -> Result<ClassicalUnitary> + Send + Sync>,
    generator: Option<Generator>,
}

impl FnFamily {
    pub fn new(
        name: impl Into<String>,
        dim_sys: usize,
        dim_env: usize,
        builder: impl Fn(f64) -> Result<ClassicalUnitary> + Send + Sync + 'static,
    ) -> Self {
        Self { name: name.into(), dim_sys, dim_env, builder: Box::new(builder), generator: None }
    }

    pub fn with_generator(mut self, g: Generator) -> Self {
        self.generator = Some(g);
        self
    }
}

impl HFamily for FnFamily {
    fn name(&self) -> String {
        self.name.clone()
    }
    fn dim_sys(&self) -> usize {
        self.dim_sys
    }
    fn dim_env(&self) -> usize {
        self.dim_env
    }
    fn build(&self, h: f64) -> Result<ClassicalUnitary> {
        (self.builder)(h)
    }
    fn analytic_generator(&self) -> Option<Generator> {
        self.generator.clone()
    }
}

/// Limit tensor `M^{ij}_k`, `i, j ∈ 1..=N`, `k ∈ 0..=N`.
#[derive(Clone, Debug, PartialEq)]
pub struct LimitTensors {
    n: usize,
    /// `coeffs[k]` is the `N×N` matrix `(M^{ij}_k)_{ij}`.
    coeffs: Vec<CMatrix>,
    /// Extrapolation error estimates, same layout (zero for exact input).
    errors: Vec<CMatrix>,
    pub probe_hs: Vec<f64>,
    /// Entries `(i, j, k)` (1-based `i`, `j`) whose extrapolation did not
    /// settle.
    pub flagged: Vec<(usize, usize, usize)>,
}

impl LimitTensors {
    /// Exact tensors from `M_0` and `M_1, …, M_N`.
    pub fn new(m0: CMatrix, mk: Vec<CMatrix>) -> Result<Self> {
        let n = m0.ensure_square()?;
        if mk.len() != n || mk.iter().any(|m| m.rows() != n || m.cols() != n) {
            return Err(Error::Dimension(format!("expected {n} matrices of size {n}x{n}")));
        }
        let mut coeffs = alloc::vec![m0];
        coeffs.extend(mk);
        if let Some(bad) =
            coeffs.iter().flat_map(|m| m.as_slice()).position(|z| !(z.re.is_finite() && z.im.is_finite()))
        {
            return Err(Error::NonFinite(bad));
        }
        let errors = alloc::vec![CMatrix::zeros(n, n); n + 1];
        Ok(Self { n, coeffs, errors, probe_hs: Vec::new(), flagged: Vec::new() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `M^{ij}_k` with 1-based `i, j` and `k ∈ 0..=N`.
    pub fn get(&self, i: usize, j: usize, k: usize) -> C64 {
        self.coeffs[k][(i - 1, j - 1)]
    }

    pub fn error(&self, i: usize, j: usize, k: usize) -> f64 {
        self.errors[k][(i - 1, j - 1)].re
    }

    pub fn m0(&self) -> &CMatrix {
        &self.coeffs[0]
    }

    /// `(M^{ij}_k)_{ij}` for `k ∈ 1..=N`.
    pub fn mk(&self, k: usize) -> &CMatrix {
        &self.coeffs[k]
    }

    pub fn max_error(&self) -> f64 {
        self.errors.iter().map(|e| e.max_abs()).fold(0.0, f64::max)
    }

    pub fn distance(&self, other: &LimitTensors) -> f64 {
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a.distance(b)).fold(0.0, f64::max)
    }
}

/// Neville extrapolation of `ys(x)` to `x = 0`. Returns the value, the
/// difference of the last two diagonal estimates, and whether that
/// difference grew relative to the previous one.
pub(crate) fn extrapolate_to_zero(xs: &[f64], ys: &[C64]) -> (C64, f64, bool) {
    let m = xs.len();
    let mut table: Vec<C64> = ys.to_vec();
    let mut diag = alloc::vec![ys[0]];
    for level in 1..m {
        for i in 0..(m - level) {
            let (xa, xb) = (xs[i], xs[i + level]);
            table[i] = (table[i + 1] * xa - table[i] * xb) / (xa - xb);
        }
        diag.push(table[0]);
    }
    let value = diag[m - 1];
    let err = if m >= 2 { (diag[m - 1] - diag[m - 2]).norm() } else { f64::INFINITY };
    let prev = if m >= 3 { (diag[m - 2] - diag[m - 3]).norm() } else { f64::INFINITY };
    let scale = 1f64.max(value.norm());
    let growing = err > prev && err > 1e-9 * scale;
    (value, err, growing)
}

fn check_probe_hs(hs: &[f64]) -> Result<()> {
    if hs.len() < 3 {
        return Err(Error::InvalidParameter(format!("need at least 3 probe step sizes, got {}", hs.len())));
    }
    if hs.iter().any(|h| !(h.is_finite() && *h > 0.0)) || hs.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter("probe step sizes must be positive and decreasing".into()));
    }
    Ok(())
}

/// `M^{ij}_0 = lim S^{ij}_0(h)`, `M^{ij}_k = lim √h S^{ij}_k(h)` by
/// extrapolation in `√h`. Entries whose error estimate grows are flagged,
/// not rejected.
pub fn estimate_limit_tensors(fam: &dyn HFamily, probe_hs: &[f64]) -> Result<LimitTensors> {
    check_probe_hs(probe_hs)?;
    let n = fam.dim_env() - 1;
    let tensors = probe_hs.iter().map(|h| Ok(tensor_from_rv(fam.build(*h)?.rv()))).collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = probe_hs.iter().map(|h| h.sqrt()).collect();
    let mut coeffs = alloc::vec![CMatrix::zeros(n, n); n + 1];
    let mut errors = alloc::vec![CMatrix::zeros(n, n); n + 1];
    let mut flagged = Vec::new();
    for k in 0..=n {
        for i in 1..=n {
            for j in 1..=n {
                let ys: Vec<C64> = tensors
                    .iter()
                    .zip(&xs)
                    .map(|(t, x)| if k == 0 { t.get(i, j, 0) } else { t.get(i, j, k) * *x })
                    .collect();
                let (v, e, growing) = extrapolate_to_zero(&xs, &ys);
                coeffs[k][(i - 1, j - 1)] = v;
                errors[k][(i - 1, j - 1)] = C64::new(e, 0.0);
                if growing {
                    flagged.push((i, j, k));
                }
            }
        }
    }
    Ok(LimitTensors { n, coeffs, errors, probe_hs: probe_hs.to_vec(), flagged })
}

/// Extrapolated `Ã = lim (A - I)/h` and `B̃_j = lim B_j/√h`.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorEstimate {
    pub generator: Generator,
    /// Largest extrapolation error over the entries of `Ã`.
    pub a_error: f64,
    /// Largest extrapolation error over the entries of each `B̃_j`.
    pub b_error: Vec<f64>,
}

pub fn estimate_generator(fam: &dyn HFamily, probe_hs: &[f64]) -> Result<GeneratorEstimate> {
    check_probe_hs(probe_hs)?;
    let ds = fam.dim_sys();
    let n = fam.dim_env() - 1;
    let cus = probe_hs.iter().map(|h| fam.build(*h)).collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = probe_hs.iter().map(|h| h.sqrt()).collect();
    let id = CMatrix::identity(ds);
    let extrapolate = |f: &dyn Fn(&ClassicalUnitary, f64) -> CMatrix| -> (CMatrix, f64) {
        let samples: Vec<CMatrix> = cus.iter().zip(probe_hs).map(|(cu, h)| f(cu, *h)).collect();
        let mut err = 0.0f64;
        let m = CMatrix::from_fn(ds, ds, |r, c| {
            let ys: Vec<C64> = samples.iter().map(|s| s[(r, c)]).collect();
            let (v, e, _) = extrapolate_to_zero(&xs, &ys);
            err = err.max(e);
            v
        });
        (m, err)
    };
    let (a_tilde, a_error) = extrapolate(&|cu, h| (cu.a() - &id).scale_re(1.0 / h));
    let mut b_tilde = Vec::with_capacity(n);
    let mut b_error = Vec::with_capacity(n);
    for j in 0..n {
        let (b, e) = extrapolate(&|cu, h| cu.b()[j].scale_re(1.0 / h.sqrt()));
        b_tilde.push(b);
        b_error.push(e);
    }
    Ok(GeneratorEstimate { generator: Generator { a_tilde, b_tilde }, a_error, b_error })
}

/// Limit equation of `fam`: closed-form generator and tensors when the
/// family provides them, extrapolated ones otherwise, with a synthesized
/// driver.
pub fn limit_model(fam: &dyn HFamily, probe_hs: &[f64], tol: f64) -> Result<(DriverTemplate, SdeModel)> {
    let generator = match fam.analytic_generator() {
        Some(g) => g,
        None => estimate_generator(fam, probe_hs)?.generator,
    };
    let tensors = match fam.analytic_tensors() {
        Some(m) => m,
        None => estimate_limit_tensors(fam, probe_hs)?,
    };
    let (template, driver) = synthesize_driver(&tensors, tol)?;
    Ok((template, SdeModel::new(generator.a_tilde, generator.b_tilde, driver)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::build_classical_unitary;
    use crate::numerics::{c, CVector};

    #[test]
    fn neville_recovers_polynomials() {
        let xs = [0.3, 0.15, 0.075, 0.0375];
        let ys: Vec<C64> = xs.iter().map(|x| c(2.0 - 3.0 * x + 0.5 * x * x, x * x)).collect();
        let (v, e, growing) = extrapolate_to_zero(&xs, &ys);
        assert!((v - c(2.0, 0.0)).norm() < 1e-12);
        assert!(e < 1e-10);
        assert!(!growing);
    }

    #[test]
    fn probe_set_is_validated() {
        let fam = FnFamily::new("x", 1, 2, |_| unreachable!());
        assert!(estimate_limit_tensors(&fam, &[0.1, 0.01]).is_err());
        assert!(estimate_limit_tensors(&fam, &[0.01, 0.1, 0.001]).is_err());
    }

    #[test]
    fn h_independent_family_has_vanishing_jump_tensors() {
        let fam = FnFamily::new("fixed", 1, 3, |_| {
            let s = |x: f64| x.sqrt();
            let rows = [
                [s(0.5), s(0.5), 0.0],
                [s(1.0 / 3.0), -s(1.0 / 3.0), s(1.0 / 3.0)],
                [s(1.0 / 6.0), -s(1.0 / 6.0), -2.0 * s(1.0 / 6.0)],
            ];
            let branches = rows.iter().map(|r| (CVector::from_real(r), CMatrix::identity(1))).collect();
            build_classical_unitary(branches)
        });
        let m = estimate_limit_tensors(&fam, &DEFAULT_PROBE_HS).unwrap();
        assert!(m.m0().distance(&CMatrix::identity(2)) < 1e-12);
        for k in 1..=2 {
            assert!(m.mk(k).max_abs() < 1e-12);
        }
        assert!(m.flagged.is_empty());
    }
}
