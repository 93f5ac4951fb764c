//! Driving martingales: Brownian / compensated Poisson mixtures.
//!
//! A driver writes `Z = C Y` with `Y = (W_1, …, W_b, P̃_1, …, P̃_q)` where the
//! `W_a` are independent standard Brownian motions and
//! `P̃_a = (N_a - λ_a t)/√λ_a` are compensated, normalised Poisson processes.
//! Since `[W_a, W_a]_t = t` and `[P̃_a, P̃_a]_t = t + P̃_a(t)/√λ_a`, the
//! bracket relations of the limit reduce to finitely many algebraic
//! identities in `C`, `λ` and `M`.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};

use super::LimitTensors;
use crate::error::{Error, Result};
use crate::numerics::{CMatrix, C64};
use crate::rng::{derive_seed, stream_rng};
use crate::stats::Moments;

/// Linear combination of independent Brownian motions and compensated,
/// normalised Poisson processes. Columns of `mixing` are ordered Brownian
/// first, then Poisson.
#[derive(Clone, Debug, PartialEq)]
pub struct DriverSpec {
    pub n_brownian: usize,
    pub n_poisson: usize,
    pub intensities: Vec<f64>,
    /// `N × (n_brownian + n_poisson)`.
    pub mixing: CMatrix,
}

impl DriverSpec {
    pub fn new(n_brownian: usize, intensities: Vec<f64>, mixing: CMatrix) -> Result<Self> {
        let spec = Self { n_brownian, n_poisson: intensities.len(), intensities, mixing };
        spec.validate()?;
        Ok(spec)
    }

    /// `Z = (W_1, …, W_n)`.
    pub fn brownian(n: usize) -> Self {
        Self { n_brownian: n, n_poisson: 0, intensities: Vec::new(), mixing: CMatrix::identity(n) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.intensities.len() != self.n_poisson {
            return Err(Error::Dimension(format!(
                "{} intensities for {} Poisson processes",
                self.intensities.len(),
                self.n_poisson
            )));
        }
        if self.mixing.cols() != self.components() {
            return Err(Error::Dimension(format!(
                "mixing matrix has {} columns, expected {}",
                self.mixing.cols(),
                self.components()
            )));
        }
        if let Some(l) = self.intensities.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::InvalidParameter(format!("intensity {l} is not positive")));
        }
        Ok(())
    }

    /// Number of driven coordinates `N`.
    pub fn dim(&self) -> usize {
        self.mixing.rows()
    }

    pub fn components(&self) -> usize {
        self.n_brownian + self.n_poisson
    }

    /// Column index of Poisson process `a`.
    pub fn poisson_column(&self, a: usize) -> usize {
        self.n_brownian + a
    }
}

/// Largest violation of the algebraic bracket identities:
///
/// - `Σ_a C_ia C_ja = M^{ij}_0` and `Σ_a conj(C_ia) C_ja = δ_ij`;
/// - for a Brownian column `a`: `Σ_k M^{ij}_k C_ka = 0` and
///   `Σ_k conj(M^{ik}_j) C_ka = 0`;
/// - for a Poisson column `a`: `Σ_k M^{ij}_k C_ka = C_ia C_ja/√λ_a` and
///   `Σ_k conj(M^{ik}_j) C_ka = conj(C_ia) C_ja/√λ_a`.
pub fn bracket_residual(d: &DriverSpec, m: &LimitTensors) -> Result<f64> {
    d.validate()?;
    let n = m.n();
    if d.dim() != n {
        return Err(Error::Dimension(format!("driver has {} coordinates, tensors N = {n}", d.dim())));
    }
    let cm = &d.mixing;
    let mut worst = 0.0f64;
    for i in 1..=n {
        for j in 1..=n {
            let (mut t_plain, mut t_conj) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
            for a in 0..d.components() {
                t_plain += cm[(i - 1, a)] * cm[(j - 1, a)];
                t_conj += cm[(i - 1, a)].conj() * cm[(j - 1, a)];
            }
            let delta = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((t_plain - m.get(i, j, 0)).norm());
            worst = worst.max((t_conj - C64::new(delta, 0.0)).norm());
            for a in 0..d.components() {
                let mut plain = C64::new(0.0, 0.0);
                let mut conj = C64::new(0.0, 0.0);
                for k in 1..=n {
                    plain += m.get(i, j, k) * cm[(k - 1, a)];
                    conj += m.get(i, k, j).conj() * cm[(k - 1, a)];
                }
                let (want_plain, want_conj) = if a < d.n_brownian {
                    (C64::new(0.0, 0.0), C64::new(0.0, 0.0))
                } else {
                    let s = 1.0 / d.intensities[a - d.n_brownian].sqrt();
                    (cm[(i - 1, a)] * cm[(j - 1, a)] * s, cm[(i - 1, a)].conj() * cm[(j - 1, a)] * s)
                };
                worst = worst.max((plain - want_plain).norm()).max((conj - want_conj).norm());
            }
        }
    }
    Ok(worst)
}

/// The driver families tried by [`synthesize_driver`], in order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DriverTemplate {
    /// `M_k = 0`: Brownian motions with the covariance fixed by `M_0`.
    Brownian,
    /// One process per coordinate: Poisson with jump `M^{jj}_j` when that is
    /// non-zero, Brownian otherwise.
    PerDirection,
    /// `Z^1 = i W/√2 + P̃/√2`, `Z^2 = W/√2 + i P̃/√2` with `λ = 1`.
    MixedPlane,
}

impl DriverTemplate {
    pub const ALL: [DriverTemplate; 3] =
        [DriverTemplate::Brownian, DriverTemplate::PerDirection, DriverTemplate::MixedPlane];

    pub fn name(self) -> &'static str {
        match self {
            DriverTemplate::Brownian => "brownian",
            DriverTemplate::PerDirection => "per-direction",
            DriverTemplate::MixedPlane => "mixed-plane",
        }
    }

    fn candidate(self, m: &LimitTensors, tol: f64) -> Option<DriverSpec> {
        match self {
            DriverTemplate::Brownian => brownian_template(m, tol),
            DriverTemplate::PerDirection => per_direction_template(m, tol),
            DriverTemplate::MixedPlane => mixed_plane_template(m),
        }
    }
}

/// First template whose brackets match `m` within `tol`.
pub fn synthesize_driver(m: &LimitTensors, tol: f64) -> Result<(DriverTemplate, DriverSpec)> {
    for template in DriverTemplate::ALL {
        if let Some(spec) = template.candidate(m, tol) {
            if bracket_residual(&spec, m)? <= tol {
                return Ok((template, spec));
            }
        }
    }
    Err(Error::DriverSynthesis)
}

fn brownian_template(m: &LimitTensors, tol: f64) -> Option<DriverSpec> {
    let n = m.n();
    if (1..=n).any(|k| m.mk(k).max_abs() > tol) {
        return None;
    }
    // Real covariance of (Re Z, Im Z):
    // ½ [[Re(I + M0), Im M0], [Im M0, Re(I - M0)]].
    let m0 = m.m0();
    let mut sigma = alloc::vec![0.0; 4 * n * n];
    let dim = 2 * n;
    for i in 0..n {
        for j in 0..n {
            let z = m0[(i, j)];
            let delta = if i == j { 1.0 } else { 0.0 };
            sigma[i * dim + j] = 0.5 * (delta + z.re);
            sigma[i * dim + (n + j)] = 0.5 * z.im;
            sigma[(n + i) * dim + j] = 0.5 * z.im;
            sigma[(n + i) * dim + (n + j)] = 0.5 * (delta - z.re);
        }
    }
    let factor = pivoted_cholesky(&sigma, dim, tol)?;
    let rank = factor.len() / dim;
    let mixing = CMatrix::from_fn(n, rank, |i, a| C64::new(factor[i * rank + a], factor[(n + i) * rank + a]));
    Some(DriverSpec { n_brownian: rank, n_poisson: 0, intensities: Vec::new(), mixing })
}

/// `L` (row-major, `dim × rank`) with `L Lᵀ = s` for a real symmetric
/// positive semidefinite `s`; `None` if `s` has a negative pivot beyond
/// `tol`.
fn pivoted_cholesky(s: &[f64], dim: usize, tol: f64) -> Option<Vec<f64>> {
    let mut a = s.to_vec();
    let mut perm: Vec<usize> = (0..dim).collect();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    let scale = (0..dim).map(|i| s[i * dim + i].abs()).fold(1e-300, f64::max);
    for _ in 0..dim {
        // Largest remaining diagonal entry.
        let (pos, piv) = (cols.len()..dim)
            .map(|r| (r, a[perm[r] * dim + perm[r]]))
            .fold((usize::MAX, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pos == usize::MAX {
            break;
        }
        if piv <= tol * scale {
            if piv < -tol.max(1e-12) * scale.max(1.0) {
                return None;
            }
            break;
        }
        let k = cols.len();
        perm.swap(k, pos);
        let p = perm[k];
        let root = piv.sqrt();
        let mut col = alloc::vec![0.0; dim];
        col[p] = root;
        for &r in &perm[k + 1..] {
            col[r] = a[r * dim + p] / root;
        }
        for &r in &perm[k + 1..] {
            for &c in &perm[k + 1..] {
                a[r * dim + c] -= col[r] * col[c];
            }
        }
        cols.push(col);
    }
    // Remaining Schur complement must be (numerically) zero.
    let rest = cols.len();
    for &r in &perm[rest..] {
        for &c in &perm[rest..] {
            if a[r * dim + c].abs() > 1e3 * tol.max(1e-12) * scale.max(1.0) {
                return None;
            }
        }
    }
    let rank = cols.len();
    let mut out = alloc::vec![0.0; dim * rank];
    for (a_idx, col) in cols.iter().enumerate() {
        for r in 0..dim {
            out[r * rank + a_idx] = col[r];
        }
    }
    Some(out)
}

fn per_direction_template(m: &LimitTensors, tol: f64) -> Option<DriverSpec> {
    let n = m.n();
    let mut brownian = Vec::new();
    let mut poisson = Vec::new();
    for j in 1..=n {
        let jump = m.get(j, j, j);
        if jump.norm() > tol {
            poisson.push((j, jump));
        } else {
            brownian.push((j, m.get(j, j, 0).sqrt()));
        }
    }
    let cols = brownian.len() + poisson.len();
    let mut mixing = CMatrix::zeros(n, cols);
    for (a, (j, beta)) in brownian.iter().enumerate() {
        mixing[(j - 1, a)] = *beta;
    }
    let mut intensities = Vec::new();
    for (b, (j, jump)) in poisson.iter().enumerate() {
        let r = jump.norm();
        mixing[(j - 1, brownian.len() + b)] = *jump / r;
        intensities.push(1.0 / (r * r));
    }
    Some(DriverSpec { n_brownian: brownian.len(), n_poisson: poisson.len(), intensities, mixing })
}

fn mixed_plane_template(m: &LimitTensors) -> Option<DriverSpec> {
    if m.n() != 2 {
        return None;
    }
    let s = core::f64::consts::FRAC_1_SQRT_2;
    let mixing = CMatrix::from_rows(&[&[C64::new(0.0, s), C64::new(s, 0.0)], &[C64::new(s, 0.0), C64::new(0.0, s)]]);
    Some(DriverSpec { n_brownian: 1, n_poisson: 1, intensities: alloc::vec![1.0], mixing })
}

/// Pathwise sampler of driver increments on a fixed grid with exact
/// exponential jump clocks.
pub(crate) struct DriverPath<R: Rng> {
    rng: R,
    next_jump: Vec<f64>,
    intensities: Vec<f64>,
    n_brownian: usize,
}

/// Increments of `Y` over one interval, split at the jump times inside it.
pub(crate) struct Segment {
    pub length: f64,
    pub dw: Vec<f64>,
    /// Poisson process that jumps at the end of the segment, if any.
    pub jump: Option<usize>,
}

impl<R: Rng> DriverPath<R> {
    pub(crate) fn new(d: &DriverSpec, mut rng: R) -> Self {
        let next_jump = d.intensities.iter().map(|l| rng.sample::<f64, _>(Exp1) / l).collect();
        Self { rng, next_jump, intensities: d.intensities.clone(), n_brownian: d.n_brownian }
    }

    /// Segments covering `[t0, t0 + dt)`, in time order.
    pub(crate) fn step(&mut self, t0: f64, dt: f64, out: &mut Vec<Segment>) {
        out.clear();
        let end = t0 + dt;
        let mut t = t0;
        loop {
            let (a, tau) =
                self.next_jump
                    .iter()
                    .enumerate()
                    .fold((usize::MAX, f64::INFINITY), |b, (a, &x)| if x < b.1 { (a, x) } else { b });
            if a == usize::MAX || tau >= end {
                out.push(self.segment(end - t, None));
                return;
            }
            out.push(self.segment(tau - t, Some(a)));
            t = tau;
            self.next_jump[a] = tau + self.rng.sample::<f64, _>(Exp1) / self.intensities[a];
        }
    }

    fn segment(&mut self, length: f64, jump: Option<usize>) -> Segment {
        let sd = length.max(0.0).sqrt();
        let dw = (0..self.n_brownian).map(|_| self.rng.sample::<f64, _>(StandardNormal) * sd).collect();
        Segment { length, dw, jump }
    }
}

/// Per-entry statistics of the pathwise residual
/// `Σ ΔZ^i ΔZ^j - (M^{ij}_0 t + Σ_k M^{ij}_k Z^k_t)` (plain) and its
/// conjugate counterpart, over independent paths.
#[derive(Clone, Debug, PartialEq)]
pub struct BracketEntry {
    pub i: usize,
    pub j: usize,
    pub conjugate: bool,
    pub mean: C64,
    pub stderr: f64,
    pub rms: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BracketReport {
    pub t_max: f64,
    pub dt: f64,
    pub trials: u64,
    pub entries: Vec<BracketEntry>,
    /// Allowed `|mean| ≤ 4·stderr + bias_band`.
    pub bias_band: f64,
    /// Allowed `rms ≤ rms_band`.
    pub rms_band: f64,
}

impl BracketReport {
    /// Largest `|mean| - 4·stderr - bias_band` and `rms - rms_band`; the
    /// check passes when this is non-positive.
    pub fn worst_excess(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| (e.mean.norm() - 4.0 * e.stderr - self.bias_band).max(e.rms - self.rms_band))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn passes(&self) -> bool {
        self.worst_excess() <= 0.0
    }
}

const BRACKET_STREAM_TAG: u64 = 0xB7AC;

/// Monte-Carlo check of both bracket relations on a `dt` grid up to
/// `t_max`. Discrete quadratic covariations differ from the continuous
/// brackets by `O(√(t dt))` pathwise and `O(dt)` in mean; both bands are
/// scaled by the size of the driver.
pub fn verify_brackets(
    d: &DriverSpec,
    m: &LimitTensors,
    t_max: f64,
    dt: f64,
    trials: u64,
    seed: u64,
) -> Result<BracketReport> {
    d.validate()?;
    let n = m.n();
    if d.dim() != n {
        return Err(Error::Dimension(format!("driver has {} coordinates, tensors N = {n}", d.dim())));
    }
    if !(dt > 0.0 && t_max > dt) {
        return Err(Error::InvalidParameter("need 0 < dt < t_max".into()));
    }
    let steps = (t_max / dt).round() as usize;
    let dt = t_max / steps as f64;
    let cm = &d.mixing;
    let comps = d.components();
    let stream_seed = derive_seed(seed, BRACKET_STREAM_TAG);

    // Moments of re/im of each residual entry: [plain | conjugate] × N × N.
    let mut re = alloc::vec![Moments::default(); 2 * n * n];
    let mut im = alloc::vec![Moments::default(); 2 * n * n];
    let mut sq = alloc::vec![Moments::default(); 2 * n * n];
    let mut segments = Vec::new();
    let mut dy = alloc::vec![0.0; comps];
    for trial in 0..trials {
        let mut path = DriverPath::new(d, stream_rng(stream_seed, trial));
        let mut z = alloc::vec![C64::new(0.0, 0.0); n];
        let mut qp = alloc::vec![C64::new(0.0, 0.0); n * n];
        let mut qc = alloc::vec![C64::new(0.0, 0.0); n * n];
        for step in 0..steps {
            path.step(step as f64 * dt, dt, &mut segments);
            dy.iter_mut().for_each(|x| *x = 0.0);
            for seg in &segments {
                for (a, w) in seg.dw.iter().enumerate() {
                    dy[a] += w;
                }
                for (b, l) in d.intensities.iter().enumerate() {
                    dy[d.n_brownian + b] -= l.sqrt() * seg.length;
                }
                if let Some(b) = seg.jump {
                    dy[d.n_brownian + b] += 1.0 / d.intensities[b].sqrt();
                }
            }
            let dz: Vec<C64> = (0..n).map(|i| (0..comps).map(|a| cm[(i, a)] * dy[a]).sum()).collect();
            for i in 0..n {
                z[i] += dz[i];
                for j in 0..n {
                    qp[i * n + j] += dz[i] * dz[j];
                    qc[i * n + j] += dz[i].conj() * dz[j];
                }
            }
        }
        for i in 1..=n {
            for j in 1..=n {
                let mut rhs_p = m.get(i, j, 0) * t_max;
                let mut rhs_c = C64::new(if i == j { t_max } else { 0.0 }, 0.0);
                for k in 1..=n {
                    rhs_p += m.get(i, j, k) * z[k - 1];
                    rhs_c += m.get(i, k, j).conj() * z[k - 1];
                }
                let idx = (i - 1) * n + (j - 1);
                for (slot, r) in [(idx, qp[idx] - rhs_p), (n * n + idx, qc[idx] - rhs_c)] {
                    re[slot].push(r.re);
                    im[slot].push(r.im);
                    sq[slot].push(r.norm_sqr());
                }
            }
        }
    }

    let c_scale =
        (0..n).map(|i| (0..comps).map(|a| cm[(i, a)].norm_sqr()).sum::<f64>()).fold(0.0, f64::max).max(1e-300);
    let inv_lambda = d.intensities.iter().map(|l| 1.0 / l).fold(1.0, f64::max);
    let scale = c_scale * inv_lambda.max(1.0);
    let bias_band = 10.0 * scale * dt * (1.0 + t_max);
    let rms_band = 6.0 * scale * (t_max * dt).sqrt() * (1.0 + d.intensities.iter().sum::<f64>()).sqrt() + bias_band;

    let mut entries = Vec::with_capacity(2 * n * n);
    for slot in 0..2 * n * n {
        let idx = slot % (n * n);
        let se = (re[slot].stderr().powi(2) + im[slot].stderr().powi(2)).sqrt();
        entries.push(BracketEntry {
            i: idx / n + 1,
            j: idx % n + 1,
            conjugate: slot >= n * n,
            mean: C64::new(re[slot].mean(), im[slot].mean()),
            stderr: se,
            rms: sq[slot].mean().sqrt(),
        });
    }
    Ok(BracketReport { t_max, dt, trials, entries, bias_band, rms_band })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::c;

    fn scalar_tensors(m0: C64, m1: C64) -> LimitTensors {
        LimitTensors::new(CMatrix::from_rows(&[&[m0]]), alloc::vec![CMatrix::from_rows(&[&[m1]])]).unwrap()
    }

    #[test]
    fn single_brownian_bracket() {
        let m = scalar_tensors(c(1.0, 0.0), c(0.0, 0.0));
        let (tpl, d) = synthesize_driver(&m, 1e-9).unwrap();
        assert_eq!(tpl, DriverTemplate::Brownian);
        assert_eq!(d.n_brownian, 1);
        assert!(bracket_residual(&d, &m).unwrap() < 1e-12);
        let r = verify_brackets(&d, &m, 1.0, 1e-3, 500, 1).unwrap();
        assert!(r.passes(), "{r:?}");
    }

    #[test]
    fn wrong_tensors_fail_the_bracket_check() {
        let m = scalar_tensors(c(1.0, 0.0), c(0.0, 0.0));
        let d = DriverSpec::brownian(1);
        let wrong = scalar_tensors(c(2.0, 0.0), c(0.0, 0.0));
        assert!(bracket_residual(&d, &wrong).unwrap() > 0.5);
        assert!(!verify_brackets(&d, &wrong, 1.0, 1e-3, 500, 1).unwrap().passes());
        assert!(verify_brackets(&d, &m, 1.0, 1e-3, 500, 1).unwrap().passes());
    }

    #[test]
    fn compensated_poisson_bracket() {
        for jump in [c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 0.5)] {
            let m = scalar_tensors(jump / jump.norm() * (jump / jump.norm()), jump);
            let (tpl, d) = synthesize_driver(&m, 1e-9).unwrap();
            assert_eq!(tpl, DriverTemplate::PerDirection);
            assert_eq!((d.n_brownian, d.n_poisson), (0, 1));
            assert!((d.intensities[0] - 1.0 / jump.norm_sqr()).abs() < 1e-12);
            let r = verify_brackets(&d, &m, 1.0, 1e-3, 500, 2).unwrap();
            assert!(r.passes(), "{r:?}");
        }
    }

    #[test]
    fn phased_brownian_uses_covariance_factor() {
        let tau: f64 = 0.4;
        let m = scalar_tensors(C64::from_polar(1.0, 2.0 * tau), c(0.0, 0.0));
        let (_, d) = synthesize_driver(&m, 1e-9).unwrap();
        assert_eq!(d.n_brownian, 1);
        assert!((d.mixing[(0, 0)].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unsupported_tensor_is_reported() {
        // M0 = 0 with no jumps: [Z, Z] = 0 and [Z̄, Z] = t needs a rotation-
        // invariant complex Brownian motion, which the Brownian template
        // provides; make M0 inconsistent instead (|M0| > 1).
        let m = scalar_tensors(c(3.0, 0.0), c(0.0, 0.0));
        assert_eq!(synthesize_driver(&m, 1e-9).unwrap_err(), Error::DriverSynthesis);
    }

    #[test]
    fn pivoted_cholesky_factors_semidefinite() {
        let s = [2.0, 1.0, 0.0, 1.0, 2.0, 0.0, 0.0, 0.0, 0.0];
        let l = pivoted_cholesky(&s, 3, 1e-12).unwrap();
        let rank = l.len() / 3;
        assert_eq!(rank, 2);
        for r in 0..3 {
            for c in 0..3 {
                let v: f64 = (0..rank).map(|a| l[r * rank + a] * l[c * rank + a]).sum();
                assert!((v - s[r * 3 + c]).abs() < 1e-12);
            }
        }
        assert!(pivoted_cholesky(&[1.0, 2.0, 2.0, 1.0], 2, 1e-12).is_none());
    }
}
