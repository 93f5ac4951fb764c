//! Weak convergence of `V_{⌊t/h⌋}` to the limit SDE.
//!
//! For each step size the discrete walk is sampled by Monte Carlo and
//! compared observable by observable with a reference for the limit at the
//! same time `t_h = ⌊t/h⌋ h`: either the exact mean equations or a Monte
//! Carlo run of the integrator. A level's error is the root sum of squares of
//! the per-observable errors; convergence is accepted when every refinement
//! lowers it by more than twice the combined statistical band.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use super::sde::{integrate_sde_trial, mean_conjugation_exact, mean_unitary_exact, SdeModel};
use super::HFamily;
use crate::error::{Error, Result};
use crate::numerics::CMatrix;
use crate::rng::derive_seed;
use crate::stats::{ks_distance, Moments};
use crate::walk::Walker;

/// Runs independent trials and returns their outputs in trial order.
///
/// Implementations may execute trials in parallel; callers reduce the
/// ordered outputs sequentially, so results do not depend on scheduling.
pub trait TrialRunner {
    fn map_trials(&self, trials: u64, f: &(dyn Fn(u64) -> Vec<f64> + Sync)) -> Vec<Vec<f64>>;
}

/// Single-threaded [`TrialRunner`].
#[derive(Clone, Copy, Debug, Default)]
pub struct Sequential;

impl TrialRunner for Sequential {
    fn map_trials(&self, trials: u64, f: &(dyn Fn(u64) -> Vec<f64> + Sync)) -> Vec<Vec<f64>> {
        (0..trials).map(f).collect()
    }
}

/// Real test function of the terminal unitary. Indices are 0-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Observable {
    /// Real or imaginary part of `V[row, col]`.
    Unitary { row: usize, col: usize, imag: bool },
    /// Real or imaginary part of `(V ρ V†)[row, col]` for the study's `ρ`.
    Conjugated { row: usize, col: usize, imag: bool },
}

impl Observable {
    /// Real and imaginary parts of every entry of `V`.
    pub fn unitary_entries(dim: usize) -> Vec<Observable> {
        let mut out = Vec::with_capacity(2 * dim * dim);
        for row in 0..dim {
            for col in 0..dim {
                for imag in [false, true] {
                    out.push(Observable::Unitary { row, col, imag });
                }
            }
        }
        out
    }

    /// Real and imaginary parts of the upper triangle of `V ρ V†`.
    pub fn conjugated_entries(dim: usize) -> Vec<Observable> {
        let mut out = Vec::new();
        for row in 0..dim {
            for col in row..dim {
                out.push(Observable::Conjugated { row, col, imag: false });
                if col != row {
                    out.push(Observable::Conjugated { row, col, imag: true });
                }
            }
        }
        out
    }

    pub fn needs_rho(&self) -> bool {
        matches!(self, Observable::Conjugated { .. })
    }

    /// Label with 1-based indices, e.g. `re V[1,2]`.
    pub fn label(&self) -> String {
        let (name, row, col, imag) = match *self {
            Observable::Unitary { row, col, imag } => ("V", row, col, imag),
            Observable::Conjugated { row, col, imag } => ("VrhoV*", row, col, imag),
        };
        format!("{} {name}[{},{}]", if imag { "im" } else { "re" }, row + 1, col + 1)
    }

    fn pick(z: num_complex::Complex64, imag: bool) -> f64 {
        if imag {
            z.im
        } else {
            z.re
        }
    }

    fn evaluate(&self, v: &CMatrix, conjugated: Option<&CMatrix>) -> f64 {
        match *self {
            Observable::Unitary { row, col, imag } => Self::pick(v[(row, col)], imag),
            Observable::Conjugated { row, col, imag } => {
                Self::pick(conjugated.expect("conjugated state computed")[(row, col)], imag)
            }
        }
    }

    fn check(&self, dim: usize) -> Result<()> {
        let (row, col) = match *self {
            Observable::Unitary { row, col, .. } | Observable::Conjugated { row, col, .. } => (row, col),
        };
        if row >= dim || col >= dim {
            return Err(Error::IndexOutOfRange { index: row.max(col), max: dim - 1 });
        }
        Ok(())
    }
}

impl core::fmt::Display for Observable {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(&self.label())
    }
}

/// How expectations under the limit are obtained.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SdeReference {
    /// `E[U_t] = exp(Ã t)` and the vectorised equation for `E[U ρ U†]`.
    MeanEquation,
    /// Monte Carlo over [`integrate_sde_trial`] paths.
    MonteCarlo { dt: f64, trials: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeakConvergenceConfig {
    pub t: f64,
    /// Strictly decreasing step sizes.
    pub hs: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
    pub observables: Vec<Observable>,
    /// Initial state for [`Observable::Conjugated`].
    pub rho: Option<CMatrix>,
    pub reference: SdeReference,
}

impl WeakConvergenceConfig {
    /// Entries of `V` against the exact mean equation.
    pub fn new(dim: usize, t: f64, hs: Vec<f64>, trials: u64, seed: u64) -> Self {
        Self {
            t,
            hs,
            trials,
            seed,
            observables: Observable::unitary_entries(dim),
            rho: None,
            reference: SdeReference::MeanEquation,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeakRow {
    pub h: f64,
    pub observable: Observable,
    pub discrete_mean: f64,
    pub sde_mean: f64,
    pub abs_error: f64,
    /// Combined standard error of the discrete and reference means.
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LevelSummary {
    pub h: f64,
    pub steps: usize,
    pub t_h: f64,
    /// `sqrt(Σ abs_error²)` over observables.
    pub error: f64,
    /// `sqrt(Σ stderr²)` over observables.
    pub sigma: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeakConvergenceReport {
    pub rows: Vec<WeakRow>,
    pub levels: Vec<LevelSummary>,
    /// Least-squares slope of `log error` against `log h`.
    pub order: Option<f64>,
    /// Every refinement lowers the error by more than
    /// `2 sqrt(σ_k² + σ_{k+1}²)`.
    pub monotone: bool,
}

impl WeakConvergenceReport {
    /// Whether refinement `k → k+1` lowered the error beyond the band.
    pub fn decrease_beyond_band(&self, k: usize) -> bool {
        let (a, b) = (&self.levels[k], &self.levels[k + 1]);
        a.error - b.error > 2.0 * (a.sigma * a.sigma + b.sigma * b.sigma).sqrt()
    }
}

const DISCRETE_TAG: u64 = 0xD15C;
const REFERENCE_TAG: u64 = 0x5DE0;

fn sample_means(runner: &dyn TrialRunner, trials: u64, k: usize, f: &(dyn Fn(u64) -> Vec<f64> + Sync)) -> Vec<Moments> {
    let mut moments = alloc::vec![Moments::default(); k];
    for out in runner.map_trials(trials, f) {
        for (m, x) in moments.iter_mut().zip(out) {
            m.push(x);
        }
    }
    moments
}

fn conjugate(v: &CMatrix, rho: &CMatrix) -> CMatrix {
    &(v * rho) * &v.adjoint()
}

/// Discrete walk versus the limit `model` at each `h` of `cfg.hs`.
pub fn weak_convergence_study(
    fam: &dyn HFamily,
    model: &SdeModel,
    cfg: &WeakConvergenceConfig,
    runner: &dyn TrialRunner,
) -> Result<WeakConvergenceReport> {
    model.validate()?;
    let dim = model.dim_sys();
    if fam.dim_sys() != dim {
        return Err(Error::Dimension(format!("family acts on C^{}, model on C^{dim}", fam.dim_sys())));
    }
    if cfg.hs.is_empty() || cfg.hs.iter().any(|h| !(*h > 0.0)) || cfg.hs.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter("step sizes must be positive and strictly decreasing".into()));
    }
    if !(cfg.t > 0.0 && cfg.t.is_finite()) || cfg.trials < 2 {
        return Err(Error::InvalidParameter("need t > 0 and at least 2 trials".into()));
    }
    if cfg.observables.is_empty() {
        return Err(Error::InvalidParameter("no observables".into()));
    }
    for o in &cfg.observables {
        o.check(dim)?;
    }
    let needs_rho = cfg.observables.iter().any(Observable::needs_rho);
    let rho = match (&cfg.rho, needs_rho) {
        (Some(r), _) => {
            r.check_density(1e-9)?;
            if r.rows() != dim {
                return Err(Error::Dimension(format!("rho must be {dim}x{dim}")));
            }
            Some(r.clone())
        }
        (None, true) => return Err(Error::InvalidParameter("conjugated observables need rho".into())),
        (None, false) => None,
    };
    let observe = |v: &CMatrix| -> Vec<f64> {
        let conj = rho.as_ref().filter(|_| needs_rho).map(|r| conjugate(v, r));
        cfg.observables.iter().map(|o| o.evaluate(v, conj.as_ref())).collect()
    };
    let k = cfg.observables.len();

    let mut rows = Vec::new();
    let mut levels = Vec::new();
    for (level, &h) in cfg.hs.iter().enumerate() {
        let steps = (cfg.t / h).floor() as usize;
        let t_h = steps as f64 * h;
        let walker = Walker::new(&fam.build(h)?)?;
        let seed = derive_seed(derive_seed(cfg.seed, DISCRETE_TAG), level as u64);
        let discrete = sample_means(runner, cfg.trials, k, &|trial| observe(&walker.terminal(steps, seed, trial)));

        let (reference, ref_se): (Vec<f64>, Vec<f64>) = match cfg.reference {
            SdeReference::MeanEquation => {
                let eu = mean_unitary_exact(model, t_h)?;
                let erho = match &rho {
                    Some(r) if needs_rho => Some(mean_conjugation_exact(model, r, t_h)?),
                    _ => None,
                };
                let vals = cfg.observables.iter().map(|o| o.evaluate(&eu, erho.as_ref())).collect();
                (vals, alloc::vec![0.0; k])
            }
            SdeReference::MonteCarlo { dt, trials } => {
                if trials < 2 {
                    return Err(Error::InvalidParameter("reference needs at least 2 trials".into()));
                }
                let seed = derive_seed(derive_seed(cfg.seed, REFERENCE_TAG), level as u64);
                // Surface grid errors before fanning out.
                integrate_sde_trial(model, t_h, dt, seed, 0)?;
                let m = sample_means(runner, trials, k, &|trial| {
                    observe(&integrate_sde_trial(model, t_h, dt, seed, trial).expect("validated model"))
                });
                (m.iter().map(Moments::mean).collect(), m.iter().map(Moments::stderr).collect())
            }
        };

        let (mut err2, mut sig2) = (0.0, 0.0);
        for (idx, o) in cfg.observables.iter().enumerate() {
            let dm = discrete[idx].mean();
            let se = (discrete[idx].stderr().powi(2) + ref_se[idx].powi(2)).sqrt();
            let abs_error = (dm - reference[idx]).abs();
            err2 += abs_error * abs_error;
            sig2 += se * se;
            rows.push(WeakRow {
                h,
                observable: *o,
                discrete_mean: dm,
                sde_mean: reference[idx],
                abs_error,
                stderr: se,
            });
        }
        levels.push(LevelSummary { h, steps, t_h, error: err2.sqrt(), sigma: sig2.sqrt() });
    }

    let order = fit_order(&levels);
    let mut report = WeakConvergenceReport { rows, levels, order, monotone: false };
    report.monotone = report.levels.len() >= 2 && (0..report.levels.len() - 1).all(|k| report.decrease_beyond_band(k));
    Ok(report)
}

fn fit_order(levels: &[LevelSummary]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = levels.iter().filter(|l| l.error > 0.0).map(|l| (l.h.ln(), l.error.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Kolmogorov–Smirnov comparison of `h · (first step with outcome)` against
/// `Exp(1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct KsReport {
    pub h: f64,
    pub outcome: usize,
    pub trials: u64,
    pub statistic: f64,
    /// Trials with no hit within the step budget (counted as `+∞`).
    pub censored: u64,
    pub mean_time: f64,
}

/// First-hit times of outcome `outcome` (0-based) for the walk of `fam` at
/// step `h`. Walks are cut after `⌈50/h⌉` steps.
pub fn first_jump_ks(
    fam: &dyn HFamily,
    h: f64,
    outcome: usize,
    trials: u64,
    seed: u64,
    runner: &dyn TrialRunner,
) -> Result<KsReport> {
    if !(h > 0.0) || trials == 0 {
        return Err(Error::InvalidParameter("need h > 0 and at least one trial".into()));
    }
    let cu = fam.build(h)?;
    if outcome >= cu.dim_env() {
        return Err(Error::IndexOutOfRange { index: outcome, max: cu.dim_env() - 1 });
    }
    let walker = Walker::new(&cu)?;
    let max_steps = (50.0 / h).ceil() as usize;
    let times: Vec<f64> = runner
        .map_trials(trials, &|trial| {
            alloc::vec![walker.first_hit(outcome, max_steps, seed, trial).map_or(f64::INFINITY, |k| k as f64 * h)]
        })
        .into_iter()
        .map(|v| v[0])
        .collect();
    let censored = times.iter().filter(|t| t.is_infinite()).count() as u64;
    let finite: Vec<f64> = times.iter().copied().filter(|t| t.is_finite()).collect();
    let mean_time = if finite.is_empty() { f64::INFINITY } else { finite.iter().sum::<f64>() / finite.len() as f64 };
    let statistic = ks_distance(&times, |t| if t.is_finite() { 1.0 - (-t).exp() } else { 1.0 });
    Ok(KsReport { h, outcome, trials, statistic, censored, mean_time })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::build_classical_unitary;
    use crate::limit::{DriverSpec, FnFamily};
    use crate::numerics::{c, matrix_exponential, CVector};

    fn hamiltonian() -> CMatrix {
        CMatrix::from_rows(&[&[c(0.8, 0.0), c(0.3, -0.2)], &[c(0.3, 0.2), c(-0.5, 0.0)]])
    }

    fn trivial_family() -> FnFamily {
        FnFamily::new("trivial", 2, 2, |h| {
            let u = matrix_exponential(&hamiltonian().scale(c(0.0, -h)))?;
            let s = core::f64::consts::FRAC_1_SQRT_2;
            build_classical_unitary(alloc::vec![
                (CVector::from_real(&[s, s]), u.clone()),
                (CVector::from_real(&[-s, s]), u),
            ])
        })
    }

    #[test]
    fn trivial_family_has_zero_discretisation_error() {
        let fam = trivial_family();
        let model = SdeModel::new(
            hamiltonian().scale(c(0.0, -1.0)),
            alloc::vec![CMatrix::zeros(2, 2)],
            DriverSpec::brownian(1),
        )
        .unwrap();
        let cfg = WeakConvergenceConfig::new(2, 1.0, alloc::vec![0.1, 0.03, 0.01], 4, 3);
        let r = weak_convergence_study(&fam, &model, &cfg, &Sequential).unwrap();
        for l in &r.levels {
            assert!(l.error < 1e-12, "{l:?}");
            assert_eq!(l.sigma, 0.0);
        }
        assert_eq!(r.rows.len(), 3 * 8);
    }

    #[test]
    fn labels_are_one_based() {
        assert_eq!(Observable::Unitary { row: 0, col: 1, imag: true }.label(), "im V[1,2]");
        assert_eq!(Observable::conjugated_entries(2).len(), 4);
    }

    #[test]
    fn configuration_is_validated() {
        let fam = trivial_family();
        let model = SdeModel::new(CMatrix::zeros(2, 2), Vec::new(), DriverSpec::brownian(0)).unwrap();
        let mut cfg = WeakConvergenceConfig::new(2, 1.0, alloc::vec![0.01, 0.1], 4, 3);
        assert!(weak_convergence_study(&fam, &model, &cfg, &Sequential).is_err());
        cfg.hs = alloc::vec![0.1];
        cfg.observables = alloc::vec![Observable::Conjugated { row: 0, col: 0, imag: false }];
        assert!(weak_convergence_study(&fam, &model, &cfg, &Sequential).is_err());
        cfg.observables = alloc::vec![Observable::Unitary { row: 2, col: 0, imag: false }];
        assert!(weak_convergence_study(&fam, &model, &cfg, &Sequential).is_err());
    }

    #[test]
    fn first_jump_of_a_geometric_clock() {
        // Outcome 1 has probability h/(1+h): h·T is close to Exp(1).
        let fam = FnFamily::new("geo", 1, 2, |h| {
            let (a, b) = ((1.0 / (1.0 + h)).sqrt(), (h / (1.0 + h)).sqrt());
            build_classical_unitary(alloc::vec![
                (CVector::from_real(&[a, b]), CMatrix::identity(1)),
                (CVector::from_real(&[-b, a]), CMatrix::identity(1)),
            ])
        });
        let r = first_jump_ks(&fam, 1e-2, 1, 2000, 4, &Sequential).unwrap();
        assert!(r.statistic < 0.05, "{r:?}");
        assert!((r.mean_time - 1.0).abs() < 0.1);
    }
}
