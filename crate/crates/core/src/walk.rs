//! The random walk on the unitary group induced by repeated interactions.
//!
//! Each step draws an outcome `i` with probability `p_i` and applies the
//! branch unitary: `V_{k+1} = U_i V_k`, equivalently
//! `V_{k+1} = (A + Σ_j B_j X^j) V_k`. Averaging over outcomes gives the
//! iterated channel, `E[V_n ρ V_n†] = L^n(ρ)`, which is also what the exact
//! dilation on `H ⊗ K^{⊗n}` produces after tracing out the `n` environment
//! copies.
//!
//! Randomness is keyed by `(seed, trial)`: trial `t` uses ChaCha stream `t`,
//! and step `k` consumes the `k`-th draw of that stream.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::channel::{ClassicalUnitary, QuantumChannel};
use crate::error::{Error, Result};
use crate::numerics::{CMatrix, C64, STRUCT_TOL};
use crate::obtuse::OutcomeSampler;
use crate::rng::{stream_rng, StreamRng};
use crate::stats::MatrixMoments;

/// Largest `dim_sys · dim_env^n` the exact dilation accepts by default.
pub const DILATION_BUDGET: usize = 4096;
/// Tolerance for the agreement of the branch unitaries with `A + Σ_j v^j B_j`.
const BRANCH_TOL: f64 = 1e-9;

/// One sampled path `V_0 = I, V_1, …, V_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct WalkTrajectory {
    pub steps: usize,
    pub seed: u64,
    pub trial: u64,
    /// 0-based outcome of step `k + 1` at position `k`.
    pub outcome_indices: Vec<usize>,
    /// `V_0, …, V_n`, or only `V_n` when the path was not retained.
    pub unitaries: Vec<CMatrix>,
}

impl WalkTrajectory {
    pub fn terminal(&self) -> &CMatrix {
        self.unitaries.last().expect("trajectory holds at least V_0")
    }

    pub fn is_retained(&self) -> bool {
        self.unitaries.len() == self.steps + 1
    }

    /// Worst unitarity residual over the stored unitaries.
    pub fn unitarity_residual(&self) -> f64 {
        self.unitaries.iter().map(|v| v.unitarity_residual().unwrap_or(f64::INFINITY)).fold(0.0, f64::max)
    }
}

/// Step parameters for [`simulate_walk_with`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WalkOptions {
    pub steps: usize,
    pub seed: u64,
    pub trial: u64,
    /// Keep every intermediate `V_k`.
    pub retain: bool,
}

impl WalkOptions {
    pub fn new(steps: usize, seed: u64) -> Self {
        Self { steps, seed, trial: 0, retain: true }
    }
}

/// Precomputed stepping data for one classical unitary.
///
/// Construction checks that the representation `A + Σ_j v_i^j B_j`
/// reproduces every branch unitary, so the outcome-indexed product and the
/// tensor form of the recursion agree for every path.
#[derive(Clone, Debug)]
pub struct Walker {
    unitaries: Vec<CMatrix>,
    sampler: OutcomeSampler,
    dim_sys: usize,
}

impl Walker {
    pub fn new(u: &ClassicalUnitary) -> Result<Self> {
        let res = u.branch_residual();
        if !(res <= BRANCH_TOL) {
            return Err(Error::Consistency(format!("branch unitaries differ from A + Σ v B by {res:.3e}")));
        }
        Ok(Self { unitaries: u.unitaries(), sampler: OutcomeSampler::new(u.probabilities()), dim_sys: u.dim_sys() })
    }

    pub fn dim_sys(&self) -> usize {
        self.dim_sys
    }

    pub fn unitaries(&self) -> &[CMatrix] {
        &self.unitaries
    }

    /// RNG stream of trial `trial`.
    pub fn rng(seed: u64, trial: u64) -> StreamRng {
        stream_rng(seed, trial)
    }

    #[inline]
    pub fn draw(&self, rng: &mut StreamRng) -> usize {
        self.sampler.draw(rng)
    }

    pub fn simulate(&self, opts: WalkOptions) -> WalkTrajectory {
        let mut rng = Self::rng(opts.seed, opts.trial);
        let mut v = CMatrix::identity(self.dim_sys);
        let mut outcome_indices = Vec::with_capacity(opts.steps);
        let mut unitaries = Vec::with_capacity(if opts.retain { opts.steps + 1 } else { 1 });
        if opts.retain {
            unitaries.push(v.clone());
        }
        for _ in 0..opts.steps {
            let i = self.draw(&mut rng);
            outcome_indices.push(i);
            v = &self.unitaries[i] * &v;
            if opts.retain {
                unitaries.push(v.clone());
            }
        }
        if !opts.retain {
            unitaries.push(v);
        }
        WalkTrajectory { steps: opts.steps, seed: opts.seed, trial: opts.trial, outcome_indices, unitaries }
    }

    /// `V_n` of trial `trial` without storing the path.
    pub fn terminal(&self, steps: usize, seed: u64, trial: u64) -> CMatrix {
        let mut rng = Self::rng(seed, trial);
        let mut v = CMatrix::identity(self.dim_sys);
        for _ in 0..steps {
            v = &self.unitaries[self.draw(&mut rng)] * &v;
        }
        v
    }

    /// 1-based step at which `outcome` first occurs, or `None` within
    /// `max_steps`. Uses the same draws as [`Walker::simulate`].
    pub fn first_hit(&self, outcome: usize, max_steps: usize, seed: u64, trial: u64) -> Option<usize> {
        let mut rng = Self::rng(seed, trial);
        (1..=max_steps).find(|_| self.draw(&mut rng) == outcome)
    }
}

/// Samples one trajectory (trial 0), retaining the full path.
pub fn simulate_walk(u: &ClassicalUnitary, steps: usize, seed: u64) -> Result<WalkTrajectory> {
    simulate_walk_with(u, WalkOptions::new(steps, seed))
}

pub fn simulate_walk_with(u: &ClassicalUnitary, opts: WalkOptions) -> Result<WalkTrajectory> {
    Ok(Walker::new(u)?.simulate(opts))
}

/// Mean and entrywise standard error of a Monte-Carlo matrix estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct MonteCarloEstimate {
    pub mean: CMatrix,
    /// Real matrix of standard errors.
    pub stderr: CMatrix,
    pub trials: u64,
}

impl MonteCarloEstimate {
    pub fn from_moments(m: &MatrixMoments) -> Self {
        Self { mean: m.mean(), stderr: m.stderr(), trials: m.count() }
    }

    pub fn max_stderr(&self) -> f64 {
        self.stderr.max_abs()
    }

    /// Largest `|mean_ij - reference_ij| - k·se_ij`; non-positive means the
    /// reference lies within `k` standard errors entrywise.
    pub fn excess_over(&self, reference: &CMatrix, k: f64) -> f64 {
        self.mean
            .as_slice()
            .iter()
            .zip(reference.as_slice())
            .zip(self.stderr.as_slice())
            .map(|((m, r), s)| (m - r).norm() - k * s.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Monte-Carlo estimate of `E[V_n ρ V_n†]` over trials `0..trials`.
pub fn monte_carlo_channel(
    u: &ClassicalUnitary,
    rho: &CMatrix,
    steps: usize,
    trials: u64,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    rho.check_density(STRUCT_TOL)?;
    if rho.rows() != u.dim_sys() {
        return Err(Error::Dimension(format!("state must be {0}x{0}", u.dim_sys())));
    }
    let walker = Walker::new(u)?;
    let mut moments = MatrixMoments::new(u.dim_sys(), u.dim_sys());
    for trial in 0..trials {
        let v = walker.terminal(steps, seed, trial);
        moments.push(&(&(&v * rho) * &v.adjoint()));
    }
    Ok(MonteCarloEstimate::from_moments(&moments))
}

/// `L^n(ρ)` by repeated application.
pub fn iterate_channel(channel: &QuantumChannel, rho: &CMatrix, n: usize) -> Result<CMatrix> {
    let mut out = rho.clone();
    for _ in 0..n {
        out = channel.apply(&out)?;
    }
    Ok(out)
}

/// `E[V_n] = A^n`.
pub fn mean_unitary(u: &ClassicalUnitary, n: usize) -> CMatrix {
    let mut out = CMatrix::identity(u.dim_sys());
    for _ in 0..n {
        out = u.a() * &out;
    }
    out
}

/// Exact `Tr_env(V_n (ρ ⊗ |e_0…e_0⟩⟨e_0…e_0|) V_n†)` on `H ⊗ K^{⊗n}`.
///
/// Only the `dim_sys` columns `V_n (|s⟩ ⊗ |e_0…e_0⟩)` are propagated, site by
/// site; the full operator is never formed. The dimension budget still
/// applies to `dim_sys · dim_env^n`.
pub fn full_tensor_evolution(u: &ClassicalUnitary, n: usize, rho: &CMatrix, budget: usize) -> Result<CMatrix> {
    let ds = u.dim_sys();
    let de = u.dim_env();
    if rho.rows() != ds || rho.cols() != ds {
        return Err(Error::Dimension(format!("state must be {ds}x{ds}")));
    }
    let env = dilation_env_dim(ds, de, n, budget)?;
    let total = u.u_total();
    // cols[s] is a vector over (system, e_1, …, e_n), system index slowest.
    let mut cols: Vec<Vec<C64>> = (0..ds)
        .map(|s| {
            let mut v = alloc::vec![C64::new(0.0, 0.0); ds * env];
            v[s * env] = C64::new(1.0, 0.0);
            v
        })
        .collect();
    for site in 0..n {
        for col in cols.iter_mut() {
            *col = apply_at_site(total, ds, de, n, site, col);
        }
    }
    Ok(CMatrix::from_fn(ds, ds, |s, t| {
        let mut acc = C64::new(0.0, 0.0);
        for a in 0..ds {
            for b in 0..ds {
                let r = rho[(a, b)];
                if r == C64::new(0.0, 0.0) {
                    continue;
                }
                let overlap: C64 = (0..env).map(|e| cols[a][s * env + e] * cols[b][t * env + e].conj()).sum();
                acc += r * overlap;
            }
        }
        acc
    }))
}

fn dilation_env_dim(ds: usize, de: usize, n: usize, budget: usize) -> Result<usize> {
    let mut env = 1usize;
    for _ in 0..n {
        env = env
            .checked_mul(de)
            .filter(|e| e.saturating_mul(ds) <= budget)
            .ok_or(Error::Budget { needed: ds.saturating_mul(de.saturating_pow(n as u32)), budget })?;
    }
    if ds * env > budget {
        return Err(Error::Budget { needed: ds * env, budget });
    }
    Ok(env)
}

// Applies `U` acting on `H ⊗ K_site` to a vector over `H ⊗ K^{⊗n}`.
fn apply_at_site(u: &CMatrix, ds: usize, de: usize, n: usize, site: usize, x: &[C64]) -> Vec<C64> {
    let env = x.len() / ds;
    let inner = de.pow((n - site - 1) as u32);
    let outer = env / (inner * de);
    let mut y = alloc::vec![C64::new(0.0, 0.0); x.len()];
    for o in 0..outer {
        for r in 0..inner {
            for s2 in 0..ds {
                for e2 in 0..de {
                    let row = s2 * de + e2;
                    let mut acc = C64::new(0.0, 0.0);
                    for s1 in 0..ds {
                        for e1 in 0..de {
                            let idx = s1 * env + (o * de + e1) * inner + r;
                            acc += u[(row, s1 * de + e1)] * x[idx];
                        }
                    }
                    y[s2 * env + (o * de + e2) * inner + r] = acc;
                }
            }
        }
    }
    y
}

/// The operator `V_n` on `H ⊗ K^{⊗n}` as an explicit matrix (site 1 acts
/// first). Intended for small cross-checks only.
pub fn dilated_operator(u: &ClassicalUnitary, n: usize, budget: usize) -> Result<CMatrix> {
    let ds = u.dim_sys();
    let de = u.dim_env();
    let env = dilation_env_dim(ds, de, n, budget)?;
    let dim = ds * env;
    let mut v = CMatrix::identity(dim);
    for site in 0..n {
        let mut next = CMatrix::zeros(dim, dim);
        for c in 0..dim {
            let col: Vec<C64> = (0..dim).map(|r| v[(r, c)]).collect();
            let img = apply_at_site(u.u_total(), ds, de, n, site, &col);
            for (r, z) in img.into_iter().enumerate() {
                next[(r, c)] = z;
            }
        }
        v = next;
    }
    Ok(v)
}

/// `max_k ‖Σ_i p_i U_i V_k - A V_k‖_F` along a trajectory: the conditional
/// mean of the next step is `A V_k` because `E[X^j] = 0`.
pub fn martingale_residual(u: &ClassicalUnitary, path: &WalkTrajectory) -> f64 {
    let p = u.probabilities();
    let us = u.unitaries();
    path.unitaries
        .iter()
        .map(|v| {
            let mut avg = CMatrix::zeros(v.rows(), v.cols());
            for (pi, ui) in p.iter().zip(&us) {
                avg += &(ui * v).scale_re(*pi);
            }
            avg.distance(&(u.a() * v))
        })
        .fold(0.0, f64::max)
}

/// Pearson statistic of the first `n` outcomes of `trials` walks against the
/// product law; cells are outcome sequences in base `N + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChiSquareReport {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub cells: usize,
}

pub fn outcome_sequence_chi_square(u: &ClassicalUnitary, n: usize, trials: u64, seed: u64) -> Result<ChiSquareReport> {
    let walker = Walker::new(u)?;
    let m = u.dim_env();
    let cells = m
        .checked_pow(n as u32)
        .filter(|c| *c <= 1 << 20)
        .ok_or_else(|| Error::InvalidParameter(format!("{m}^{n} outcome sequences is too many cells")))?;
    let mut counts = alloc::vec![0u64; cells];
    for trial in 0..trials {
        let mut rng = Walker::rng(seed, trial);
        let mut code = 0usize;
        for _ in 0..n {
            code = code * m + walker.draw(&mut rng);
        }
        counts[code] += 1;
    }
    let p = u.probabilities();
    let mut statistic = 0.0;
    for (code, count) in counts.iter().enumerate() {
        let mut prob = 1.0;
        let mut c = code;
        for _ in 0..n {
            prob *= p[c % m];
            c /= m;
        }
        let expected = prob * trials as f64;
        let d = *count as f64 - expected;
        statistic += d * d / expected;
    }
    Ok(ChiSquareReport { statistic, degrees_of_freedom: cells - 1, cells })
}
