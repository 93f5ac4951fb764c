//! Rayon-backed trial execution.
//!
//! Trials are mapped in parallel but collected in trial order, and every
//! reduction happens afterwards on the caller's thread. Combined with the
//! per-trial random streams of the core crate this makes every result
//! independent of the worker count.

use cuwalk_core::limit::TrialRunner;
use cuwalk_core::stats::MatrixMoments;
use cuwalk_core::walk::{MonteCarloEstimate, Walker};
use cuwalk_core::CMatrix;
use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};

use crate::error::CliError;

pub struct RayonRunner {
    pool: Option<ThreadPool>,
}

impl RayonRunner {
    /// `jobs = None` uses the global pool.
    pub fn new(jobs: Option<usize>) -> Result<Self, CliError> {
        let pool = match jobs {
            Some(0) => return Err(CliError::Input("--jobs must be at least 1".into())),
            Some(n) => Some(
                ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| CliError::Input(format!("thread pool: {e}")))?,
            ),
            None => None,
        };
        Ok(Self { pool })
    }

    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        match &self.pool {
            Some(p) => p.install(f),
            None => f(),
        }
    }
}

impl TrialRunner for RayonRunner {
    fn map_trials(&self, trials: u64, f: &(dyn Fn(u64) -> Vec<f64> + Sync)) -> Vec<Vec<f64>> {
        self.install(|| (0..trials).into_par_iter().map(f).collect())
    }
}

/// Parallel Monte-Carlo estimate of `E[V_n ρ V_n†]`; identical to the
/// sequential core routine for the same seed.
pub fn monte_carlo_channel_par(
    runner: &RayonRunner,
    walker: &Walker,
    rho: &CMatrix,
    steps: usize,
    trials: u64,
    seed: u64,
) -> MonteCarloEstimate {
    let d = walker.dim_sys();
    let samples: Vec<CMatrix> = runner.install(|| {
        (0..trials)
            .into_par_iter()
            .map(|trial| {
                let v = walker.terminal(steps, seed, trial);
                &(&v * rho) * &v.adjoint()
            })
            .collect()
    });
    let mut moments = MatrixMoments::new(d, d);
    for s in &samples {
        moments.push(s);
    }
    MonteCarloEstimate::from_moments(&moments)
}

#[cfg(test)]
mod tests {
    use super::*;
    use cuwalk_core::limit::Sequential;
    use cuwalk_core::presets::dim2_example;
    use cuwalk_core::walk::monte_carlo_channel;

    #[test]
    fn parallel_results_match_sequential() {
        let f = |t: u64| vec![(t as f64).sqrt(), t as f64 * 0.5];
        let seq = Sequential.map_trials(1000, &f);
        for jobs in [Some(1), Some(3), None] {
            assert_eq!(RayonRunner::new(jobs).unwrap().map_trials(1000, &f), seq);
        }
    }

    #[test]
    fn parallel_channel_estimate_is_bitwise_sequential() {
        let cu = dim2_example(0.3, 0.2).unwrap();
        let rho = CMatrix::from_real_rows(&[&[1.0, 0.0], &[0.0, 0.0]]);
        let seq = monte_carlo_channel(&cu, &rho, 4, 500, 11).unwrap();
        let walker = Walker::new(&cu).unwrap();
        let par = monte_carlo_channel_par(&RayonRunner::new(Some(4)).unwrap(), &walker, &rho, 4, 500, 11);
        assert_eq!(par, seq);
    }

    #[test]
    fn zero_jobs_is_rejected() {
        assert!(RayonRunner::new(Some(0)).is_err());
    }
}
