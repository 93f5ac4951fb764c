//! `dU = Ã U dt + Σ_j B̃_j U dZ^j` with `Z = C Y`.
//!
//! With `G_a = Σ_j B̃_j C_ja` the equation reads
//! `dU = Ã U dt + Σ_a G_a U dY_a`. Brownian parts are stepped by
//! Euler–Maruyama; each Poisson jump of `Y_a` (size `1/√λ_a`) is applied
//! exactly at its clock time, and its compensator `-√λ_a dt` joins the drift.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use super::driver::{DriverPath, DriverSpec};
use crate::error::{Error, Result};
use crate::numerics::{matrix_exponential, CMatrix, CVector};
use crate::rng::stream_rng;

#[derive(Clone, Debug, PartialEq)]
pub struct SdeModel {
    pub a_tilde: CMatrix,
    pub b_tilde: Vec<CMatrix>,
    pub driver: DriverSpec,
}

impl SdeModel {
    pub fn new(a_tilde: CMatrix, b_tilde: Vec<CMatrix>, driver: DriverSpec) -> Result<Self> {
        let m = Self { a_tilde, b_tilde, driver };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.a_tilde.ensure_square()?;
        self.driver.validate()?;
        if self.b_tilde.len() != self.driver.dim() {
            return Err(Error::Dimension(format!(
                "{} B-tilde operators for a driver with {} coordinates",
                self.b_tilde.len(),
                self.driver.dim()
            )));
        }
        if self.b_tilde.iter().any(|b| b.rows() != d || b.cols() != d) {
            return Err(Error::Dimension(format!("B-tilde operators must be {d}x{d}")));
        }
        Ok(())
    }

    pub fn dim_sys(&self) -> usize {
        self.a_tilde.rows()
    }

    /// `G_a = Σ_j B̃_j C_ja` for every driver component.
    pub fn noise_operators(&self) -> Vec<CMatrix> {
        let d = self.dim_sys();
        (0..self.driver.components())
            .map(|a| {
                let mut g = CMatrix::zeros(d, d);
                for (j, b) in self.b_tilde.iter().enumerate() {
                    g += &b.scale(self.driver.mixing[(j, a)]);
                }
                g
            })
            .collect()
    }

    /// `Ã - Σ_{Poisson a} √λ_a G_a`: the drift between jumps.
    fn compensated_drift(&self, g: &[CMatrix]) -> CMatrix {
        let mut k = self.a_tilde.clone();
        for (b, l) in self.driver.intensities.iter().enumerate() {
            k = &k - &g[self.driver.poisson_column(b)].scale_re(l.sqrt());
        }
        k
    }
}

/// Solution sampled on the `dt` grid, `states[0] = I`.
#[derive(Clone, Debug, PartialEq)]
pub struct SdePath {
    pub times: Vec<f64>,
    pub states: Vec<CMatrix>,
}

impl SdePath {
    pub fn terminal(&self) -> &CMatrix {
        self.states.last().expect("path has at least the initial state")
    }
}

fn grid(t_max: f64, dt: f64) -> Result<(usize, f64)> {
    if !(dt > 0.0 && dt.is_finite()) || !(t_max >= 0.0 && t_max.is_finite()) {
        return Err(Error::InvalidParameter(format!("need dt > 0 and t_max >= 0, got dt = {dt}, t_max = {t_max}")));
    }
    let steps = (t_max / dt).round().max(if t_max > 0.0 { 1.0 } else { 0.0 }) as usize;
    let dt = if steps == 0 { dt } else { t_max / steps as f64 };
    Ok((steps, dt))
}

fn integrate(
    model: &SdeModel,
    t_max: f64,
    dt: f64,
    seed: u64,
    trial: u64,
    mut record: impl FnMut(f64, &CMatrix),
) -> Result<CMatrix> {
    model.validate()?;
    let (steps, dt) = grid(t_max, dt)?;
    let d = model.dim_sys();
    let g = model.noise_operators();
    let drift = model.compensated_drift(&g);
    let jumps: Vec<CMatrix> = model
        .driver
        .intensities
        .iter()
        .enumerate()
        .map(|(b, l)| g[model.driver.poisson_column(b)].scale_re(1.0 / l.sqrt()))
        .collect();
    let nb = model.driver.n_brownian;

    let mut path = DriverPath::new(&model.driver, stream_rng(seed, trial));
    let mut u = CMatrix::identity(d);
    let mut segments = Vec::new();
    record(0.0, &u);
    for step in 0..steps {
        path.step(step as f64 * dt, dt, &mut segments);
        for seg in &segments {
            let mut inc = drift.scale_re(seg.length);
            for a in 0..nb {
                inc += &g[a].scale_re(seg.dw[a]);
            }
            u = &u + &(&inc * &u);
            if let Some(b) = seg.jump {
                u = &u + &(&jumps[b] * &u);
            }
        }
        record((step + 1) as f64 * dt, &u);
    }
    Ok(u)
}

/// One path (trial 0) up to `t_max`, recorded at every grid point.
pub fn integrate_sde(model: &SdeModel, t_max: f64, dt: f64, seed: u64) -> Result<SdePath> {
    let mut times = Vec::new();
    let mut states = Vec::new();
    integrate(model, t_max, dt, seed, 0, |t, u| {
        times.push(t);
        states.push(u.clone());
    })?;
    Ok(SdePath { times, states })
}

/// `U_{t_max}` of trial `trial`. The grid is `t_max / round(t_max/dt)`.
pub fn integrate_sde_trial(model: &SdeModel, t_max: f64, dt: f64, seed: u64, trial: u64) -> Result<CMatrix> {
    integrate(model, t_max, dt, seed, trial, |_, _| {})
}

/// `E[U_t] = exp(Ã t)`: the noise terms are martingales.
pub fn mean_unitary_exact(model: &SdeModel, t: f64) -> Result<CMatrix> {
    matrix_exponential(&model.a_tilde.scale_re(t))
}

/// `E[U_t ρ U_t†]` from the linear mean equation
/// `d/dt E[X] = Ã E[X] + E[X] Ã† + Σ_a G_a E[X] G_a†`, integrated exactly in
/// row-major vectorised form.
pub fn mean_conjugation_exact(model: &SdeModel, rho: &CMatrix, t: f64) -> Result<CMatrix> {
    let d = model.dim_sys();
    if rho.rows() != d || rho.cols() != d {
        return Err(Error::Dimension(format!("rho must be {d}x{d}")));
    }
    let id = CMatrix::identity(d);
    let mut s = &model.a_tilde.kron(&id) + &id.kron(&model.a_tilde.conj());
    for g in model.noise_operators() {
        s += &g.kron(&g.conj());
    }
    let prop = matrix_exponential(&s.scale_re(t))?;
    let v: CVector = prop.matvec(&rho.vec_rows())?;
    CMatrix::from_vec_rows(d, d, &v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::c;
    use crate::stats::MatrixMoments;

    fn hamiltonian() -> CMatrix {
        CMatrix::from_rows(&[&[c(1.0, 0.0), c(0.3, -0.2)], &[c(0.3, 0.2), c(-0.5, 0.0)]])
    }

    #[test]
    fn deterministic_ode_converges() {
        let a = hamiltonian().scale(c(0.0, -1.0));
        let model = SdeModel::new(a.clone(), Vec::new(), DriverSpec::brownian(0)).unwrap();
        let exact = matrix_exponential(&a).unwrap();
        let e1 = integrate_sde(&model, 1.0, 1e-3, 0).unwrap().terminal().distance(&exact);
        let e2 = integrate_sde(&model, 1.0, 5e-4, 0).unwrap().terminal().distance(&exact);
        assert!(e1 < 5e-3 && e2 < e1 * 0.6, "{e1} {e2}");
    }

    #[test]
    fn poisson_model_is_piecewise_unitary() {
        // dU = -iH U dt + (W - I) U dN: between jumps exp(-iH dt), at jumps W.
        let h = hamiltonian();
        let w = CMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let id = CMatrix::identity(2);
        let a = &(&h.scale(c(0.0, -1.0)) + &w) - &id;
        let b = &id - &w;
        let driver = DriverSpec::new(0, alloc::vec![1.0], CMatrix::from_rows(&[&[c(-1.0, 0.0)]])).unwrap();
        let model = SdeModel::new(a, alloc::vec![b], driver).unwrap();
        for dt in [1e-2, 1e-3] {
            let path = integrate_sde(&model, 2.0, dt, 9).unwrap();
            let worst = path.states.iter().map(|u| u.unitarity_residual().unwrap()).fold(0.0, f64::max);
            assert!(worst < 50.0 * dt, "dt {dt}: {worst}");
        }
    }

    #[test]
    fn mean_equation_matches_monte_carlo() {
        let o = CMatrix::from_rows(&[&[c(0.0, 0.4), c(0.2, 0.1)], &[c(-0.2, 0.1), c(0.0, -0.3)]]);
        let a = &hamiltonian().scale(c(0.0, -1.0)) - &o.adjoint().matmul(&o).unwrap().scale_re(0.5);
        let model = SdeModel::new(a, alloc::vec![o], DriverSpec::brownian(1)).unwrap();
        let exact = mean_unitary_exact(&model, 1.0).unwrap();
        let mut mm = MatrixMoments::new(2, 2);
        for trial in 0..4000 {
            mm.push(&integrate_sde_trial(&model, 1.0, 2e-3, 5, trial).unwrap());
        }
        let diff = &mm.mean() - &exact;
        let se = mm.stderr();
        for k in 0..4 {
            let (r, cc) = (k / 2, k % 2);
            assert!(diff[(r, cc)].norm() < 4.0 * se[(r, cc)].re + 5e-3, "{diff:?} {se:?}");
        }
    }

    #[test]
    fn conjugation_mean_preserves_trace_for_unitary_limit() {
        let o = CMatrix::from_rows(&[&[c(0.0, 0.4), c(0.2, 0.1)], &[c(-0.2, 0.1), c(0.0, -0.3)]]);
        let a = &hamiltonian().scale(c(0.0, -1.0)) - &o.adjoint().matmul(&o).unwrap().scale_re(0.5);
        let model = SdeModel::new(a, alloc::vec![o], DriverSpec::brownian(1)).unwrap();
        let rho = CMatrix::from_real_rows(&[&[0.7, 0.1], &[0.1, 0.3]]);
        let out = mean_conjugation_exact(&model, &rho, 1.3).unwrap();
        assert!((out.trace() - c(1.0, 0.0)).norm() < 1e-12);
        assert!(out.hermiticity_residual() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let err = SdeModel::new(CMatrix::identity(2), Vec::new(), DriverSpec::brownian(1)).unwrap_err();
        assert!(matches!(err, Error::Dimension(_)));
    }
}
