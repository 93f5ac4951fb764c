//! Worked families on a two-level system.
//!
//! | name             | N | limit driver                    |
//! |------------------|---|---------------------------------|
//! | `dim2-diffusive` | 1 | one Brownian motion             |
//! | `dim2-poisson`   | 1 | compensated Poisson, `Z = t - N` |
//! | `physical-1d`    | 1 | compensated Poisson, `Z = N - t` |
//! | `dim3-brownian2` | 2 | two Brownian motions            |
//! | `dim3-mixed`     | 2 | one Brownian and one Poisson    |
//! | `trivial`        | 1 | none (`B̃ = 0`)                  |
//!
//! Every family carries its generator and limit tensors in closed form, so
//! the numerical extraction can be checked against them. The operators are
//! fixed anti-Hermitian / unitary matrices; `O_i` is kept small and the
//! drift parts large enough that discretisation bias dominates Monte-Carlo
//! noise in convergence studies.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::channel::{build_classical_unitary, ClassicalUnitary};
use crate::error::{Error, Result};
use crate::limit::{Generator, HFamily, LimitTensors};
use crate::numerics::{c, matrix_exponential, CMatrix, CVector, C64};

const FRAC_1_SQRT_2: f64 = core::f64::consts::FRAC_1_SQRT_2;

/// `[[a, b - i β], [b + i β, d]]`.
fn hermitian(a: f64, b: f64, beta: f64, d: f64) -> CMatrix {
    CMatrix::from_rows(&[&[c(a, 0.0), c(b, -beta)], &[c(b, beta), c(d, 0.0)]])
}

/// `-i H`.
fn skew(h: &CMatrix) -> CMatrix {
    h.scale(c(0.0, -1.0))
}

fn expm(m: &CMatrix) -> CMatrix {
    matrix_exponential(m).expect("2x2 exponential")
}

fn scalar(z: C64) -> CMatrix {
    CMatrix::from_rows(&[&[z]])
}

/// System Hamiltonian shared by the jump families and `trivial`.
pub fn system_hamiltonian() -> CMatrix {
    hermitian(1.0, 0.3, 0.2, -0.5)
}

/// Unitary applied at a jump of `dim2-poisson`.
pub fn poisson_jump() -> CMatrix {
    let (s, co) = 0.9f64.sin_cos();
    CMatrix::from_real_rows(&[&[co, -s], &[s, co]])
}

/// Interaction Hamiltonian of `physical-1d`.
pub fn interaction_potential() -> CMatrix {
    hermitian(0.6, 0.25, -0.1, -0.3)
}

/// Branch states `√p_i (1, conj(v_i))` of an obtuse system.
fn branch_states(values: &[Vec<C64>], probabilities: &[f64]) -> Vec<CVector> {
    values
        .iter()
        .zip(probabilities)
        .map(|(v, p)| {
            let s = p.sqrt();
            let mut e = vec![c(s, 0.0)];
            e.extend(v.iter().map(|x| x.conj() * s));
            CVector::from_vec(e)
        })
        .collect()
}

fn assemble(states: Vec<CVector>, unitaries: Vec<CMatrix>) -> Result<ClassicalUnitary> {
    build_classical_unitary(states.into_iter().zip(unitaries).collect())
}

fn check_h(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("step size must be positive, got {h}")))
    }
}

fn check_p_tau(p: f64, tau: f64) -> Result<()> {
    if !(p > 0.0 && p < 1.0) || !tau.is_finite() {
        return Err(Error::InvalidParameter(format!("need 0 < p < 1 and finite tau, got p = {p}, tau = {tau}")));
    }
    Ok(())
}

/// Fixed unitaries of the single two-outcome interaction.
pub fn example_unitaries() -> (CMatrix, CMatrix) {
    let sx = hermitian(0.0, 1.0, 0.0, 0.0);
    let sz = hermitian(1.0, 0.0, 0.0, -1.0);
    (expm(&skew(&sx.scale_re(0.6))), expm(&skew(&sz.scale_re(0.4))))
}

/// Two-outcome interaction with `φ = (√p, √q e^{-iτ})`,
/// `ψ = (-√q, √p e^{-iτ})`: `A = p U_1 + q U_2` and
/// `B = √(pq) e^{-iτ} (U_1 - U_2)`.
pub fn dim2_example(p: f64, tau: f64) -> Result<ClassicalUnitary> {
    check_p_tau(p, tau)?;
    let q = 1.0 - p;
    let ph = C64::from_polar(1.0, -tau);
    let phi = CVector::from_vec(vec![c(p.sqrt(), 0.0), ph * q.sqrt()]);
    let psi = CVector::from_vec(vec![c(-q.sqrt(), 0.0), ph * p.sqrt()]);
    let (u1, u2) = example_unitaries();
    assemble(vec![phi, psi], vec![u1, u2])
}

/// Named h-families.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Preset {
    /// `U_i = exp(√h O_i + h K_i)` on the two-outcome system with
    /// `O_2 = -(p/q) O_1`.
    Dim2Diffusive { p: f64, tau: f64 },
    /// `U_1 = exp(-ihH)` with probability `1/(1+h)`, `U_2 = W` otherwise.
    Dim2Poisson,
    /// `U_1 = exp(-ih(H - V))`, `U_2 = exp(-i(hH + V))`, jump probability
    /// `h/(1+h)`.
    Physical1d,
    /// Values `(1,0), (-1,1), (-1,-2)` with `U_i = exp(√h O_i + h K_i)`,
    /// `O_1/2 + O_2/3 + O_3/6 = 0`.
    Dim3Brownian2,
    /// Two diffusive outcomes `exp(±√h O_1 + h K)` and one rare outcome
    /// with a fixed unitary.
    Dim3Mixed,
    /// `U_i = exp(-ihH)` for both outcomes.
    Trivial,
}

impl Preset {
    pub const NAMES: [&'static str; 6] =
        ["dim2-diffusive", "dim2-poisson", "physical-1d", "dim3-brownian2", "dim3-mixed", "trivial"];

    /// Looks up a preset; `p` and `tau` apply to `dim2-diffusive` only
    /// (defaults `0.5` and `0`).
    pub fn from_name(name: &str, p: Option<f64>, tau: Option<f64>) -> Result<Preset> {
        let preset = match name {
            "dim2-diffusive" => {
                let (p, tau) = (p.unwrap_or(0.5), tau.unwrap_or(0.0));
                check_p_tau(p, tau)?;
                Preset::Dim2Diffusive { p, tau }
            }
            "dim2-poisson" => Preset::Dim2Poisson,
            "physical-1d" => Preset::Physical1d,
            "dim3-brownian2" => Preset::Dim3Brownian2,
            "dim3-mixed" => Preset::Dim3Mixed,
            "trivial" => Preset::Trivial,
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown preset `{other}`; expected one of {}",
                    Preset::NAMES.join(", ")
                )))
            }
        };
        if !matches!(preset, Preset::Dim2Diffusive { .. }) && (p.is_some() || tau.is_some()) {
            return Err(Error::InvalidParameter(format!("preset `{name}` takes no p/tau")));
        }
        Ok(preset)
    }

    /// 0-based outcome whose occurrence is the jump of the limit, for the
    /// jump families.
    pub fn jump_outcome(&self) -> Option<usize> {
        match self {
            Preset::Dim2Poisson | Preset::Physical1d => Some(1),
            Preset::Dim3Mixed => Some(1),
            _ => None,
        }
    }

    /// `(O_1, K_1, K_2)` of `dim2-diffusive`.
    pub fn diffusive_operators() -> (CMatrix, CMatrix, CMatrix) {
        (
            skew(&hermitian(0.4, 0.3, 0.1, -0.2)),
            skew(&hermitian(1.5, 0.8, -0.4, -1.0)),
            skew(&hermitian(-0.7, 0.2, 0.9, 1.2)),
        )
    }

    /// `(O_1, O_2, O_3)` and `(K_1, K_2, K_3)` of `dim3-brownian2`.
    pub fn brownian2_operators() -> ([CMatrix; 3], [CMatrix; 3]) {
        let o1 = skew(&hermitian(0.25, 0.1, 0.05, -0.15));
        let o2 = skew(&hermitian(-0.1, 0.05, -0.2, 0.2));
        let o3 = &o1.scale_re(-3.0) - &o2.scale_re(2.0);
        let k1 = skew(&hermitian(2.5, 1.2, -0.8, -2.0));
        let k2 = skew(&hermitian(-1.5, 2.0, 1.0, 2.5));
        let k3 = skew(&hermitian(3.0, -1.0, 2.2, 0.5));
        ([o1, o2, o3], [k1, k2, k3])
    }

    /// `(O_1, K_1, K_3, U_2)` of `dim3-mixed`.
    pub fn mixed_operators() -> (CMatrix, CMatrix, CMatrix, CMatrix) {
        (
            skew(&hermitian(0.5, 0.2, 0.3, -0.4)),
            skew(&hermitian(0.8, -0.3, 0.2, 0.1)),
            skew(&hermitian(-0.2, 0.4, 0.0, 0.6)),
            expm(&skew(&hermitian(0.0, 0.7, 0.5, 0.3))),
        )
    }

    fn id() -> CMatrix {
        CMatrix::identity(2)
    }
}

impl HFamily for Preset {
    fn name(&self) -> String {
        match self {
            Preset::Dim2Diffusive { .. } => "dim2-diffusive",
            Preset::Dim2Poisson => "dim2-poisson",
            Preset::Physical1d => "physical-1d",
            Preset::Dim3Brownian2 => "dim3-brownian2",
            Preset::Dim3Mixed => "dim3-mixed",
            Preset::Trivial => "trivial",
        }
        .to_string()
    }

    fn dim_sys(&self) -> usize {
        2
    }

    fn dim_env(&self) -> usize {
        match self {
            Preset::Dim3Brownian2 | Preset::Dim3Mixed => 3,
            _ => 2,
        }
    }

    fn build(&self, h: f64) -> Result<ClassicalUnitary> {
        check_h(h)?;
        let sh = h.sqrt();
        match *self {
            Preset::Dim2Diffusive { p, tau } => {
                let q = 1.0 - p;
                let ph = C64::from_polar(1.0, -tau);
                let phi = CVector::from_vec(vec![c(p.sqrt(), 0.0), ph * q.sqrt()]);
                let psi = CVector::from_vec(vec![c(-q.sqrt(), 0.0), ph * p.sqrt()]);
                let (o1, k1, k2) = Preset::diffusive_operators();
                let o2 = o1.scale_re(-p / q);
                let u1 = expm(&(&o1.scale_re(sh) + &k1.scale_re(h)));
                let u2 = expm(&(&o2.scale_re(sh) + &k2.scale_re(h)));
                assemble(vec![phi, psi], vec![u1, u2])
            }
            Preset::Dim2Poisson => {
                let (a, b) = ((1.0 / (1.0 + h)).sqrt(), (h / (1.0 + h)).sqrt());
                let phi = CVector::from_real(&[a, b]);
                let psi = CVector::from_real(&[-b, a]);
                let u1 = expm(&skew(&system_hamiltonian().scale_re(h)));
                assemble(vec![phi, psi], vec![u1, poisson_jump()])
            }
            Preset::Physical1d => {
                let n = 1.0 / (1.0 + h).sqrt();
                let phi1 = CVector::from_real(&[n, -sh * n]);
                let phi2 = CVector::from_real(&[sh * n, n]);
                let hs = system_hamiltonian();
                let v = interaction_potential();
                let u1 = expm(&skew(&(&hs - &v).scale_re(h)));
                let u2 = expm(&skew(&(&hs.scale_re(h) + &v)));
                assemble(vec![phi1, phi2], vec![u1, u2])
            }
            Preset::Dim3Brownian2 => {
                let values =
                    [vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(-1.0, 0.0), c(1.0, 0.0)], vec![c(-1.0, 0.0), c(-2.0, 0.0)]];
                let states = branch_states(&values, &[0.5, 1.0 / 3.0, 1.0 / 6.0]);
                let (o, k) = Preset::brownian2_operators();
                let us = (0..3).map(|i| expm(&(&o[i].scale_re(sh) + &k[i].scale_re(h)))).collect();
                assemble(states, us)
            }
            Preset::Dim3Mixed => {
                let s = FRAC_1_SQRT_2;
                let r = (2.0 * h).sqrt();
                let values = [
                    vec![c(0.0, s), c(s, 0.0)],
                    vec![c(1.0, -sh) / r, c(-sh, 1.0) / r],
                    vec![c(-2.0 * sh, -1.0) * s, c(-1.0, -2.0 * sh) * s],
                ];
                let probabilities = [0.5, h / (1.0 + 2.0 * h), 1.0 / (2.0 + 4.0 * h)];
                let states = branch_states(&values, &probabilities);
                let (o1, k1, k3, u2) = Preset::mixed_operators();
                let u1 = expm(&(&o1.scale_re(sh) + &k1.scale_re(h)));
                let u3 = expm(&(&o1.scale_re(-sh) + &k3.scale_re(h)));
                assemble(states, vec![u1, u2, u3])
            }
            Preset::Trivial => {
                let u = expm(&skew(&system_hamiltonian().scale_re(h)));
                let s = FRAC_1_SQRT_2;
                assemble(vec![CVector::from_real(&[s, s]), CVector::from_real(&[-s, s])], vec![u.clone(), u])
            }
        }
    }

    fn analytic_generator(&self) -> Option<Generator> {
        let id = Preset::id();
        let half_sq = |o: &CMatrix| (o * o).scale_re(0.5);
        let g = match *self {
            Preset::Dim2Diffusive { p, tau } => {
                let q = 1.0 - p;
                let (o1, k1, k2) = Preset::diffusive_operators();
                let o2 = o1.scale_re(-p / q);
                let p1 = &k1 + &half_sq(&o1);
                let p2 = &k2 + &half_sq(&o2);
                let a = &p1.scale_re(p) + &p2.scale_re(q);
                let b = (&o1 - &o2).scale(C64::from_polar((p * q).sqrt(), -tau));
                Generator { a_tilde: a, b_tilde: vec![b] }
            }
            Preset::Dim2Poisson => {
                let w = poisson_jump();
                let a = &(&skew(&system_hamiltonian()) + &w) - &id;
                Generator { a_tilde: a, b_tilde: vec![&id - &w] }
            }
            Preset::Physical1d => {
                let v = interaction_potential();
                let ev = expm(&skew(&v));
                let a = &(&skew(&(&system_hamiltonian() - &v)) + &ev) - &id;
                Generator { a_tilde: a, b_tilde: vec![&ev - &id] }
            }
            Preset::Dim3Brownian2 => {
                let (o, k) = Preset::brownian2_operators();
                let p: Vec<CMatrix> = (0..3).map(|i| &k[i] + &half_sq(&o[i])).collect();
                let a = &(&p[0].scale_re(0.5) + &p[1].scale_re(1.0 / 3.0)) + &p[2].scale_re(1.0 / 6.0);
                let b1 = &(&o[0].scale_re(0.5) - &o[1].scale_re(1.0 / 3.0)) - &o[2].scale_re(1.0 / 6.0);
                let b2 = (&o[1] - &o[2]).scale_re(1.0 / 3.0);
                Generator { a_tilde: a, b_tilde: vec![b1, b2] }
            }
            Preset::Dim3Mixed => {
                let (o1, k1, k3, u2) = Preset::mixed_operators();
                let p1 = &k1 + &half_sq(&o1);
                let p3 = &k3 + &half_sq(&o1);
                let jump = &u2 - &id;
                let a = &(&p1 + &p3).scale_re(0.5) + &jump;
                let s = FRAC_1_SQRT_2;
                let b1 = &o1.scale(c(0.0, -s)) + &jump.scale_re(s);
                let b2 = &o1.scale_re(s) + &jump.scale(c(0.0, -s));
                Generator { a_tilde: a, b_tilde: vec![b1, b2] }
            }
            Preset::Trivial => Generator { a_tilde: skew(&system_hamiltonian()), b_tilde: vec![CMatrix::zeros(2, 2)] },
        };
        Some(g)
    }

    fn analytic_tensors(&self) -> Option<LimitTensors> {
        let zero = || scalar(c(0.0, 0.0));
        let one = || scalar(c(1.0, 0.0));
        let m = match *self {
            Preset::Dim2Diffusive { tau, .. } => {
                LimitTensors::new(scalar(C64::from_polar(1.0, 2.0 * tau)), vec![zero()])
            }
            Preset::Dim2Poisson => LimitTensors::new(one(), vec![scalar(c(-1.0, 0.0))]),
            Preset::Physical1d => LimitTensors::new(one(), vec![one()]),
            Preset::Trivial => LimitTensors::new(one(), vec![zero()]),
            Preset::Dim3Brownian2 => {
                LimitTensors::new(CMatrix::identity(2), vec![CMatrix::zeros(2, 2), CMatrix::zeros(2, 2)])
            }
            Preset::Dim3Mixed => {
                // M^{ij}_k = u_i u_j conj(u_k) / (2√2), u = (1, i).
                let u = [c(1.0, 0.0), c(0.0, 1.0)];
                let s = 0.5 * FRAC_1_SQRT_2;
                let mk = (0..2).map(|k| CMatrix::from_fn(2, 2, |i, j| u[i] * u[j] * u[k].conj() * s)).collect();
                LimitTensors::new(CMatrix::from_rows(&[&[c(0.0, 0.0), c(0.0, 1.0)], &[c(0.0, 1.0), c(0.0, 0.0)]]), mk)
            }
        };
        m.ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::limit::{
        bracket_residual, estimate_generator, estimate_limit_tensors, limit_model, synthesize_driver, DriverTemplate,
        DEFAULT_PROBE_HS,
    };

    fn all() -> Vec<Preset> {
        Preset::NAMES.iter().map(|n| Preset::from_name(n, None, None).unwrap()).collect()
    }

    #[test]
    fn presets_build_valid_classical_unitaries() {
        for fam in all() {
            for h in [0.1, 1e-3] {
                let cu = fam.build(h).unwrap();
                assert!(cu.reconstruction_residual() < 1e-10, "{}", fam.name());
                assert_eq!(cu.dim_env(), fam.dim_env());
            }
        }
        assert!(Preset::from_name("nope", None, None).is_err());
        assert!(Preset::from_name("dim2-poisson", Some(0.3), None).is_err());
        assert!(Preset::from_name("dim2-diffusive", Some(1.3), None).is_err());
    }

    #[test]
    fn extracted_limits_match_closed_forms() {
        let mut fams = all();
        fams.push(Preset::Dim2Diffusive { p: 0.3, tau: 0.7 });
        for fam in fams {
            let exact = fam.analytic_tensors().unwrap();
            let est = estimate_limit_tensors(&fam, &DEFAULT_PROBE_HS).unwrap();
            assert!(est.distance(&exact) < 1e-3, "{}: {:?}", fam.name(), est);
            let g = fam.analytic_generator().unwrap();
            let eg = estimate_generator(&fam, &DEFAULT_PROBE_HS).unwrap().generator;
            assert!(eg.a_tilde.distance(&g.a_tilde) < 2e-2, "{} A: {:?} vs {:?}", fam.name(), eg.a_tilde, g.a_tilde);
            for (b, eb) in g.b_tilde.iter().zip(&eg.b_tilde) {
                assert!(eb.distance(b) < 2e-2, "{} B", fam.name());
            }
        }
    }

    #[test]
    fn drivers_match_expected_templates() {
        let expect = [
            ("dim2-diffusive", DriverTemplate::Brownian, 1, 0),
            ("dim2-poisson", DriverTemplate::PerDirection, 0, 1),
            ("physical-1d", DriverTemplate::PerDirection, 0, 1),
            ("dim3-brownian2", DriverTemplate::Brownian, 2, 0),
            ("dim3-mixed", DriverTemplate::MixedPlane, 1, 1),
            ("trivial", DriverTemplate::Brownian, 1, 0),
        ];
        for (name, template, nb, np) in expect {
            let fam = Preset::from_name(name, None, None).unwrap();
            let m = fam.analytic_tensors().unwrap();
            let (t, d) = synthesize_driver(&m, 1e-9).unwrap();
            assert_eq!((t, d.n_brownian, d.n_poisson), (template, nb, np), "{name}");
            assert!(bracket_residual(&d, &m).unwrap() < 1e-12);
            if np == 1 {
                assert!((d.intensities[0] - 1.0).abs() < 1e-12);
            }
            limit_model(&fam, &DEFAULT_PROBE_HS, 1e-9).unwrap();
        }
    }

    #[test]
    fn jump_families_have_unitary_limits() {
        // Ã + Ã† + Σ_a G_a† G_a = 0 for every preset.
        for fam in all() {
            let (_, model) = limit_model(&fam, &DEFAULT_PROBE_HS, 1e-9).unwrap();
            let mut s = &model.a_tilde + &model.a_tilde.adjoint();
            for g in model.noise_operators() {
                s += &(&g.adjoint() * &g);
            }
            assert!(s.max_abs() < 1e-12, "{}: {s:?}", fam.name());
        }
    }

    #[test]
    fn example_interaction_has_expected_blocks() {
        let (p, tau) = (0.3, 0.7);
        let cu = dim2_example(p, tau).unwrap();
        let (u1, u2) = example_unitaries();
        let q = 1.0 - p;
        let a = &u1.scale_re(p) + &u2.scale_re(q);
        let b = (&u1 - &u2).scale(C64::from_polar((p * q).sqrt(), -tau));
        assert!(cu.a().distance(&a) < 1e-12);
        assert!(cu.b()[0].distance(&b) < 1e-12);
    }
}
