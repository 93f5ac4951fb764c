//! Complex obtuse systems and obtuse random variables.
//!
//! An obtuse system of `C^N` is a family `v_1, …, v_{N+1}` with
//! `⟨v_i, v_j⟩ = -1` for `i ≠ j`. Its canonical law `p_i = 1/(1 + ‖v_i‖²)`
//! makes the random variable `X = v_i` (with probability `p_i`) centred with
//! identity covariance.
//!
//! Outcomes are indexed from 0 in this crate; user-facing output shifts to
//! 1-based indices.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::{random::gram_schmidt, CMatrix, CVector, C64, STRUCT_TOL};
use crate::rng::stream_rng;

/// Residuals of the three canonical identities
/// `Σ p_i = 1`, `Σ p_i v_i = 0`, `Σ p_i |v_i⟩⟨v_i| = I`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LawResiduals {
    pub total_probability: f64,
    pub mean: f64,
    pub covariance: f64,
}

impl LawResiduals {
    pub fn max(&self) -> f64 {
        self.total_probability.max(self.mean).max(self.covariance)
    }
}

/// `N+1` vectors of `C^N` with pairwise inner products `-1`, together with
/// their canonical probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct ObtuseSystem {
    dim: usize,
    vectors: Vec<CVector>,
    probabilities: Vec<f64>,
}

/// Checks the obtuse condition and computes the canonical law.
pub fn validate_obtuse(vectors: Vec<CVector>) -> Result<ObtuseSystem> {
    validate_obtuse_with_tol(vectors, STRUCT_TOL)
}

/// [`validate_obtuse`] with an explicit tolerance. The pairwise test is
/// relative to `max(1, ‖v_i‖‖v_j‖)`.
pub fn validate_obtuse_with_tol(vectors: Vec<CVector>, tol: f64) -> Result<ObtuseSystem> {
    let count = vectors.len();
    if count < 2 {
        return Err(Error::Dimension(format!("need at least 2 vectors, got {count}")));
    }
    let dim = count - 1;
    if let Some(bad) = vectors.iter().position(|v| v.dim() != dim) {
        return Err(Error::Dimension(format!(
            "vector {} has dimension {}, expected {dim}",
            bad + 1,
            vectors[bad].dim()
        )));
    }
    for i in 0..count {
        for j in (i + 1)..count {
            let ip = vectors[i].inner(&vectors[j]);
            let scale = (vectors[i].norm() * vectors[j].norm()).max(1.0);
            if (ip + C64::new(1.0, 0.0)).norm() > tol * scale {
                return Err(Error::NotObtuse { i: i + 1, j: j + 1, re: ip.re, im: ip.im });
            }
        }
    }
    let probabilities = vectors.iter().map(|v| 1.0 / (1.0 + v.norm_sqr())).collect();
    let sys = ObtuseSystem { dim, vectors, probabilities };
    let res = sys.law_residuals();
    if res.max() > tol * sys.scale() {
        return Err(Error::Consistency(format!("canonical law identities fail: {res:?}")));
    }
    Ok(sys)
}

/// Canonical obtuse system realising the probability vector `p`.
///
/// The rows `r_0 = (√p_1, …, √p_{N+1})`, `r_1, …, r_N` of a unitary matrix are
/// built by Gram–Schmidt against the canonical basis in index order, and
/// `v_i^k = r_k[i] / √p_i`. Each coordinate is then sign-normalised so that
/// its first non-zero value is positive. The result is real.
pub fn obtuse_from_probabilities(p: &[f64]) -> Result<ObtuseSystem> {
    check_probabilities(p)?;
    let n1 = p.len();
    let first = CVector::from_real(&p.iter().map(|x| x.sqrt()).collect::<Vec<_>>());
    let mut rows = alloc::vec![first];
    for k in 0..n1 {
        if rows.len() == n1 {
            break;
        }
        let mut candidate = rows.clone();
        candidate.push(CVector::basis(n1, k));
        if let Some(ortho) = gram_schmidt(&candidate) {
            rows = ortho;
        }
    }
    if rows.len() != n1 {
        return Err(Error::Consistency("could not complete the probability row".into()));
    }
    let dim = n1 - 1;
    let mut vectors: Vec<CVector> = (0..n1)
        .map(|i| {
            let s = p[i].sqrt();
            CVector::from_vec((1..n1).map(|k| C64::new(rows[k][i].re / s, 0.0)).collect())
        })
        .collect();
    for k in 0..dim {
        if let Some(first_nz) = vectors.iter().map(|v| v[k].re).find(|x| x.abs() > 1e-12) {
            if first_nz < 0.0 {
                for v in &mut vectors {
                    v[k] = -v[k];
                }
            }
        }
    }
    let sys = validate_obtuse(vectors)?;
    // The computed law must reproduce the requested one.
    for (a, b) in sys.probabilities.iter().zip(p) {
        if (a - b).abs() > 1e-12 {
            return Err(Error::Consistency(format!("law mismatch {a} vs {b}")));
        }
    }
    Ok(ObtuseSystem { probabilities: p.to_vec(), ..sys })
}

fn check_probabilities(p: &[f64]) -> Result<()> {
    if p.len() < 2 {
        return Err(Error::InvalidProbabilities("need at least two outcomes".into()));
    }
    if let Some(i) = p.iter().position(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(Error::InvalidProbabilities(format!("p_{} = {} is not strictly positive", i + 1, p[i])));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidProbabilities(format!("probabilities sum to {total}")));
    }
    Ok(())
}

impl ObtuseSystem {
    /// Ambient dimension `N`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of outcomes, `N + 1`.
    pub fn outcomes(&self) -> usize {
        self.dim + 1
    }

    pub fn vectors(&self) -> &[CVector] {
        &self.vectors
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// `X^k(ω)` with the convention `X^0 ≡ 1`; `omega` is 0-based, `k ∈ 0..=N`.
    #[inline]
    pub fn coordinate(&self, omega: usize, k: usize) -> C64 {
        if k == 0 {
            C64::new(1.0, 0.0)
        } else {
            self.vectors[omega][k - 1]
        }
    }

    fn scale(&self) -> f64 {
        self.vectors.iter().map(|v| v.norm_sqr()).fold(1.0, f64::max)
    }

    pub fn law_residuals(&self) -> LawResiduals {
        let n = self.dim;
        let total = (self.probabilities.iter().sum::<f64>() - 1.0).abs();
        let mut mean = CVector::zeros(n);
        let mut cov = CMatrix::zeros(n, n);
        for (v, p) in self.vectors.iter().zip(&self.probabilities) {
            mean.axpy(C64::new(*p, 0.0), v);
            cov += &CMatrix::outer(v, v).scale_re(*p);
        }
        LawResiduals { total_probability: total, mean: mean.norm(), covariance: cov.distance(&CMatrix::identity(n)) }
    }

    /// `{R v_i}`; `R` must be unitary on `C^N`.
    pub fn apply_unitary(&self, r: &CMatrix) -> Result<ObtuseSystem> {
        if r.rows() != self.dim || r.cols() != self.dim {
            return Err(Error::Dimension(format!("rotation must be {0}x{0}", self.dim)));
        }
        if let Some(res) = r.unitarity_residual().filter(|x| *x > STRUCT_TOL) {
            return Err(Error::NotUnitary(res));
        }
        let vectors = self.vectors.iter().map(|v| r.matvec(v)).collect::<Result<Vec<_>>>()?;
        validate_obtuse(vectors)
    }

    /// The associated random variable.
    pub fn random_variable(&self) -> ObtuseRV {
        ObtuseRV { system: self.clone() }
    }
}

/// An obtuse random variable on its canonical space `Ω = {0, …, N}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ObtuseRV {
    system: ObtuseSystem,
}

impl ObtuseRV {
    pub fn new(system: ObtuseSystem) -> Self {
        Self { system }
    }

    pub fn system(&self) -> &ObtuseSystem {
        &self.system
    }

    pub fn dim(&self) -> usize {
        self.system.dim
    }

    /// Exact `E[f(ω)]` as a finite sum over outcomes.
    pub fn expectation(&self, f: impl Fn(usize) -> C64) -> C64 {
        self.system.probabilities.iter().enumerate().map(|(w, p)| f(w) * *p).sum()
    }

    /// `(E[X^1], …, E[X^N])`.
    pub fn mean(&self) -> CVector {
        CVector::from_vec((1..=self.dim()).map(|k| self.expectation(|w| self.system.coordinate(w, k))).collect())
    }

    /// `cov[i][j] = E[conj(X^i) X^j]`, `i, j ∈ 1..=N`.
    pub fn covariance(&self) -> CMatrix {
        let n = self.dim();
        let s = &self.system;
        CMatrix::from_fn(n, n, |i, j| self.expectation(|w| s.coordinate(w, i + 1).conj() * s.coordinate(w, j + 1)))
    }

    /// `E[X^i X^j conj(X^k)]` for `i, j, k ∈ 0..=N`.
    pub fn third_moment(&self, i: usize, j: usize, k: usize) -> C64 {
        let s = &self.system;
        self.expectation(|w| s.coordinate(w, i) * s.coordinate(w, j) * s.coordinate(w, k).conj())
    }

    /// Sampler over the outcome indices.
    pub fn sampler(&self) -> OutcomeSampler {
        OutcomeSampler::new(&self.system.probabilities)
    }

    /// `count` i.i.d. 0-based outcome indices, a pure function of `seed`.
    pub fn sample(&self, seed: u64, count: usize) -> Vec<usize> {
        let sampler = self.sampler();
        let mut rng = stream_rng(seed, 0);
        (0..count).map(|_| sampler.draw(&mut rng)).collect()
    }
}

/// Inverse-CDF sampler for a finite law.
#[derive(Clone, Debug)]
pub struct OutcomeSampler {
    cumulative: Vec<f64>,
}

impl OutcomeSampler {
    pub fn new(p: &[f64]) -> Self {
        let mut acc = 0.0;
        let cumulative = p
            .iter()
            .map(|x| {
                acc += x;
                acc
            })
            .collect();
        Self { cumulative }
    }

    #[inline]
    pub fn draw(&self, rng: &mut impl Rng) -> usize {
        let u: f64 = rng.random::<f64>() * self.cumulative[self.cumulative.len() - 1];
        self.cumulative.iter().position(|c| u < *c).unwrap_or(self.cumulative.len() - 1)
    }
}

/// Unitary `U` of `C^N` with `U a_i = b_i` for every `i`.
///
/// Returns `Ok(None)` when the probability vectors differ (equal laws
/// are exactly the unitary orbits). `U = Σ_i p_i |b_i⟩⟨a_i|`, which is exact
/// because `Σ_i p_i |a_i⟩⟨a_i| = I`; the result is verified before returning.
pub fn unitary_equivalence(a: &ObtuseSystem, b: &ObtuseSystem) -> Result<Option<CMatrix>> {
    if a.dim != b.dim {
        return Err(Error::Dimension(format!("dimensions {} and {} differ", a.dim, b.dim)));
    }
    let same_law =
        a.probabilities.iter().zip(&b.probabilities).all(|(x, y)| (x - y).abs() <= 1e-10 * x.max(*y).max(1e-3));
    if !same_law {
        return Ok(None);
    }
    let n = a.dim;
    let mut u = CMatrix::zeros(n, n);
    for ((va, vb), p) in a.vectors.iter().zip(&b.vectors).zip(&a.probabilities) {
        u += &CMatrix::outer(vb, va).scale_re(*p);
    }
    if !u.is_unitary(STRUCT_TOL) {
        return Ok(None);
    }
    for (va, vb) in a.vectors.iter().zip(&b.vectors) {
        let img = u.matvec(va)?;
        if img.distance(vb) > STRUCT_TOL * vb.norm().max(1.0) {
            return Ok(None);
        }
    }
    Ok(Some(u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::c;
    use alloc::vec;

    fn three_point_dim2() -> Vec<CVector> {
        vec![CVector::from_real(&[1.0, 0.0]), CVector::from_real(&[-1.0, 1.0]), CVector::from_real(&[-1.0, -2.0])]
    }

    #[test]
    fn symmetric_bernoulli() {
        let s = validate_obtuse(vec![CVector::from_real(&[1.0]), CVector::from_real(&[-1.0])]).unwrap();
        assert_eq!(s.probabilities(), &[0.5, 0.5]);
    }

    #[test]
    fn three_point_system_in_c2() {
        let s = validate_obtuse(three_point_dim2()).unwrap();
        let p = s.probabilities();
        assert!((p[0] - 0.5).abs() < 1e-15);
        assert!((p[1] - 1.0 / 3.0).abs() < 1e-15);
        assert!((p[2] - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn phased_two_point_law() {
        let (p, tau) = (0.3f64, 0.7f64);
        let q = 1.0 - p;
        let ph = C64::from_polar(1.0, tau);
        let s = validate_obtuse(vec![
            CVector::from_vec(vec![ph * (q / p).sqrt()]),
            CVector::from_vec(vec![-ph * (p / q).sqrt()]),
        ])
        .unwrap();
        let expect0 = 1.0 / (1.0 + q / p);
        let expect1 = 1.0 / (1.0 + p / q);
        assert!((s.probabilities()[0] - expect0).abs() < 1e-15);
        assert!((s.probabilities()[1] - expect1).abs() < 1e-15);
        assert!((expect0 - 0.3).abs() < 1e-15 && (expect1 - 0.7).abs() < 1e-15);
    }

    #[test]
    fn rejects_wrong_shapes_and_names_pair() {
        assert!(matches!(validate_obtuse(vec![CVector::from_real(&[1.0])]), Err(Error::Dimension(_))));
        assert!(matches!(
            validate_obtuse(vec![CVector::from_real(&[1.0, 0.0]), CVector::from_real(&[-1.0])]),
            Err(Error::Dimension(_))
        ));
        let mut vs = three_point_dim2();
        vs[2] = CVector::from_real(&[-1.0, -2.5]);
        match validate_obtuse(vs) {
            Err(Error::NotObtuse { i, j, .. }) => assert_eq!((i, j), (2, 3)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn from_probabilities_examples() {
        let s = obtuse_from_probabilities(&[0.5, 0.5]).unwrap();
        assert!((s.vectors()[0][0] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((s.vectors()[1][0] - c(-1.0, 0.0)).norm() < 1e-15);

        let h = 0.04f64;
        let s = obtuse_from_probabilities(&[1.0 / (1.0 + h), h / (1.0 + h)]).unwrap();
        assert!((s.vectors()[0][0].re - h.sqrt()).abs() < 1e-14);
        assert!((s.vectors()[1][0].re + 1.0 / h.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn from_probabilities_matches_three_point_system_up_to_rotation() {
        let target = validate_obtuse(three_point_dim2()).unwrap();
        let canon = obtuse_from_probabilities(&[0.5, 1.0 / 3.0, 1.0 / 6.0]).unwrap();
        assert_eq!(canon.probabilities(), &[0.5, 1.0 / 3.0, 1.0 / 6.0]);
        let u = unitary_equivalence(&canon, &target).unwrap().expect("same law");
        assert!(u.is_unitary(1e-10));
    }

    #[test]
    fn from_probabilities_rejects_bad_input() {
        assert!(obtuse_from_probabilities(&[1.0, 0.0]).is_err());
        assert!(obtuse_from_probabilities(&[0.5, 0.6]).is_err());
        assert!(obtuse_from_probabilities(&[-0.5, 1.5]).is_err());
    }

    #[test]
    fn rv_is_centred_and_normalised() {
        let rv = validate_obtuse(three_point_dim2()).unwrap().random_variable();
        assert!(rv.mean().norm() < 1e-12);
        assert!(rv.covariance().distance(&CMatrix::identity(2)) < 1e-12);
    }

    #[test]
    fn sampling_is_deterministic_and_centred() {
        let rv = obtuse_from_probabilities(&[0.5, 0.5]).unwrap().random_variable();
        let a = rv.sample(11, 100_000);
        assert_eq!(a, rv.sample(11, 100_000));
        let mean: f64 = a.iter().map(|w| rv.system().coordinate(*w, 1).re).sum::<f64>() / a.len() as f64;
        assert!(mean.abs() < 3.0 / (a.len() as f64).sqrt());
    }

    #[test]
    fn empirical_covariance_of_three_point_law() {
        let rv = validate_obtuse(three_point_dim2()).unwrap().random_variable();
        let count = 100_000;
        let draws = rv.sample(2024, count);
        let mut cov = CMatrix::zeros(2, 2);
        for w in &draws {
            let v = &rv.system().vectors()[*w];
            cov += &CMatrix::outer(v, v);
        }
        let cov = cov.scale_re(1.0 / count as f64);
        assert!(cov.max_abs() > 0.5);
        for i in 0..2 {
            for j in 0..2 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((cov[(i, j)] - c(target, 0.0)).norm() < 0.02);
            }
        }
    }

    #[test]
    fn equivalence_identity_and_mismatch() {
        let a = validate_obtuse(three_point_dim2()).unwrap();
        let u = unitary_equivalence(&a, &a).unwrap().unwrap();
        assert!(u.distance(&CMatrix::identity(2)) < 1e-12);
        let b = obtuse_from_probabilities(&[0.2, 0.3, 0.5]).unwrap();
        assert_eq!(unitary_equivalence(&a, &b).unwrap(), None);
        let one = obtuse_from_probabilities(&[0.5, 0.5]).unwrap();
        assert!(unitary_equivalence(&a, &one).is_err());
    }

    #[test]
    fn third_moment_symmetric_in_first_pair() {
        let rv = validate_obtuse(three_point_dim2()).unwrap().random_variable();
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    assert_eq!(rv.third_moment(i, j, k), rv.third_moment(j, i, k));
                }
            }
        }
    }
}
