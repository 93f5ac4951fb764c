use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{CMatrix, CVector, C64};

fn gaussian(rng: &mut impl Rng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * core::f64::consts::FRAC_1_SQRT_2
}

/// Haar-distributed unitary: Gram–Schmidt on a complex Ginibre matrix.
pub fn random_unitary(rng: &mut impl Rng, n: usize) -> CMatrix {
    let cols = random_orthonormal_basis(rng, n);
    CMatrix::from_columns(&cols).expect("non-empty basis")
}

/// Haar-random orthonormal basis of `C^n`.
pub fn random_orthonormal_basis(rng: &mut impl Rng, n: usize) -> Vec<CVector> {
    loop {
        let raw: Vec<CVector> = (0..n).map(|_| CVector::from_vec((0..n).map(|_| gaussian(rng)).collect())).collect();
        if let Some(basis) = gram_schmidt(&raw) {
            return basis;
        }
    }
}

/// Modified Gram–Schmidt with one re-orthogonalisation pass; `None` when the
/// input is numerically dependent.
pub fn gram_schmidt(vs: &[CVector]) -> Option<Vec<CVector>> {
    let mut out: Vec<CVector> = Vec::with_capacity(vs.len());
    for v in vs {
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &out {
                let c = q.inner(&w);
                w.axpy(-c, q);
            }
        }
        let nrm = w.norm();
        if nrm <= 1e-10 * v.norm().max(1e-300) {
            return None;
        }
        out.push(w.scale(C64::new(1.0 / nrm, 0.0)));
    }
    Some(out)
}

/// Random Hermitian matrix with entries of unit scale.
pub fn random_hermitian(rng: &mut impl Rng, n: usize) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| gaussian(rng));
    (&g + &g.adjoint()).scale_re(0.5)
}

/// Random density matrix `G G† / Tr(G G†)`.
pub fn random_density(rng: &mut impl Rng, n: usize) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| gaussian(rng));
    let m = &g * &g.adjoint();
    let tr = m.trace().re;
    m.scale_re(1.0 / tr)
}

/// Random probability vector with every entry at least `floor`.
pub fn random_probabilities(rng: &mut impl Rng, n: usize, floor: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = raw.iter().sum();
    let free = 1.0 - floor * n as f64;
    raw.iter().map(|x| floor + free * x / total).collect()
}
