//! Quantum channels and classical unitaries.
//!
//! A unitary `U` on `H ⊗ K` and an environment state `ω` define the channel
//! `L(ρ) = Tr_K(U (ρ ⊗ ω) U†)`. When `U = Σ_i U_i ⊗ |φ_i⟩⟨φ_i|` for an
//! orthonormal basis `{φ_i}` of `K = C^{N+1}` (a classical unitary) and
//! `ω = |e_0⟩⟨e_0|`, the channel is the random unitary
//! `ρ ↦ Σ_i p_i U_i ρ U_i†` with `p_i = |⟨e_0, φ_i⟩|²`, and
//!
//! ```text
//! U = A ⊗ I + Σ_j B_j ⊗ M_{X^j}
//! ```
//!
//! where `X` is the obtuse random variable with `v_i^j = conj(φ_i[j] / φ_i[0])`,
//! `A = Σ_i p_i U_i` and `B_j = Σ_i p_i conj(v_i^j) U_i`. In block form `A`
//! and `B_j` are the `(0, 0)` and `(j, 0)` environment blocks of `U`.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::numerics::{
    env_matrix_element, hermitian_eigen, orthonormality_residual, partial_trace_env, CMatrix, CVector, C64, STRUCT_TOL,
};
use crate::obtuse::{validate_obtuse_with_tol, ObtuseRV};
use crate::tensor3::{multiplication_matrix, tensor_from_rv, ThreeTensor};

/// Minimum `|⟨e_0, φ_i⟩|` accepted by the decomposition.
pub const OVERLAP_FLOOR: f64 = 1e-12;
/// Reconstruction residual above which the decomposition is reported as a
/// bug rather than a numerical artefact.
const RECONSTRUCTION_LIMIT: f64 = 1e-6;

/// Completely positive trace-preserving map given by Kraus operators.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumChannel {
    dim: usize,
    krauss: Vec<CMatrix>,
}

impl QuantumChannel {
    /// Checks shapes and `Σ L_i† L_i = I` to `1e-10`.
    pub fn new(krauss: Vec<CMatrix>) -> Result<Self> {
        let first = krauss.first().ok_or_else(|| Error::Dimension("empty Kraus list".into()))?;
        let dim = first.ensure_square()?;
        let mut sum = CMatrix::zeros(dim, dim);
        for (k, l) in krauss.iter().enumerate() {
            if l.rows() != dim || l.cols() != dim {
                return Err(Error::Dimension(format!(
                    "Kraus operator {} is {}x{}, expected {dim}x{dim}",
                    k + 1,
                    l.rows(),
                    l.cols()
                )));
            }
            sum += &(&l.adjoint() * l);
        }
        let res = sum.distance(&CMatrix::identity(dim));
        if !(res <= STRUCT_TOL) {
            return Err(Error::Consistency(format!("Kraus operators are not trace preserving ({res:.3e})")));
        }
        Ok(Self { dim, krauss })
    }

    /// `ρ ↦ Σ_i p_i U_i ρ U_i†`.
    pub fn random_unitary(probabilities: &[f64], unitaries: &[CMatrix]) -> Result<Self> {
        if probabilities.len() != unitaries.len() {
            return Err(Error::Dimension("probabilities and unitaries differ in length".into()));
        }
        Self::new(probabilities.iter().zip(unitaries).map(|(p, u)| u.scale_re(p.sqrt())).collect())
    }

    pub fn identity(dim: usize) -> Self {
        Self { dim, krauss: alloc::vec![CMatrix::identity(dim)] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn krauss(&self) -> &[CMatrix] {
        &self.krauss
    }

    pub fn apply(&self, rho: &CMatrix) -> Result<CMatrix> {
        if rho.rows() != self.dim || rho.cols() != self.dim {
            return Err(Error::Dimension(format!("state must be {0}x{0}", self.dim)));
        }
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for l in &self.krauss {
            out += &(&(l * rho) * &l.adjoint());
        }
        Ok(out)
    }

    /// Choi matrix `Σ_{a,b} |a⟩⟨b| ⊗ L(|a⟩⟨b|)`.
    pub fn choi(&self) -> CMatrix {
        let d = self.dim;
        CMatrix::from_fn(d * d, d * d, |r, s| {
            let (a, c) = (r / d, r % d);
            let (b, e) = (s / d, s % d);
            self.krauss.iter().map(|l| l[(c, a)] * l[(e, b)].conj()).sum()
        })
    }
}

/// `true` iff both channels have the same dimension and their Choi matrices
/// agree to `tol` in Frobenius norm.
pub fn channels_equal(a: &QuantumChannel, b: &QuantumChannel, tol: f64) -> bool {
    a.dim == b.dim && a.choi().distance(&b.choi()) <= tol
}

/// Kraus form of `ρ ↦ Tr_K(U (ρ ⊗ ω) U†)`:
/// `L_{(i,k)} = √λ_k (I ⊗ ⟨e_i|) U (I ⊗ |g_k⟩)` for `ω = Σ_k λ_k |g_k⟩⟨g_k|`.
pub fn channel_from_unitary(u: &CMatrix, omega: &CMatrix, dim_sys: usize, dim_env: usize) -> Result<QuantumChannel> {
    let n = dim_sys * dim_env;
    if u.rows() != n || u.cols() != n {
        return Err(Error::Dimension(format!("unitary is {}x{}, expected {n}x{n}", u.rows(), u.cols())));
    }
    if let Some(res) = u.unitarity_residual().filter(|r| !(*r <= STRUCT_TOL)) {
        return Err(Error::NotUnitary(res));
    }
    if omega.rows() != dim_env || omega.cols() != dim_env {
        return Err(Error::Dimension(format!("environment state must be {dim_env}x{dim_env}")));
    }
    omega.check_density(STRUCT_TOL)?;
    let eig = hermitian_eigen(omega)?;
    let mut krauss = Vec::new();
    for (k, lambda) in eig.values.iter().enumerate() {
        if *lambda <= 1e-15 {
            continue;
        }
        let g = eig.vectors.column(k);
        for i in 0..dim_env {
            let l = env_matrix_element(u, dim_sys, &CVector::basis(dim_env, i), &g)?;
            krauss.push(l.scale_re(lambda.sqrt()));
        }
    }
    QuantumChannel::new(krauss)
}

/// The decomposition `U = A ⊗ I + Σ_j B_j ⊗ M_{X^j}` of a classical unitary.
#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    pub rv: ObtuseRV,
    pub tensor: ThreeTensor,
    pub a: CMatrix,
    pub b: Vec<CMatrix>,
    /// `‖U - (A ⊗ I + Σ_j B_j ⊗ M_j)‖_F`.
    pub reconstruction_residual: f64,
}

impl Decomposition {
    pub fn probabilities(&self) -> &[f64] {
        self.rv.system().probabilities()
    }

    /// `A ⊗ I + Σ_j B_j ⊗ M_{X^j}`.
    pub fn reconstruct(&self) -> CMatrix {
        let m = self.tensor.n() + 1;
        let mut out = self.a.kron(&CMatrix::identity(m));
        for (j, bj) in self.b.iter().enumerate() {
            let mj = multiplication_matrix(&self.tensor, j + 1).expect("index in range");
            out += &bj.kron(&mj);
        }
        out
    }
}

/// `U = Σ_i U_i ⊗ |φ_i⟩⟨φ_i|` together with its decomposition.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassicalUnitary {
    dim_sys: usize,
    dim_env: usize,
    branches: Vec<(CVector, CMatrix)>,
    u_total: CMatrix,
    decomposition: Decomposition,
}

/// Validates the branches, assembles `U` and decomposes it.
pub fn build_classical_unitary(branches: Vec<(CVector, CMatrix)>) -> Result<ClassicalUnitary> {
    let dim_env = branches.len();
    if dim_env < 2 {
        return Err(Error::Dimension(format!("need at least 2 branches, got {dim_env}")));
    }
    let dim_sys = branches[0].1.ensure_square()?;
    for (i, (phi, ui)) in branches.iter().enumerate() {
        if phi.dim() != dim_env {
            return Err(Error::Dimension(format!(
                "branch {} vector has dimension {}, expected {dim_env}",
                i + 1,
                phi.dim()
            )));
        }
        if ui.rows() != dim_sys || ui.cols() != dim_sys {
            return Err(Error::Dimension(format!(
                "branch {} unitary is {}x{}, expected {dim_sys}x{dim_sys}",
                i + 1,
                ui.rows(),
                ui.cols()
            )));
        }
        if let Some(res) = ui.unitarity_residual().filter(|r| !(*r <= STRUCT_TOL)) {
            return Err(Error::NotUnitary(res));
        }
    }
    let phis: Vec<CVector> = branches.iter().map(|b| b.0.clone()).collect();
    let ortho = orthonormality_residual(&phis);
    if !(ortho <= STRUCT_TOL) {
        return Err(Error::NotOrthonormal(ortho));
    }
    let mut u_total = CMatrix::zeros(dim_sys * dim_env, dim_sys * dim_env);
    for (phi, ui) in &branches {
        u_total += &ui.kron(&CMatrix::outer(phi, phi));
    }
    let decomposition = decompose_branches(&branches, &u_total)?;
    Ok(ClassicalUnitary { dim_sys, dim_env, branches, u_total, decomposition })
}

fn decompose_branches(branches: &[(CVector, CMatrix)], u_total: &CMatrix) -> Result<Decomposition> {
    let dim_env = branches.len();
    let n = dim_env - 1;
    let dim_sys = branches[0].1.rows();
    let mut vectors = Vec::with_capacity(dim_env);
    for (i, (phi, _)) in branches.iter().enumerate() {
        let o = phi[0];
        if o.norm() < OVERLAP_FLOOR {
            return Err(Error::VanishingOverlap(i + 1));
        }
        vectors.push(CVector::new((1..dim_env).map(|j| (phi[j] / o).conj()).collect())?);
    }
    // Large |v| near the overlap floor make the pairwise test ill-conditioned;
    // the scaled tolerance in `validate_obtuse_with_tol` absorbs that.
    let sys = validate_obtuse_with_tol(vectors, 1e-9)?;
    let p: Vec<f64> = branches.iter().map(|(phi, _)| phi[0].norm_sqr()).collect();
    let mut a = CMatrix::zeros(dim_sys, dim_sys);
    let mut b = alloc::vec![CMatrix::zeros(dim_sys, dim_sys); n];
    for (i, (_, ui)) in branches.iter().enumerate() {
        a += &ui.scale_re(p[i]);
        for (j, bj) in b.iter_mut().enumerate() {
            *bj += &ui.scale(sys.vectors()[i][j].conj() * p[i]);
        }
    }

    // Block formulas: A = (I⊗⟨e_0|)U(I⊗|e_0⟩), B_j = (I⊗⟨e_j|)U(I⊗|e_0⟩).
    let e0 = CVector::basis(dim_env, 0);
    let scale = 1f64.max(a.frobenius_norm());
    let block_a = env_matrix_element(u_total, dim_sys, &e0, &e0)?;
    let mut block_res = block_a.distance(&a);
    for (j, bj) in b.iter().enumerate() {
        let block = env_matrix_element(u_total, dim_sys, &CVector::basis(dim_env, j + 1), &e0)?;
        block_res = block_res.max(block.distance(bj));
    }
    if block_res > RECONSTRUCTION_LIMIT * scale {
        return Err(Error::Consistency(format!("block formulas disagree ({block_res:.3e})")));
    }

    let rv = sys.random_variable();
    let tensor = tensor_from_rv(&rv);
    let mut dec = Decomposition { rv, tensor, a, b, reconstruction_residual: 0.0 };
    dec.reconstruction_residual = dec.reconstruct().distance(u_total);
    if !(dec.reconstruction_residual <= RECONSTRUCTION_LIMIT) {
        return Err(Error::Consistency(format!("reconstruction residual {:.3e}", dec.reconstruction_residual)));
    }
    Ok(dec)
}

impl ClassicalUnitary {
    pub fn dim_sys(&self) -> usize {
        self.dim_sys
    }

    /// `N + 1`.
    pub fn dim_env(&self) -> usize {
        self.dim_env
    }

    pub fn branches(&self) -> &[(CVector, CMatrix)] {
        &self.branches
    }

    pub fn unitaries(&self) -> Vec<CMatrix> {
        self.branches.iter().map(|b| b.1.clone()).collect()
    }

    pub fn u_total(&self) -> &CMatrix {
        &self.u_total
    }

    pub fn decomposition(&self) -> &Decomposition {
        &self.decomposition
    }

    pub fn probabilities(&self) -> &[f64] {
        self.decomposition.probabilities()
    }

    pub fn rv(&self) -> &ObtuseRV {
        &self.decomposition.rv
    }

    pub fn a(&self) -> &CMatrix {
        &self.decomposition.a
    }

    pub fn b(&self) -> &[CMatrix] {
        &self.decomposition.b
    }

    pub fn reconstruction_residual(&self) -> f64 {
        self.decomposition.reconstruction_residual
    }

    /// `max_i ‖A + Σ_j v_i^j B_j - U_i‖_F`.
    pub fn branch_residual(&self) -> f64 {
        let vs = self.rv().system().vectors();
        self.branches
            .iter()
            .zip(vs)
            .map(|((_, ui), v)| {
                let mut acc = self.a().clone();
                for (j, bj) in self.b().iter().enumerate() {
                    acc += &bj.scale(v[j]);
                }
                acc.distance(ui)
            })
            .fold(0.0, f64::max)
    }

    /// The averaged channel for environment state `|e_0⟩⟨e_0|`.
    pub fn channel(&self) -> Result<QuantumChannel> {
        let e0 = CVector::basis(self.dim_env, 0);
        channel_from_unitary(&self.u_total, &CMatrix::outer(&e0, &e0), self.dim_sys, self.dim_env)
    }
}

/// Comparison of the decomposition in the basis `{e_0, f_1, …, f_N}` with
/// `f_j = Σ_k R_kj e_k` against the original one.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisChangeReport {
    /// `‖Ã - A‖_F`.
    pub a_residual: f64,
    /// `max_j ‖B̃_j - Σ_k conj(R_kj) B_k‖_F`.
    pub b_residual: f64,
    /// `‖(I⊗Q)(Ã⊗I + Σ B̃_j⊗M̃_j)(I⊗Q†) - U‖_F`, `Q = diag(1, R)`.
    pub reconstruction_residual: f64,
    pub rotated: Decomposition,
}

impl BasisChangeReport {
    pub fn max_residual(&self) -> f64 {
        self.a_residual.max(self.b_residual).max(self.reconstruction_residual)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_residual() <= tol
    }
}

pub fn basis_change_invariance_check(u: &ClassicalUnitary, r: &CMatrix) -> Result<BasisChangeReport> {
    let n = u.dim_env - 1;
    if r.rows() != n || r.cols() != n {
        return Err(Error::Dimension(format!("rotation must be {n}x{n}")));
    }
    if let Some(res) = r.unitarity_residual().filter(|x| !(*x <= STRUCT_TOL)) {
        return Err(Error::NotUnitary(res));
    }
    let q = CMatrix::from_fn(n + 1, n + 1, |i, j| match (i, j) {
        (0, 0) => C64::new(1.0, 0.0),
        (0, _) | (_, 0) => C64::new(0.0, 0.0),
        _ => r[(i - 1, j - 1)],
    });
    let q_adj = q.adjoint();
    let rotated_branches: Vec<(CVector, CMatrix)> =
        u.branches.iter().map(|(phi, ui)| Ok((q_adj.matvec(phi)?, ui.clone()))).collect::<Result<_>>()?;
    let mut rotated_total = CMatrix::zeros(u.u_total.rows(), u.u_total.cols());
    for (phi, ui) in &rotated_branches {
        rotated_total += &ui.kron(&CMatrix::outer(phi, phi));
    }
    let rotated = decompose_branches(&rotated_branches, &rotated_total)?;

    let a_residual = rotated.a.distance(u.a());
    let mut b_residual = 0.0f64;
    for j in 0..n {
        let mut expected = CMatrix::zeros(u.dim_sys, u.dim_sys);
        for k in 0..n {
            expected += &u.b()[k].scale(r[(k, j)].conj());
        }
        b_residual = b_residual.max(rotated.b[j].distance(&expected));
    }
    let iq = CMatrix::identity(u.dim_sys).kron(&q);
    let back = &(&iq * &rotated.reconstruct()) * &iq.adjoint();
    let reconstruction_residual = back.distance(&u.u_total);
    Ok(BasisChangeReport { a_residual, b_residual, reconstruction_residual, rotated })
}

/// Both sides of the random-unitary identity for one input state.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomUnitaryReport {
    /// `Σ_i ⟨φ_i|ω|φ_i⟩ U_i ρ U_i†`.
    pub mixture: CMatrix,
    /// `Tr_K(U (ρ ⊗ ω) U†)`.
    pub channel_output: CMatrix,
    pub residual: f64,
}

/// Compares the random-unitary mixture with the dilated channel. `omega`
/// defaults to `|e_0⟩⟨e_0|`, for which the weights are `p_i`.
pub fn random_unitary_action(
    u: &ClassicalUnitary,
    rho: &CMatrix,
    omega: Option<&CMatrix>,
) -> Result<RandomUnitaryReport> {
    rho.check_density(STRUCT_TOL)?;
    let e0 = CVector::basis(u.dim_env, 0);
    let default = CMatrix::outer(&e0, &e0);
    let omega = omega.unwrap_or(&default);
    let mut mixture = CMatrix::zeros(u.dim_sys, u.dim_sys);
    for (phi, ui) in &u.branches {
        let w = phi.inner(&omega.matvec(phi)?);
        mixture += &(&(ui * rho) * &ui.adjoint()).scale(w);
    }
    let channel = channel_from_unitary(&u.u_total, omega, u.dim_sys, u.dim_env)?;
    let channel_output = channel.apply(rho)?;
    // Independent route through the dilation itself.
    let dilated = &(&u.u_total * &rho.kron(omega)) * &u.u_total.adjoint();
    let traced = partial_trace_env(&dilated, u.dim_sys, u.dim_env)?;
    let residual = mixture.distance(&channel_output).max(traced.distance(&channel_output));
    Ok(RandomUnitaryReport { mixture, channel_output, residual })
}

// Irregular weights for the Hermitian probe of `is_branch_form`.
const PROBE: [(f64, f64); 5] = [
    (0.7548776662, 0.5698402910),
    (-0.3248, 0.8141),
    (0.5772156649, -0.2718281828),
    (0.9183, 0.1416),
    (-0.4142, -0.7320),
];

/// Heuristic test for the branch form `U = Σ_i U_i ⊗ |φ_i⟩⟨φ_i|`.
///
/// Every `K`-slice `T_ab = (⟨a| ⊗ I) U (|b⟩ ⊗ I)` of a branch-form unitary is
/// diagonal in the basis `{φ_i}`. A generic Hermitian combination of the
/// slices is diagonalised; if all slices are diagonal in its eigenbasis the
/// branches are read off and the reassembled unitary is compared with `U`.
/// A `None` answer does not prove that no branch form exists.
pub fn is_branch_form(
    u: &CMatrix,
    dim_sys: usize,
    dim_env: usize,
    tol: f64,
) -> Result<Option<Vec<(CVector, CMatrix)>>> {
    let n = dim_sys * dim_env;
    if u.rows() != n || u.cols() != n {
        return Err(Error::Dimension(format!("operator must be {n}x{n}")));
    }
    let slice = |a: usize, b: usize| CMatrix::from_fn(dim_env, dim_env, |e, f| u[(a * dim_env + e, b * dim_env + f)]);
    let slices: Vec<CMatrix> = (0..dim_sys * dim_sys).map(|ab| slice(ab / dim_sys, ab % dim_sys)).collect();
    let mut probe = CMatrix::zeros(dim_env, dim_env);
    for (idx, t) in slices.iter().enumerate() {
        let (re, im) = PROBE[idx % PROBE.len()];
        let c = C64::new(re, im) * (1.0 + 0.3819660113 * idx as f64);
        probe += &t.scale(c);
        probe += &t.adjoint().scale(c.conj());
    }
    let basis = hermitian_eigen(&probe)?.vectors;
    let phis: Vec<CVector> = (0..dim_env).map(|k| basis.column(k)).collect();
    let mut unitaries = alloc::vec![CMatrix::zeros(dim_sys, dim_sys); dim_env];
    for (ab, t) in slices.iter().enumerate() {
        let d = &(&basis.adjoint() * t) * &basis;
        for r in 0..dim_env {
            for s in 0..dim_env {
                if r != s && d[(r, s)].norm() > tol {
                    return Ok(None);
                }
            }
            unitaries[r][(ab / dim_sys, ab % dim_sys)] = d[(r, r)];
        }
    }
    if unitaries.iter().any(|ui| !ui.is_unitary(tol.max(STRUCT_TOL))) {
        return Ok(None);
    }
    let mut rebuilt = CMatrix::zeros(n, n);
    for (phi, ui) in phis.iter().zip(&unitaries) {
        rebuilt += &ui.kron(&CMatrix::outer(phi, phi));
    }
    if rebuilt.distance(u) > tol * (n as f64).sqrt() {
        return Ok(None);
    }
    Ok(Some(phis.into_iter().zip(unitaries).collect()))
}

/// Haar-random branch states and branch unitaries.
pub fn random_classical_unitary(rng: &mut impl rand::Rng, dim_sys: usize, dim_env: usize) -> Result<ClassicalUnitary> {
    if dim_sys == 0 || dim_env < 2 {
        return Err(Error::Dimension(format!("need dim_sys >= 1 and dim_env >= 2, got {dim_sys} and {dim_env}")));
    }
    let phis = crate::numerics::random::random_orthonormal_basis(rng, dim_env);
    let branches = phis.into_iter().map(|phi| (phi, crate::numerics::random::random_unitary(rng, dim_sys))).collect();
    build_classical_unitary(branches)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::random::{random_density, random_orthonormal_basis, random_unitary};
    use crate::numerics::{c, matrix_exponential};
    use crate::rng::stream_rng;

    fn pauli_rotation(theta: f64, axis: usize) -> CMatrix {
        let z = c(0.0, 0.0);
        let gen = match axis {
            0 => CMatrix::from_rows(&[&[z, c(1.0, 0.0)], &[c(1.0, 0.0), z]]),
            1 => CMatrix::from_rows(&[&[z, c(0.0, -1.0)], &[c(0.0, 1.0), z]]),
            _ => CMatrix::from_rows(&[&[c(1.0, 0.0), z], &[z, c(-1.0, 0.0)]]),
        };
        matrix_exponential(&gen.scale(c(0.0, -theta))).unwrap()
    }

    fn two_level(p: f64, tau: f64) -> (ClassicalUnitary, CMatrix, CMatrix) {
        let q = 1.0 - p;
        let em = C64::from_polar(1.0, -tau);
        let phi = CVector::new(alloc::vec![c(p.sqrt(), 0.0), em * q.sqrt()]).unwrap();
        let psi = CVector::new(alloc::vec![c(-q.sqrt(), 0.0), em * p.sqrt()]).unwrap();
        let u1 = pauli_rotation(0.4, 0);
        let u2 = pauli_rotation(-1.1, 2);
        let cu = build_classical_unitary(alloc::vec![(phi, u1.clone()), (psi, u2.clone())]).unwrap();
        (cu, u1, u2)
    }

    #[test]
    fn two_level_decomposition() {
        let (p, tau) = (0.3, 0.7);
        let q = 1.0 - p;
        let (cu, u1, u2) = two_level(p, tau);
        let a = &u1.scale_re(p) + &u2.scale_re(q);
        let b = (&u1 - &u2).scale(C64::from_polar((p * q).sqrt(), -tau));
        assert!(cu.a().distance(&a) < 1e-12);
        assert!(cu.b()[0].distance(&b) < 1e-12);
        let v = cu.rv().system().vectors();
        assert!((v[0][0] - C64::from_polar((q / p).sqrt(), tau)).norm() < 1e-12);
        assert!((v[1][0] + C64::from_polar((p / q).sqrt(), tau)).norm() < 1e-12);
        assert!(cu.reconstruction_residual() < 1e-12);
        assert!(cu.branch_residual() < 1e-12);
    }

    #[test]
    fn equal_branches_give_no_noise() {
        let v = pauli_rotation(0.9, 1);
        let basis = random_orthonormal_basis(&mut stream_rng(4, 0), 3);
        let cu = build_classical_unitary(basis.into_iter().map(|phi| (phi, v.clone())).collect()).unwrap();
        assert!(cu.u_total().distance(&v.kron(&CMatrix::identity(3))) < 1e-12);
        assert!(cu.b().iter().all(|b| b.frobenius_norm() < 1e-12));
        assert!(cu.a().distance(&v) < 1e-12);
    }

    #[test]
    fn physical_example_law() {
        let h: f64 = 0.01;
        let s = (1.0 + h).sqrt();
        let phi1 = CVector::from_real(&[1.0 / s, -h.sqrt() / s]);
        let phi2 = CVector::from_real(&[h.sqrt() / s, 1.0 / s]);
        let u1 = pauli_rotation(0.1, 2);
        let u2 = pauli_rotation(0.8, 0);
        let cu = build_classical_unitary(alloc::vec![(phi1, u1), (phi2, u2)]).unwrap();
        let p = cu.probabilities();
        assert!((p[0] - 1.0 / (1.0 + h)).abs() < 1e-14);
        assert!((p[1] - h / (1.0 + h)).abs() < 1e-14);
        let v = cu.rv().system().vectors();
        assert!((v[0][0] - c(-h.sqrt(), 0.0)).norm() < 1e-12);
        assert!((v[1][0] - c(1.0 / h.sqrt(), 0.0)).norm() < 1e-10);
    }

    #[test]
    fn random_instance_reconstructs() {
        let mut rng = stream_rng(11, 0);
        let phis = random_orthonormal_basis(&mut rng, 4);
        let branches = phis.into_iter().map(|phi| (phi, random_unitary(&mut rng, 3))).collect();
        let cu = build_classical_unitary(branches).unwrap();
        assert!(cu.reconstruction_residual() <= 1e-9);
        assert!(cu.branch_residual() <= 1e-9);
    }

    #[test]
    fn vanishing_overlap_is_rejected() {
        let e = |i| CVector::basis(2, i);
        let err = build_classical_unitary(alloc::vec![(e(0), CMatrix::identity(2)), (e(1), CMatrix::identity(2))])
            .unwrap_err();
        assert_eq!(err, Error::VanishingOverlap(2));
        assert!(format!("{err}").contains("choose different e0"));
    }

    #[test]
    fn invalid_branches_are_rejected() {
        let basis = random_orthonormal_basis(&mut stream_rng(5, 0), 2);
        let bad = CMatrix::from_real_rows(&[&[1.0, 1.0], &[0.0, 1.0]]);
        assert!(matches!(
            build_classical_unitary(alloc::vec![(basis[0].clone(), bad), (basis[1].clone(), CMatrix::identity(2))]),
            Err(Error::NotUnitary(_))
        ));
        let skew = CVector::from_real(&[0.8, 0.8]);
        assert!(matches!(
            build_classical_unitary(alloc::vec![
                (basis[0].clone(), CMatrix::identity(2)),
                (skew, CMatrix::identity(2))
            ]),
            Err(Error::NotOrthonormal(_))
        ));
    }

    #[test]
    fn identity_unitary_gives_identity_channel() {
        let e0 = CVector::basis(3, 0);
        let ch = channel_from_unitary(&CMatrix::identity(6), &CMatrix::outer(&e0, &e0), 2, 3).unwrap();
        assert!(channels_equal(&ch, &QuantumChannel::identity(2), 1e-12));
    }

    #[test]
    fn swap_gives_constant_channel() {
        let swap = CMatrix::from_fn(4, 4, |r, s| {
            let (a, b) = (r / 2, r % 2);
            if s == b * 2 + a {
                c(1.0, 0.0)
            } else {
                c(0.0, 0.0)
            }
        });
        let e0 = CVector::basis(2, 0);
        let zero = CMatrix::outer(&e0, &e0);
        let ch = channel_from_unitary(&swap, &zero, 2, 2).unwrap();
        let rho = random_density(&mut stream_rng(9, 0), 2);
        assert!(ch.apply(&rho).unwrap().distance(&zero) < 1e-12);
        assert!(!channels_equal(&ch, &QuantumChannel::identity(2), 1e-6));
    }

    #[test]
    fn kraus_freedom_and_padding() {
        let (cu, u1, u2) = two_level(0.3, 0.7);
        let ch = cu.channel().unwrap();
        let mix = QuantumChannel::random_unitary(&[0.3, 0.7], &[u1, u2]).unwrap();
        assert!(channels_equal(&ch, &mix, 1e-10));

        // Rotating the Kraus list by a unitary mixing matrix.
        let w = random_unitary(&mut stream_rng(1, 0), 2);
        let ks = mix.krauss();
        let rotated: Vec<CMatrix> = (0..2).map(|i| &ks[0].scale(w[(i, 0)]) + &ks[1].scale(w[(i, 1)])).collect();
        assert!(channels_equal(&mix, &QuantumChannel::new(rotated).unwrap(), 1e-12));

        let mut padded = ks.to_vec();
        padded.push(CMatrix::zeros(2, 2));
        assert!(channels_equal(&mix, &QuantumChannel::new(padded).unwrap(), 1e-15));
    }

    #[test]
    fn choi_is_positive_with_trace_dim() {
        let mut rng = stream_rng(21, 0);
        let u = random_unitary(&mut rng, 6);
        let omega = random_density(&mut rng, 3);
        let ch = channel_from_unitary(&u, &omega, 2, 3).unwrap();
        let choi = ch.choi();
        assert!((choi.trace() - c(2.0, 0.0)).norm() < 1e-10);
        let eig = hermitian_eigen(&choi).unwrap();
        assert!(eig.values[0] >= -1e-10);
        let rho = random_density(&mut rng, 2);
        let direct = partial_trace_env(&(&(&u * &rho.kron(&omega)) * &u.adjoint()), 2, 3).unwrap();
        assert!(ch.apply(&rho).unwrap().distance(&direct) < 1e-10);
    }

    #[test]
    fn channel_rejects_bad_inputs() {
        let e0 = CVector::basis(2, 0);
        let w = CMatrix::outer(&e0, &e0);
        let not_unitary = CMatrix::identity(4).scale_re(2.0);
        assert!(matches!(channel_from_unitary(&not_unitary, &w, 2, 2), Err(Error::NotUnitary(_))));
        let not_density = CMatrix::identity(2);
        assert!(channel_from_unitary(&CMatrix::identity(4), &not_density, 2, 2).is_err());
    }

    #[test]
    fn random_unitary_action_matches_dilation() {
        let (cu, _, _) = two_level(0.3, 0.7);
        let e0 = CVector::basis(2, 0);
        let r = random_unitary_action(&cu, &CMatrix::outer(&e0, &e0), None).unwrap();
        assert!(r.residual < 1e-12);
        let mixed = CMatrix::identity(2).scale_re(0.5);
        let r = random_unitary_action(&cu, &mixed, None).unwrap();
        assert!(r.mixture.distance(&mixed) < 1e-12);
        let omega = random_density(&mut stream_rng(2, 0), 2);
        let r = random_unitary_action(&cu, &mixed, Some(&omega)).unwrap();
        assert!(r.residual < 1e-12);
    }

    #[test]
    fn basis_change_identity_and_random() {
        let mut rng = stream_rng(17, 0);
        let phis = random_orthonormal_basis(&mut rng, 3);
        let branches = phis.into_iter().map(|phi| (phi, random_unitary(&mut rng, 2))).collect();
        let cu = build_classical_unitary(branches).unwrap();
        let rep = basis_change_invariance_check(&cu, &CMatrix::identity(2)).unwrap();
        assert!(rep.max_residual() < 1e-12);
        let r = random_unitary(&mut rng, 2);
        let rep = basis_change_invariance_check(&cu, &r).unwrap();
        assert!(rep.passes(1e-9), "{rep:?}");
    }

    #[test]
    fn phase_rotation_multiplies_values_by_phases() {
        let mut rng = stream_rng(23, 0);
        let phis = random_orthonormal_basis(&mut rng, 3);
        let branches = phis.into_iter().map(|phi| (phi, random_unitary(&mut rng, 2))).collect();
        let cu = build_classical_unitary(branches).unwrap();
        let (a, b) = (0.3, -1.2);
        let r = CMatrix::diagonal(&[C64::from_polar(1.0, a), C64::from_polar(1.0, b)]);
        let rep = basis_change_invariance_check(&cu, &r).unwrap();
        assert!(rep.a_residual < 1e-12);
        let old = cu.rv().system().vectors();
        let new = rep.rotated.rv.system().vectors();
        for (v, w) in old.iter().zip(new) {
            assert!((w[0] - v[0] * C64::from_polar(1.0, a)).norm() < 1e-10);
            assert!((w[1] - v[1] * C64::from_polar(1.0, b)).norm() < 1e-10);
        }
    }

    #[test]
    fn branch_form_detection() {
        let mut rng = stream_rng(31, 0);
        let phis = random_orthonormal_basis(&mut rng, 3);
        let branches: Vec<(CVector, CMatrix)> =
            phis.into_iter().map(|phi| (phi, random_unitary(&mut rng, 2))).collect();
        let cu = build_classical_unitary(branches).unwrap();
        let found = is_branch_form(cu.u_total(), 2, 3, 1e-9).unwrap().expect("branch form");
        assert_eq!(found.len(), 3);
        let generic = random_unitary(&mut rng, 6);
        assert!(is_branch_form(&generic, 2, 3, 1e-9).unwrap().is_none());
    }
}
