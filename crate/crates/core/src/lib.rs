//! # cuwalk-core
//!
//! Classical unitary interactions between a small quantum system `H` and an
//! environment copy `K = C^{N+1}`, and the random walks they induce on the
//! unitary group of `H`.
//!
//! A bipartite unitary of branch form `U = Σ_i U_i ⊗ |φ_i⟩⟨φ_i|` acts on `H`
//! exactly like the random unitary that equals `U_i` with probability
//! `|⟨e_0, φ_i⟩|²`. This crate makes that statement computational:
//!
//! - [`obtuse`]: complex obtuse systems `{v_1, …, v_{N+1}} ⊂ C^N` with
//!   `⟨v_i, v_j⟩ = -1`, their canonical law and sampling.
//! - [`tensor3`]: the tensor `S^{ij}_k = E[X^i X^j conj(X^k)]` and the matrices
//!   of the multiplication operators `M_{X^i}` in the basis `{X^0, …, X^N}`.
//! - [`channel`]: Kraus/Choi machinery and the decomposition
//!   `U = A ⊗ I + Σ_j B_j ⊗ M_{X^j}`.
//! - [`walk`]: the discrete random walk `V_{n+1} = U_{i_{n+1}} V_n` and its
//!   exact dilation on `H ⊗ K^{⊗n}`.
//! - [`limit`]: limit tensors, Brownian/Poisson drivers, the limit SDE and
//!   weak-convergence studies.
//! - [`presets`]: the worked two- and three-level families used by tests and
//!   the CLI.
//!
//! The crate is `no_std` and needs only `alloc`. All randomness is explicit:
//! every Monte-Carlo routine takes a seed and a trial index (see [`rng`]).
//!
//! Inner products are conjugate-linear in the first argument. Kronecker
//! products put the system factor first.

#![no_std]
#![forbid(unsafe_code)]
// `!(x <= tol)` is deliberate: NaN residuals must fail the check.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod channel;
pub mod error;
pub mod limit;
pub mod numerics;
pub mod obtuse;
pub mod presets;
pub mod rng;
pub mod stats;
pub mod tensor3;
pub mod walk;

pub use error::{Error, Result};
pub use numerics::{CMatrix, CVector, C64};
