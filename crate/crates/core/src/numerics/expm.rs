//! Matrix exponential.
//!
//! General matrices go through scaling and squaring with diagonal Padé
//! approximants of degree 3, 5, 7, 9 or 13, choosing the lowest degree whose
//! backward-error bound covers `‖m‖₁` (Higham, 2005). Skew-Hermitian input
//! is exponentiated through the eigen-decomposition of `-i·m`, which keeps the
//! result unitary to rounding.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use super::{hermitian_eigen, solve, CMatrix, C64};
use crate::error::Result;

const THETA: [(usize, f64); 4] =
    [(3, 1.495585217958292e-2), (5, 2.53939833006323e-1), (7, 9.504178996162932e-1), (9, 2.097847961257068e0)];
const THETA_13: f64 = 5.371920351148152e0;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const B9: [f64; 10] =
    [17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0, 2162160.0, 110880.0, 3960.0, 90.0, 1.0];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// `exp(m)`. Skew-Hermitian input uses the spectral route, everything else
/// Padé scaling and squaring.
pub fn matrix_exponential(m: &CMatrix) -> Result<CMatrix> {
    m.ensure_square()?;
    let skew = (m + &m.adjoint()).frobenius_norm();
    if skew <= 1e-14 * m.frobenius_norm().max(1.0) {
        expm_skew_hermitian(m)
    } else {
        expm_pade(m)
    }
}

/// `exp(m)` for skew-Hermitian `m` via `m = i·H`, `exp(m) = V e^{iΛ} V†`.
pub fn expm_skew_hermitian(m: &CMatrix) -> Result<CMatrix> {
    m.ensure_square()?;
    let h = m.scale(C64::new(0.0, -1.0));
    let eig = hermitian_eigen(&h)?;
    let phases: Vec<C64> = eig.values.iter().map(|l| C64::new(0.0, *l).exp()).collect();
    let d = CMatrix::diagonal(&phases);
    Ok(&(&eig.vectors * &d) * &eig.vectors.adjoint())
}

/// `exp(m)` by scaling and squaring with Padé approximants.
pub fn expm_pade(m: &CMatrix) -> Result<CMatrix> {
    let n = m.ensure_square()?;
    let id = CMatrix::identity(n);
    let norm = m.norm_one();

    for (deg, theta) in THETA {
        if norm <= theta {
            let coeffs: &[f64] = match deg {
                3 => &B3,
                5 => &B5,
                7 => &B7,
                _ => &B9,
            };
            return pade_low(m, coeffs, &id);
        }
    }

    let s = if norm > THETA_13 { (norm / THETA_13).log2().ceil() as i32 } else { 0 };
    let a = m.scale_re(0.5f64.powi(s));
    let b = &B13;
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let lin = |c6: f64, c4: f64, c2: f64| -> CMatrix { &(&a6.scale_re(c6) + &a4.scale_re(c4)) + &a2.scale_re(c2) };
    let u_inner = &(&a6 * &lin(b[13], b[11], b[9])) + &(&lin(b[7], b[5], b[3]) + &id.scale_re(b[1]));
    let u = &a * &u_inner;
    let v = &(&a6 * &lin(b[12], b[10], b[8])) + &(&lin(b[6], b[4], b[2]) + &id.scale_re(b[0]));
    let mut r = solve(&(&v - &u), &(&v + &u))?;
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}

fn pade_low(a: &CMatrix, b: &[f64], id: &CMatrix) -> Result<CMatrix> {
    let a2 = a * a;
    let mut power = id.clone();
    let mut u_even = CMatrix::zeros(a.rows(), a.cols());
    let mut v = CMatrix::zeros(a.rows(), a.cols());
    for k in (0..b.len()).step_by(2) {
        v += &power.scale_re(b[k]);
        u_even += &power.scale_re(b[k + 1]);
        power = &power * &a2;
    }
    let u = a * &u_even;
    solve(&(&v - &u), &(&v + &u))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hermitian(n: usize, seed: u64) -> CMatrix {
        let mut s = seed;
        let mut next = move || {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s % 2000) as f64 / 1000.0 - 1.0
        };
        let g = CMatrix::from_fn(n, n, |_, _| C64::new(next(), next()));
        (&g + &g.adjoint()).scale_re(0.5)
    }

    #[test]
    fn exp_zero_is_identity() {
        let z = CMatrix::zeros(3, 3);
        assert!(matrix_exponential(&z).unwrap().distance(&CMatrix::identity(3)) < 1e-15);
        assert!(expm_pade(&z).unwrap().distance(&CMatrix::identity(3)) < 1e-15);
    }

    #[test]
    fn pauli_y_rotation() {
        let theta = 0.83;
        let y = CMatrix::from_rows(&[
            &[C64::new(0.0, 0.0), C64::new(0.0, -1.0)],
            &[C64::new(0.0, 1.0), C64::new(0.0, 0.0)],
        ]);
        let e = matrix_exponential(&y.scale(C64::new(0.0, theta))).unwrap();
        // exp(iθY) = cos θ I + i sin θ Y
        let expected = &CMatrix::identity(2).scale_re(theta.cos()) + &y.scale(C64::new(0.0, theta.sin()));
        assert!(e.distance(&expected) < 1e-14);
        let tr = e.trace();
        assert!((tr - C64::new(2.0 * theta.cos(), 0.0)).norm() < 1e-14);
    }

    #[test]
    fn pade_and_spectral_routes_agree() {
        for (n, seed, scale) in [(2, 3, 0.1), (4, 5, 2.0), (8, 7, 9.0), (16, 11, 10.0)] {
            let h = hermitian(n, seed);
            let h = h.scale_re(scale / h.frobenius_norm());
            let m = h.scale(C64::new(0.0, -1.0));
            let a = expm_pade(&m).unwrap();
            let b = expm_skew_hermitian(&m).unwrap();
            assert!(a.distance(&b) < 1e-11, "n={n}: {}", a.distance(&b));
            assert!(b.is_unitary(1e-10));
            assert!(a.is_unitary(1e-10));
        }
    }

    #[test]
    fn taylor_oracle_third_order() {
        let h = hermitian(3, 19);
        let mut prev = 0.0;
        for (k, step) in [0.02, 0.01, 0.005].iter().enumerate() {
            let m = h.scale(C64::new(0.0, -step));
            let e = expm_pade(&m).unwrap();
            let taylor = &(&CMatrix::identity(3) + &m) + &(&m * &m).scale_re(0.5);
            let err = e.distance(&taylor);
            if k > 0 {
                let ratio = prev / err;
                assert!((ratio - 8.0).abs() < 0.5, "ratio {ratio}");
            }
            prev = err;
        }
    }

    #[test]
    fn non_normal_against_closed_form() {
        // exp([[a, 1], [0, a]]) = e^a [[1, 1], [0, 1]]
        for a in [0.001, 0.3, 4.0, 20.0] {
            let m = CMatrix::from_real_rows(&[&[a, 1.0], &[0.0, a]]);
            let e = matrix_exponential(&m).unwrap();
            let ea = a.exp();
            let expected = CMatrix::from_real_rows(&[&[ea, ea], &[0.0, ea]]);
            assert!(e.distance(&expected) < 1e-13 * ea * 4.0, "a={a}");
        }
    }

    #[test]
    fn rejects_non_square() {
        assert!(matrix_exponential(&CMatrix::zeros(2, 3)).is_err());
    }
}
