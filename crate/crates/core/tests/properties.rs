//! Randomised invariants across modules, with nalgebra as an independent
//! eigenvalue oracle.

use cuwalk_core::channel::random_classical_unitary;
use cuwalk_core::numerics::random::{random_density, random_hermitian, random_probabilities, random_unitary};
use cuwalk_core::numerics::{expm_skew_hermitian, hermitian_eigen, matrix_exponential};
use cuwalk_core::obtuse::obtuse_from_probabilities;
use cuwalk_core::rng::stream_rng;
use cuwalk_core::tensor3::{multiplication_matrix, rv_from_tensor, tensor_from_rv, verify_double_symmetry};
use cuwalk_core::walk::{simulate_walk, WalkOptions, Walker};
use cuwalk_core::{CMatrix, C64};
use nalgebra::{Complex, DMatrix};
use proptest::prelude::*;

fn to_nalgebra(m: &CMatrix) -> DMatrix<Complex<f64>> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| Complex::new(m[(i, j)].re, m[(i, j)].im))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn canonical_system_has_requested_law(seed in any::<u64>(), n in 1usize..6) {
        let p = random_probabilities(&mut stream_rng(seed, 0), n + 1, 0.01);
        let s = obtuse_from_probabilities(&p).unwrap();
        for (a, b) in s.probabilities().iter().zip(&p) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        prop_assert!(s.law_residuals().max() < 1e-10);
    }

    #[test]
    fn rotated_systems_keep_law_and_tensor_symmetry(seed in any::<u64>(), n in 1usize..5) {
        let mut rng = stream_rng(seed, 1);
        let p = random_probabilities(&mut rng, n + 1, 0.02);
        let s = obtuse_from_probabilities(&p).unwrap().apply_unitary(&random_unitary(&mut rng, n)).unwrap();
        for (a, b) in s.probabilities().iter().zip(&p) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        let t = tensor_from_rv(&s.random_variable());
        prop_assert!(verify_double_symmetry(&t, 1e-11).passes());
    }

    #[test]
    fn tensor_round_trip_recovers_the_law(seed in any::<u64>(), n in 1usize..4) {
        let mut rng = stream_rng(seed, 2);
        let p = random_probabilities(&mut rng, n + 1, 0.05);
        let s = obtuse_from_probabilities(&p).unwrap().apply_unitary(&random_unitary(&mut rng, n)).unwrap();
        let back = rv_from_tensor(&tensor_from_rv(&s.random_variable()), 1e-10).unwrap();
        let mut got = back.system().probabilities().to_vec();
        let mut want = p.clone();
        got.sort_by(f64::total_cmp);
        want.sort_by(f64::total_cmp);
        for (a, b) in got.iter().zip(&want) {
            prop_assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn multiplication_matrices_commute(seed in any::<u64>(), n in 2usize..5) {
        let mut rng = stream_rng(seed, 3);
        let p = random_probabilities(&mut rng, n + 1, 0.05);
        let s = obtuse_from_probabilities(&p).unwrap().apply_unitary(&random_unitary(&mut rng, n)).unwrap();
        let t = tensor_from_rv(&s.random_variable());
        let a = multiplication_matrix(&t, 1).unwrap();
        let b = multiplication_matrix(&t, n).unwrap();
        prop_assert!(a.commutator(&b).max_abs() < 1e-9 * (1.0 + a.max_abs() * b.max_abs()));
    }

    #[test]
    fn hermitian_spectrum_matches_nalgebra(seed in any::<u64>(), n in 1usize..7) {
        let h = random_hermitian(&mut stream_rng(seed, 4), n);
        let ours = hermitian_eigen(&h).unwrap();
        let mut oracle: Vec<f64> = to_nalgebra(&h).symmetric_eigenvalues().iter().copied().collect();
        oracle.sort_by(f64::total_cmp);
        for (a, b) in ours.values.iter().zip(&oracle) {
            prop_assert!((a - b).abs() < 1e-10, "{:?} vs {:?}", ours.values, oracle);
        }
        let d = CMatrix::diagonal(&ours.values.iter().map(|&x| C64::new(x, 0.0)).collect::<Vec<_>>());
        let back = &(&ours.vectors * &d) * &ours.vectors.adjoint();
        prop_assert!(back.distance(&h) < 1e-10);
    }

    #[test]
    fn exponential_of_skew_hermitian_is_unitary(seed in any::<u64>(), n in 1usize..6, scale in 0.01f64..20.0) {
        let h = random_hermitian(&mut stream_rng(seed, 5), n).scale(C64::new(0.0, scale));
        let u = expm_skew_hermitian(&h).unwrap();
        prop_assert!(u.is_unitary(1e-10));
        let v = matrix_exponential(&h).unwrap();
        prop_assert!(u.distance(&v) < 1e-9 * (1.0 + scale));
        let inv = matrix_exponential(&h.scale_re(-1.0)).unwrap();
        prop_assert!((&u * &inv).distance(&CMatrix::identity(n)) < 1e-9);
    }

    #[test]
    fn kronecker_mixed_product(seed in any::<u64>()) {
        let mut rng = stream_rng(seed, 6);
        let (a, b) = (random_unitary(&mut rng, 2), random_hermitian(&mut rng, 3));
        let (c, d) = (random_hermitian(&mut rng, 2), random_unitary(&mut rng, 3));
        let lhs = &a.kron(&b) * &c.kron(&d);
        let rhs = (&a * &c).kron(&(&b * &d));
        prop_assert!(lhs.distance(&rhs) < 1e-12);
    }

    #[test]
    fn channels_preserve_trace_and_positivity(seed in any::<u64>(), ds in 1usize..4, de in 2usize..5) {
        let mut rng = stream_rng(seed, 7);
        let cu = random_classical_unitary(&mut rng, ds, de).unwrap();
        prop_assert!(cu.u_total().is_unitary(1e-10));
        prop_assert!(cu.reconstruction_residual() < 1e-9);
        let rho = random_density(&mut rng, ds);
        let out = cu.channel().unwrap().apply(&rho).unwrap();
        prop_assert!((out.trace() - C64::new(1.0, 0.0)).norm() < 1e-12);
        prop_assert!(hermitian_eigen(&out).unwrap().values[0] > -1e-12);
        let choi = cu.channel().unwrap().choi();
        prop_assert!(hermitian_eigen(&choi).unwrap().values[0] > -1e-10);
    }

    #[test]
    fn walks_are_unitary_and_reproducible(seed in any::<u64>(), steps in 0usize..40) {
        let cu = random_classical_unitary(&mut stream_rng(seed, 8), 2, 3).unwrap();
        let a = simulate_walk(&cu, steps, seed).unwrap();
        let b = simulate_walk(&cu, steps, seed).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.unitarity_residual() < 1e-10);
        let walker = Walker::new(&cu).unwrap();
        let terminal = walker.simulate(WalkOptions { retain: false, ..WalkOptions::new(steps, seed) });
        prop_assert_eq!(terminal.terminal(), a.terminal());
    }
}
