mod common;

use clocksim::collective::{
    evolved_sx2_mean, evolved_sx_mean, genramsey_opt_uncertainty, precision_bound_chain,
};
use clocksim::evolution::{dephase_evolve, drho_ddelta, DephasingParams};
use clocksim::fisher::{classical_fi, qfi, ProjectiveMeasurement};
use clocksim::qstate::{collective_moments, DensityMatrix, SymmetricFamilyState};
use clocksim::ramsey::{reference_limit, signal_ghz, signal_uncorrelated};
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn max_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn permute_bits(b: usize, perm: &[usize]) -> usize {
    perm.iter()
        .enumerate()
        .fold(0, |acc, (from, &to)| acc | (((b >> from) & 1) << to))
}

fn unit_coeffs(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, SymmetricFamilyState::dimension(n))
        .prop_filter("non-zero", |v| v.iter().map(|c| c * c).sum::<f64>() > 1e-3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn signals_are_probabilities(n in 1usize..10, delta in -20.0f64..20.0, t in 0.0f64..10.0, gamma in 0.0f64..5.0) {
        for p in [signal_uncorrelated(delta, t, gamma), signal_ghz(n, delta, t, gamma)] {
            prop_assert!((0.0..=1.0).contains(&p));
        }
    }

    #[test]
    fn family_is_permutation_and_flip_symmetric(
        (n, coeffs) in (2usize..8).prop_flat_map(|n| (Just(n), unit_coeffs(n))),
        seed in any::<u64>(),
    ) {
        let psi = SymmetricFamilyState::normalized(n, &coeffs).unwrap().to_state();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut rng);
        let full = (1usize << n) - 1;
        for b in 0..1usize << n {
            prop_assert_eq!(psi.amps()[b], psi.amps()[permute_bits(b, &perm)]);
            prop_assert_eq!(psi.amps()[b], psi.amps()[full ^ b]);
        }
    }

    #[test]
    fn dephasing_is_a_semigroup(seed in any::<u64>(), n in 1usize..4, delta in -3.0f64..3.0,
                                gamma in 0.0f64..2.0, t1 in 0.0f64..1.5, t2 in 0.0f64..1.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = common::random_density(&mut rng, n);
        let step = |r: &DensityMatrix, t| dephase_evolve(r, &DephasingParams::new(delta, gamma, t).unwrap());
        let two_steps = step(&step(&rho, t1), t2);
        let one_step = step(&rho, t1 + t2);
        prop_assert!(max_diff(two_steps.elems(), one_step.elems()) < 1e-12);
        prop_assert!((one_step.trace().re - 1.0).abs() < 1e-12);
        // populations never move
        for i in 0..1 << n {
            prop_assert!((one_step.elems()[(i, i)] - rho.elems()[(i, i)]).norm() < 1e-15);
        }
    }

    #[test]
    fn braunstein_caves_inequality(seed in any::<u64>(), n in 1usize..4, delta in -3.0f64..3.0,
                                   gamma in 0.0f64..1.0, t in 0.05f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho0 = common::random_density(&mut rng, n);
        let p = DephasingParams::new(delta, gamma, t).unwrap();
        let (rho, drho) = (dephase_evolve(&rho0, &p), drho_ddelta(&rho0, &p));
        let q = qfi(&rho, &drho).unwrap();
        let meas = ProjectiveMeasurement::from_basis(&common::random_unitary(&mut rng, 1 << n)).unwrap();
        if let Ok(fc) = classical_fi(&rho, &drho, &meas) {
            prop_assert!(fc <= q.qfi * (1.0 + 1e-9) + 1e-12, "{} > {}", fc, q.qfi);
        }
        prop_assert!(q.classical_fi_check <= q.qfi * (1.0 + 1e-9) + 1e-12);
    }

    #[test]
    fn qfi_is_unitarily_invariant(seed in any::<u64>(), n in 1usize..4, gamma in 0.0f64..1.0, t in 0.05f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho0 = common::random_density(&mut rng, n);
        let p = DephasingParams::new(0.7, gamma, t).unwrap();
        let (rho, drho) = (dephase_evolve(&rho0, &p), drho_ddelta(&rho0, &p));
        let u = common::random_unitary(&mut rng, 1 << n);
        let rot = |m: &DMatrix<C64>| {
            let r = &u * m * u.adjoint();
            (&r + r.adjoint()) * C64::new(0.5, 0.0)
        };
        let rho_u = DensityMatrix::new(n, rot(rho.elems())).unwrap();
        let a = qfi(&rho, &drho).unwrap().qfi;
        let b = qfi(&rho_u, &rot(&drho)).unwrap().qfi;
        prop_assert!((a - b).abs() <= 1e-8 * (1.0 + a.abs()), "{} vs {}", a, b);
    }

    #[test]
    fn decohered_moments_match_dense_expectations(
        (n, coeffs) in (2usize..7).prop_flat_map(|n| (Just(n), unit_coeffs(n))),
        delta in -2.0f64..2.0, gamma in 0.0f64..2.0, t in 0.0f64..2.0,
    ) {
        let psi = SymmetricFamilyState::normalized(n, &coeffs).unwrap().to_state();
        let m0 = collective_moments(&psi);
        let rho = dephase_evolve(&DensityMatrix::from(&psi), &DephasingParams::new(delta, gamma, t).unwrap());
        let sx = collective_sx(n);
        let mean = rho.expectation(&sx).re;
        let second = rho.expectation(&(&sx * &sx)).re;
        prop_assert!((evolved_sx_mean(&m0, delta, gamma, t) - mean).abs() < 1e-10);
        prop_assert!((evolved_sx2_mean(&m0, delta, gamma, t) - second).abs() < 1e-10);
    }

    #[test]
    fn optimized_collective_precision_respects_bound_chain(
        (n, coeffs) in (2usize..9).prop_flat_map(|n| (Just(n), unit_coeffs(n))),
    ) {
        let m0 = collective_moments(&SymmetricFamilyState::normalized(n, &coeffs).unwrap().to_state());
        if let Ok(r) = genramsey_opt_uncertainty(&m0, 100.0, 1.0) {
            let (state_bound, universal) = precision_bound_chain(&m0, 100.0, 1.0).unwrap();
            prop_assert!(r.delta_omega >= state_bound * (1.0 - 1e-12));
            prop_assert!(state_bound >= universal * (1.0 - 1e-12));
            prop_assert!((universal - reference_limit(n, 100.0, 1.0) * (-0.5f64).exp()).abs() < 1e-14);
        }
    }
}

/// Dense S_x = sum of single-ion sigma_x.
fn collective_sx(n: usize) -> DMatrix<C64> {
    let dim = 1 << n;
    let mut m = DMatrix::zeros(dim, dim);
    for b in 0..dim {
        for k in 0..n {
            m[(b ^ (1 << k), b)] += C64::new(1.0, 0.0);
        }
    }
    m
}
