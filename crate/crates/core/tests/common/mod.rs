#![allow(dead_code)]

use std::f64::consts::{FRAC_PI_2, PI};

use clocksim::collective::genramsey_uncertainty;
use clocksim::evolution::{dephase_evolve, drho_ddelta, DephasingParams};
use clocksim::fisher::{qfi, qfi_uncertainty};
use clocksim::qstate::{collective_moments, DensityMatrix, SymmetricFamilyState};
use clocksim::ramsey::{improvement_pct, reference_limit, ExperimentBudget};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;

/// Angular step of the brute-force search over the coefficient circle.
pub const GRID_STEP: f64 = 1e-2;

/// Dense scan of a positive interval followed by ternary refinement. Slow and
/// simple on purpose: it must not share code with the library optimizers.
pub fn brute_force_min(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    let points = 400;
    let xs: Vec<f64> = (0..=points)
        .map(|i| lo * (hi / lo).powf(i as f64 / points as f64))
        .collect();
    let vals: Vec<f64> = xs
        .iter()
        .map(|&x| {
            let v = f(x);
            if v.is_finite() {
                v
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let best = (0..xs.len())
        .min_by(|&a, &b| vals[a].total_cmp(&vals[b]))
        .unwrap();
    let (mut a, mut b) = (xs[best.saturating_sub(1)], xs[(best + 1).min(points)]);
    for _ in 0..200 {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if f(m1) <= f(m2) {
            b = m2;
        } else {
            a = m1;
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Collective-measurement uncertainty at delta t = pi/2, minimized over t by
/// brute force from the error-propagation formula.
pub fn genramsey_brute(n: usize, gamma: f64, total_time: f64, coeffs: &[f64]) -> f64 {
    let state = SymmetricFamilyState::normalized(n, coeffs).unwrap();
    let m0 = collective_moments(&state.to_state());
    let f = |t: f64| {
        let budget = ExperimentBudget::new(n, total_time, t).unwrap();
        genramsey_uncertainty(&m0, &budget, FRAC_PI_2 / t, gamma).unwrap_or(f64::INFINITY)
    };
    brute_force_min(f, 1e-3 / gamma, 5.0 / gamma).1
}

/// Optimal-measurement uncertainty from the dense QFI, minimized over t by
/// brute force.
pub fn qfi_brute(n: usize, gamma: f64, total_time: f64, coeffs: &[f64]) -> f64 {
    let state = SymmetricFamilyState::normalized(n, coeffs).unwrap();
    let rho0 = DensityMatrix::from(&state.to_state());
    let f = |t: f64| {
        let p = DephasingParams::new(0.3, gamma, t).unwrap();
        qfi(&dephase_evolve(&rho0, &p), &drho_ddelta(&rho0, &p))
            .and_then(|r| qfi_uncertainty(r.qfi, total_time, t))
            .unwrap_or(f64::INFINITY)
    };
    brute_force_min(f, 1e-3 / gamma, 5.0 / gamma).1
}

/// Best improvement over the unit circle of two-coefficient families
/// (n = 2, 3) with angular resolution `GRID_STEP`. Returns (improvement, angle).
pub fn circle_grid_oracle(
    n: usize,
    gamma: f64,
    total_time: f64,
    score: fn(usize, f64, f64, &[f64]) -> f64,
) -> (f64, f64) {
    assert_eq!(SymmetricFamilyState::dimension(n), 2);
    let reference = reference_limit(n, total_time, gamma);
    let steps = (PI / GRID_STEP).ceil() as usize;
    (0..steps)
        .map(|i| {
            let theta = i as f64 * GRID_STEP;
            let v = score(n, gamma, total_time, &[theta.cos(), theta.sin()]);
            (
                if v.is_finite() {
                    improvement_pct(v, reference)
                } else {
                    f64::NEG_INFINITY
                },
                theta,
            )
        })
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap()
}

/// Random mixed state of rank up to `1 << n`.
pub fn random_density<R: Rng>(rng: &mut R, n: usize) -> DensityMatrix {
    let dim = 1 << n;
    let rank = rng.gen_range(1..=dim);
    let g = DMatrix::from_fn(dim, rank, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let mut rho = &g * g.adjoint();
    let tr = rho.trace();
    rho /= tr;
    let rho = (&rho + rho.adjoint()) * C64::new(0.5, 0.0);
    DensityMatrix::new(n, rho).unwrap()
}

/// Haar-like random unitary from the QR decomposition of a complex Gaussian matrix.
pub fn random_unitary<R: Rng>(rng: &mut R, dim: usize) -> DMatrix<C64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let phases = DMatrix::from_diagonal(&DVector::from_fn(dim, |i, _| {
        let d = r[(i, i)];
        d / d.norm()
    }));
    q * phases
}
