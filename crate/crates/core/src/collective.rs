//! Generalized Ramsey spectroscopy: the collective operator S_x is measured
//! after dephased free evolution.
//!
//! Free evolution rotates S_x into cos(phi) S_x + sin(phi) S_y with
//! phi = delta t, and dephasing multiplies one-body coherences by
//! exp(-gamma t) and two-body coherences by exp(-2 gamma t):
//!
//! ```text
//! <S_x>(t)   = exp(-gamma t) <S_phi>
//! <S_x^2>(t) = n + exp(-2 gamma t) (<S_phi^2> - n)
//! ```
//!
//! where the right-hand sides are taken in the initial state.

use std::f64::consts::FRAC_PI_2;

use crate::error::{invalid, Error, Result};
use crate::qstate::CollectiveMoments;
use crate::ramsey::{
    check_optimum_regime, reference_limit, ExperimentBudget, PrecisionResult, Scheme,
};

/// Moments below this magnitude count as zero.
const ZERO_TOL: f64 = 1e-12;

fn rotated_second_moment(m0: &CollectiveMoments, phase: f64) -> f64 {
    let (s, c) = phase.sin_cos();
    c * c * m0.sx2_mean + s * s * m0.sy2_mean + 2.0 * s * c * m0.sxy_mean
}

pub fn evolved_sx_mean(m0: &CollectiveMoments, delta: f64, gamma: f64, t: f64) -> f64 {
    let (s, c) = (delta * t).sin_cos();
    (-gamma * t).exp() * (c * m0.sx_mean + s * m0.sy_mean)
}

pub fn evolved_sx2_mean(m0: &CollectiveMoments, delta: f64, gamma: f64, t: f64) -> f64 {
    let n = m0.n as f64;
    n + (-2.0 * gamma * t).exp() * (rotated_second_moment(m0, delta * t) - n)
}

/// d<S_x>(t)/d delta. The drive frequency enters only through the detuning,
/// so this is also the derivative with respect to omega.
pub fn sx_mean_slope(m0: &CollectiveMoments, delta: f64, gamma: f64, t: f64) -> f64 {
    let (s, c) = (delta * t).sin_cos();
    (-gamma * t).exp() * t * (c * m0.sy_mean - s * m0.sx_mean)
}

/// Error-propagation uncertainty with N = T/t collective measurements.
pub fn genramsey_uncertainty(
    m0: &CollectiveMoments,
    budget: &ExperimentBudget,
    delta: f64,
    gamma: f64,
) -> Result<f64> {
    if !(gamma >= 0.0 && gamma.is_finite()) || !delta.is_finite() {
        return invalid("detuning must be finite and dephasing rate >= 0");
    }
    if budget.n != m0.n {
        return invalid(format!(
            "budget for {} ions, state of {} ions",
            budget.n, m0.n
        ));
    }
    let t = budget.shot_time;
    let slope = sx_mean_slope(m0, delta, gamma, t);
    if slope.abs() <= ZERO_TOL * t * m0.n as f64 {
        return Err(Error::SingularPoint(format!(
            "d<S_x>/d delta vanishes at delta = {delta}, t = {t}"
        )));
    }
    let mean = evolved_sx_mean(m0, delta, gamma, t);
    let var = (evolved_sx2_mean(m0, delta, gamma, t) - mean * mean).max(0.0);
    Ok((var / (budget.repetitions() * slope * slope)).sqrt())
}

fn optimum_preconditions(m0: &CollectiveMoments) -> Result<f64> {
    if m0.sy_mean.abs() > ZERO_TOL || m0.sxy_mean.abs() > ZERO_TOL {
        return invalid("closed-form optimum needs <S_y> = 0 and a real-amplitude state");
    }
    let var = m0.sy_variance();
    if var.is_nan() || var <= ZERO_TOL {
        return Err(Error::DegenerateState(format!(
            "initial S_y variance {var} is not positive"
        )));
    }
    Ok(var)
}

/// Left side of the optimal-duration condition n[1 + (2 gamma t - 1) e^{2 gamma t}]
/// minus the initial S_y variance.
pub fn topt_residual(m0: &CollectiveMoments, gamma: f64, t: f64) -> f64 {
    let u = gamma * t;
    m0.n as f64 * (1.0 + (2.0 * u - 1.0) * (2.0 * u).exp()) - m0.sy_variance()
}

/// Optimal shot time at delta t = pi/2. The residual is strictly increasing
/// in t and negative at t = 0, so bisection on a bracket that is grown until
/// it changes sign always converges.
pub fn solve_topt(m0: &CollectiveMoments, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return invalid(format!("dephasing rate {gamma} must be positive"));
    }
    optimum_preconditions(m0)?;
    let f = |t: f64| topt_residual(m0, gamma, t);
    let mut lo = 0.0;
    let mut hi = 10.0 / gamma;
    while f(hi) <= 0.0 {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::Bracketing("optimal duration exceeds range".into()));
        }
    }
    // bisect to machine resolution
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(if f(hi).abs() < f(lo).abs() { hi } else { lo })
}

/// Optimized generalized-Ramsey precision sqrt(2 n gamma e^{2 gamma t_opt} / (T <S_x>^2)).
pub fn genramsey_opt_uncertainty(
    m0: &CollectiveMoments,
    total_time: f64,
    gamma: f64,
) -> Result<PrecisionResult> {
    check_optimum_regime(total_time, gamma)?;
    if m0.sx_mean.abs() <= ZERO_TOL {
        return Err(Error::DegenerateState(
            "initial <S_x> vanishes, no signal".into(),
        ));
    }
    let t_opt = solve_topt(m0, gamma)?;
    if t_opt > total_time {
        return invalid(format!(
            "optimal shot time {t_opt} exceeds the total time {total_time}"
        ));
    }
    let n = m0.n as f64;
    let delta_omega = (2.0 * n * gamma * (2.0 * gamma * t_opt).exp()
        / (total_time * m0.sx_mean * m0.sx_mean))
        .sqrt();
    Ok(PrecisionResult::new(
        Scheme::SymmetricGenramsey,
        t_opt,
        FRAC_PI_2,
        delta_omega,
        reference_limit(m0.n, total_time, gamma),
    ))
}

/// Lower bounds on the optimized precision: the state-dependent bound
/// sqrt(2 n gamma / (T <S_x>^2)) and the universal sqrt(2 gamma / (n T)).
pub fn precision_bound_chain(
    m0: &CollectiveMoments,
    total_time: f64,
    gamma: f64,
) -> Result<(f64, f64)> {
    if m0.sx_mean.abs() <= ZERO_TOL {
        return Err(Error::DegenerateState("initial <S_x> vanishes".into()));
    }
    if !(total_time > 0.0 && gamma >= 0.0) {
        return invalid("total time must be positive and dephasing rate >= 0");
    }
    let n = m0.n as f64;
    let bound_state = (2.0 * n * gamma / (total_time * m0.sx_mean * m0.sx_mean)).sqrt();
    let bound_universal = (2.0 * gamma / (n * total_time)).sqrt();
    Ok((bound_state, bound_universal))
}
