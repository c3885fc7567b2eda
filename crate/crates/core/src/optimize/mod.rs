//! Minimization over the shot duration, over the symmetric-family
//! coefficients, and the shot-time scan dataset.

mod simplex;
mod symmetric;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fisher::qfi_uncertainty;
use crate::qstate::check_qubits;
use crate::ramsey::{
    check_optimum_regime, reference_limit, uncertainty_ghz, uncertainty_uncorrelated,
    ExperimentBudget, PrecisionResult, Scheme,
};

pub use simplex::{nelder_mead, SimplexResult, SimplexSettings};
pub use symmetric::{
    evaluate_coeffs, fig4_curve, optimize_symmetric_coeffs, CoeffEvaluation, Fig4Entry,
    ImprovementCurvePoint, Method, SymmetricOptimum, MAX_IONS, MIN_IONS,
};

const GOLDEN: f64 = 0.618_033_988_749_894_9;
/// Points of the coarse scan that precedes golden-section refinement.
const SCAN_POINTS: usize = 48;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub seed: u64,
    /// Relative objective tolerance.
    pub tol_obj: f64,
    /// Relative tolerance on the shot time, absolute on coefficients.
    pub tol_x: f64,
    pub max_iter: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            restarts: 16,
            seed: 0,
            tol_obj: 1e-10,
            tol_x: 1e-9,
            max_iter: 2000,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts < 1 {
            return invalid("need at least one restart");
        }
        if !(self.tol_obj > 0.0 && self.tol_x > 0.0) {
            return invalid("tolerances must be positive");
        }
        if self.max_iter < 1 {
            return invalid("need at least one iteration");
        }
        Ok(())
    }
}

fn finite_or_inf(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        f64::INFINITY
    }
}

/// Golden-section search on [a, b] for a unimodal objective.
fn golden_section<F>(f: &mut F, mut a: f64, mut b: f64, cfg: &OptimizerConfig) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let mut x1 = b - GOLDEN * (b - a);
    let mut x2 = a + GOLDEN * (b - a);
    let mut f1 = finite_or_inf(f(x1));
    let mut f2 = finite_or_inf(f(x2));
    for _ in 0..cfg.max_iter {
        if b - a <= cfg.tol_x * (a.abs() + b.abs()).max(f64::MIN_POSITIVE) {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - GOLDEN * (b - a);
            f1 = finite_or_inf(f(x1));
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + GOLDEN * (b - a);
            f2 = finite_or_inf(f(x2));
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Minimizes a scalar objective on `bracket`: a coarse scan of interior
/// points (log-spaced for wide positive brackets) locates the basin, then
/// golden-section refinement runs between the neighbours of the best point.
/// Non-finite objective values are treated as excluded points.
pub fn minimize_over_t<F>(
    mut objective: F,
    bracket: (f64, f64),
    cfg: &OptimizerConfig,
) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> f64,
{
    let (lo, hi) = bracket;
    if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo < hi) {
        return invalid(format!("bad bracket [{lo}, {hi}]"));
    }
    let log_spaced = lo > 0.0 && hi / lo > 20.0;
    let point = |u: f64| {
        if log_spaced {
            lo * (hi / lo).powf(u)
        } else {
            lo + (hi - lo) * u
        }
    };
    let xs: Vec<f64> = (0..SCAN_POINTS)
        .map(|i| point((i as f64 + 0.5) / SCAN_POINTS as f64))
        .collect();
    let vs: Vec<f64> = xs.iter().map(|&x| finite_or_inf(objective(x))).collect();
    let (best, &best_v) = vs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("scan is non-empty");
    if !best_v.is_finite() {
        return Err(Error::Bracketing(format!(
            "objective not finite anywhere on [{lo}, {hi}]"
        )));
    }
    let a = if best == 0 { lo } else { xs[best - 1] };
    let b = if best + 1 == xs.len() {
        hi
    } else {
        xs[best + 1]
    };
    let (x, v) = golden_section(&mut objective, a, b, cfg);
    Ok(if v <= best_v {
        (x, v)
    } else {
        (xs[best], best_v)
    })
}

/// Joint minimization over the shot time and the phase in (0, pi).
fn minimize_over_t_and_phase<F>(
    mut objective: F,
    t_bracket: (f64, f64),
    cfg: &OptimizerConfig,
) -> Result<(f64, f64, f64)>
where
    F: FnMut(f64, f64) -> f64,
{
    let mut inner = |t: f64| {
        minimize_over_t(|phase| objective(t, phase), (0.0, PI), cfg)
            .map(|(_, v)| v)
            .unwrap_or(f64::INFINITY)
    };
    let (t, v) = minimize_over_t(&mut inner, t_bracket, cfg)?;
    let (phase, v_phase) = minimize_over_t(|phase| objective(t, phase), (0.0, PI), cfg)?;
    debug_assert!(v_phase <= v * (1.0 + 1e-12));
    Ok((t, phase, v_phase))
}

fn shot_time_bracket(n: usize, total_time: f64, gamma: f64) -> (f64, f64) {
    (1e-4 / (n as f64 * gamma), total_time.min(5.0 / gamma))
}

/// Numerically optimal uncorrelated Ramsey precision over (t, delta t).
pub fn optimal_uncorrelated(
    n: usize,
    total_time: f64,
    gamma: f64,
    cfg: &OptimizerConfig,
) -> Result<PrecisionResult> {
    check_qubits(n)?;
    check_optimum_regime(total_time, gamma)?;
    let objective = |t: f64, phase: f64| {
        ExperimentBudget::new(n, total_time, t)
            .and_then(|b| uncertainty_uncorrelated(&b, phase / t, gamma))
            .unwrap_or(f64::INFINITY)
    };
    let (t, phase, v) =
        minimize_over_t_and_phase(objective, shot_time_bracket(n, total_time, gamma), cfg)?;
    Ok(PrecisionResult::new(
        Scheme::Uncorrelated,
        t,
        phase,
        v,
        reference_limit(n, total_time, gamma),
    ))
}

/// Numerically optimal GHZ precision over (t, n delta t). The reported phase
/// is delta t.
pub fn optimal_ghz(
    n: usize,
    total_time: f64,
    gamma: f64,
    cfg: &OptimizerConfig,
) -> Result<PrecisionResult> {
    check_qubits(n)?;
    check_optimum_regime(total_time, gamma)?;
    let nf = n as f64;
    let objective = |t: f64, phase: f64| {
        ExperimentBudget::new(n, total_time, t)
            .and_then(|b| uncertainty_ghz(&b, phase / (nf * t), gamma))
            .unwrap_or(f64::INFINITY)
    };
    let (t, phase, v) =
        minimize_over_t_and_phase(objective, shot_time_bracket(n, total_time, gamma), cfg)?;
    Ok(PrecisionResult::new(
        Scheme::Ghz,
        t,
        phase / nf,
        v,
        reference_limit(n, total_time, gamma),
    ))
}

/// Minimizes the optimal-measurement uncertainty 1/sqrt((T/t) F(t)) over the
/// shot time, given the per-shot QFI as a function of t. Returns (t, value).
pub fn minimize_qfi_uncertainty<F>(
    mut qfi_at: F,
    n: usize,
    total_time: f64,
    gamma: f64,
    cfg: &OptimizerConfig,
) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    check_optimum_regime(total_time, gamma)?;
    let objective = |t: f64| {
        qfi_at(t)
            .and_then(|f| qfi_uncertainty(f, total_time, t))
            .unwrap_or(f64::INFINITY)
    };
    minimize_over_t(objective, shot_time_bracket(n, total_time, gamma), cfg)
}

/// How the detuning is chosen along a shot-time scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhaseLock {
    /// delta t = pi/2 for the uncorrelated column, n delta t = pi/2 for GHZ.
    Optimal,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fig3Row {
    pub t: f64,
    /// NaN where the signal slope vanishes.
    pub delta_omega_uncorrelated: f64,
    pub delta_omega_ghz: f64,
}

/// Frequency uncertainty of both schemes along a grid of shot times, rows in
/// ascending t.
pub fn fig3_scan(
    n: usize,
    gamma: f64,
    total_time: f64,
    t_grid: &[f64],
    lock: PhaseLock,
) -> Result<Vec<Fig3Row>> {
    check_qubits(n)?;
    check_optimum_regime(total_time, gamma)?;
    let mut grid = t_grid.to_vec();
    if grid.iter().any(|t| !(*t > 0.0 && *t <= total_time)) {
        return invalid(format!("shot times must lie in (0, {total_time}]"));
    }
    grid.sort_by(f64::total_cmp);
    let nf = n as f64;
    grid.into_iter()
        .map(|t| {
            let budget = ExperimentBudget::new(n, total_time, t)?;
            let (d_unc, d_ghz) = match lock {
                PhaseLock::Optimal => (PI / (2.0 * t), PI / (2.0 * nf * t)),
                PhaseLock::Fixed(d) => (d, d),
            };
            let or_nan = |r: Result<f64>| match r {
                Ok(v) => Ok(v),
                Err(Error::SingularPoint(_)) => Ok(f64::NAN),
                Err(e) => Err(e),
            };
            Ok(Fig3Row {
                t,
                delta_omega_uncorrelated: or_nan(uncertainty_uncorrelated(&budget, d_unc, gamma))?,
                delta_omega_ghz: or_nan(uncertainty_ghz(&budget, d_ghz, gamma))?,
            })
        })
        .collect()
}
