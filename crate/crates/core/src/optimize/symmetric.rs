//! Multi-restart search over the coefficients of the symmetric family.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{minimize_qfi_uncertainty, nelder_mead, OptimizerConfig, SimplexSettings};
use crate::collective::genramsey_opt_uncertainty;
use crate::error::{invalid, Error, Result};
use crate::fisher::{SectorBasis, SymmetricQfiProfile};
use crate::qstate::{collective_moments, SymmetricFamilyState};
use crate::ramsey::{check_optimum_regime, improvement_pct, reference_limit};

pub const MIN_IONS: usize = 2;
pub const MAX_IONS: usize = 10;
/// Initial simplex edge in the unconstrained coefficient space.
const SIMPLEX_STEP: f64 = 0.2;
/// Improvement gap (percentage points) under which two restarts count as
/// having found the same optimum.
pub const BASIN_TOL_PCT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    /// Collective S_x measurement, optimized over the preparation only.
    #[serde(rename = "gen-ramsey")]
    GenRamsey,
    /// Optimal measurement, scored by the quantum Fisher information.
    #[serde(rename = "qfi")]
    Qfi,
}

impl Method {
    pub fn tag(&self) -> &'static str {
        match self {
            Method::GenRamsey => "gen-ramsey",
            Method::Qfi => "qfi",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gen-ramsey" | "genramsey" => Ok(Method::GenRamsey),
            "qfi" => Ok(Method::Qfi),
            other => invalid(format!("unknown method '{other}'")),
        }
    }
}

/// Score of one coefficient vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoeffEvaluation {
    pub t_opt: f64,
    pub delta_omega: f64,
    pub improvement_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymmetricOptimum {
    pub n: usize,
    pub method: Method,
    /// Unit norm, first non-zero entry positive.
    pub coeffs: Vec<f64>,
    pub t_opt: f64,
    pub delta_omega: f64,
    pub improvement_pct: f64,
    /// Best improvement of each restart in restart order, NaN where it failed.
    pub restart_improvements: Vec<f64>,
    /// max - min over the successful restarts. Separate basins of the
    /// landscape show up here, so it can be large.
    pub restart_spread: f64,
    /// Restarts that ended within `BASIN_TOL_PCT` of the best improvement.
    pub restarts_at_best: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImprovementCurvePoint {
    pub n: usize,
    pub improvement_genramsey_pct: f64,
    pub improvement_qfi_pct: f64,
    /// Coefficients of the optimal-measurement optimum.
    pub best_coeffs: Vec<f64>,
    pub genramsey: SymmetricOptimum,
    pub qfi: SymmetricOptimum,
}

/// One n of a sweep; failed points keep their error and the sweep goes on.
#[derive(Debug, Clone)]
pub struct Fig4Entry {
    pub n: usize,
    pub outcome: Result<ImprovementCurvePoint>,
}

fn check_family_size(n: usize) -> Result<()> {
    if !(MIN_IONS..=MAX_IONS).contains(&n) {
        return invalid(format!(
            "the symmetric family is optimized for {MIN_IONS} <= n <= {MAX_IONS}, got {n}"
        ));
    }
    Ok(())
}

/// Everything about an objective that does not depend on the candidate.
struct Objective {
    n: usize,
    gamma: f64,
    total_time: f64,
    method: Method,
    reference: f64,
    sectors: Option<SectorBasis>,
    cfg: OptimizerConfig,
}

impl Objective {
    fn new(n: usize, gamma: f64, total_time: f64, method: Method, cfg: &OptimizerConfig) -> Self {
        Objective {
            n,
            gamma,
            total_time,
            method,
            reference: reference_limit(n, total_time, gamma),
            sectors: (method == Method::Qfi).then(|| SectorBasis::new(n)),
            cfg: *cfg,
        }
    }

    fn evaluate(&self, state: &SymmetricFamilyState) -> Result<CoeffEvaluation> {
        let (t_opt, delta_omega) = match self.method {
            Method::GenRamsey => {
                let m0 = collective_moments(&state.to_state());
                let r = genramsey_opt_uncertainty(&m0, self.total_time, self.gamma)?;
                (r.t_opt, r.delta_omega)
            }
            Method::Qfi => {
                let sectors = self.sectors.as_ref().expect("sectors built for qfi");
                let profile = SymmetricQfiProfile::new(sectors, state);
                minimize_qfi_uncertainty(
                    |t| profile.qfi(self.gamma, t),
                    self.n,
                    self.total_time,
                    self.gamma,
                    &self.cfg,
                )?
            }
        };
        if !delta_omega.is_finite() {
            return Err(Error::DegenerateState(
                "state carries no usable information".into(),
            ));
        }
        Ok(CoeffEvaluation {
            t_opt,
            delta_omega,
            improvement_pct: improvement_pct(delta_omega, self.reference),
        })
    }

    /// Objective in the unconstrained space: +inf for degenerate candidates.
    fn score(&self, raw: &[f64]) -> f64 {
        SymmetricFamilyState::normalized(self.n, raw)
            .and_then(|s| self.evaluate(&s))
            .map(|e| e.delta_omega)
            .unwrap_or(f64::INFINITY)
    }
}

/// Scores a single coefficient vector (normalized first).
pub fn evaluate_coeffs(
    n: usize,
    gamma: f64,
    total_time: f64,
    method: Method,
    coeffs: &[f64],
    cfg: &OptimizerConfig,
) -> Result<CoeffEvaluation> {
    check_family_size(n)?;
    check_optimum_regime(total_time, gamma)?;
    let state = SymmetricFamilyState::normalized(n, coeffs)?;
    Objective::new(n, gamma, total_time, method, cfg).evaluate(&state)
}

/// Start of restart `r`: the warm start (if any) comes first, then the
/// product state, then isotropic Gaussian draws from ChaCha8 stream `r` of
/// the master seed.
fn starting_point(n: usize, r: usize, seed: u64, warm: Option<&[f64]>) -> Vec<f64> {
    let product = || {
        SymmetricFamilyState::uncorrelated(n)
            .expect("n validated")
            .coeffs()
            .to_vec()
    };
    match (r, warm) {
        (0, Some(w)) => w.to_vec(),
        (0, None) | (1, Some(_)) => product(),
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            (0..SymmetricFamilyState::dimension(n))
                .map(|_| StandardNormal.sample(&mut rng))
                .collect()
        }
    }
}

fn optimize_from(
    n: usize,
    gamma: f64,
    total_time: f64,
    method: Method,
    cfg: &OptimizerConfig,
    warm: Option<&[f64]>,
) -> Result<SymmetricOptimum> {
    check_family_size(n)?;
    check_optimum_regime(total_time, gamma)?;
    cfg.validate()?;
    let objective = Objective::new(n, gamma, total_time, method, cfg);
    let settings = SimplexSettings {
        step: SIMPLEX_STEP,
        tol_obj: cfg.tol_obj,
        tol_x: cfg.tol_x,
        max_iter: cfg.max_iter,
    };

    // indexed collection keeps the merge independent of scheduling
    let candidates: Vec<Option<(SymmetricFamilyState, CoeffEvaluation)>> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let x0 = starting_point(n, r, cfg.seed, warm);
            let found = nelder_mead(|x| objective.score(x), &x0, &settings);
            if !found.value.is_finite() {
                return None;
            }
            let state = SymmetricFamilyState::normalized(n, &found.x)
                .ok()?
                .with_canonical_sign();
            let eval = objective.evaluate(&state).ok()?;
            Some((state, eval))
        })
        .collect();

    let restart_improvements: Vec<f64> = candidates
        .iter()
        .map(|c| c.as_ref().map_or(f64::NAN, |(_, e)| e.improvement_pct))
        .collect();
    let finite = restart_improvements
        .iter()
        .copied()
        .filter(|v| v.is_finite());
    let restart_spread =
        finite.clone().fold(f64::NEG_INFINITY, f64::max) - finite.fold(f64::INFINITY, f64::min);

    let (state, eval) = candidates
        .into_iter()
        .flatten()
        .reduce(|best, c| {
            if c.1.delta_omega < best.1.delta_omega {
                c
            } else {
                best
            }
        })
        .ok_or_else(|| {
            Error::OptimizationFailure(format!("every restart failed for n = {n} ({method})"))
        })?;
    Ok(SymmetricOptimum {
        n,
        method,
        coeffs: state.coeffs().to_vec(),
        t_opt: eval.t_opt,
        delta_omega: eval.delta_omega,
        improvement_pct: eval.improvement_pct,
        restarts_at_best: restart_improvements
            .iter()
            .filter(|v| (eval.improvement_pct - **v) <= BASIN_TOL_PCT)
            .count(),
        restart_improvements,
        restart_spread,
    })
}

/// Best coefficients for `method`. The optimal-measurement search is warm
/// started from the collective-measurement optimum, which it can never do
/// worse than.
pub fn optimize_symmetric_coeffs(
    n: usize,
    gamma: f64,
    total_time: f64,
    method: Method,
    cfg: &OptimizerConfig,
) -> Result<SymmetricOptimum> {
    match method {
        Method::GenRamsey => optimize_from(n, gamma, total_time, method, cfg, None),
        Method::Qfi => {
            let warm = optimize_from(n, gamma, total_time, Method::GenRamsey, cfg, None).ok();
            optimize_from(
                n,
                gamma,
                total_time,
                method,
                cfg,
                warm.as_ref().map(|w| w.coeffs.as_slice()),
            )
        }
    }
}

fn curve_point(
    n: usize,
    gamma: f64,
    total_time: f64,
    cfg: &OptimizerConfig,
) -> Result<ImprovementCurvePoint> {
    let genramsey = optimize_from(n, gamma, total_time, Method::GenRamsey, cfg, None)?;
    let qfi = optimize_from(
        n,
        gamma,
        total_time,
        Method::Qfi,
        cfg,
        Some(&genramsey.coeffs),
    )?;
    Ok(ImprovementCurvePoint {
        n,
        improvement_genramsey_pct: genramsey.improvement_pct,
        improvement_qfi_pct: qfi.improvement_pct,
        best_coeffs: qfi.coeffs.clone(),
        genramsey,
        qfi,
    })
}

/// Both optima for every n in `n_range`, in ascending n.
pub fn fig4_curve(
    n_range: std::ops::RangeInclusive<usize>,
    gamma: f64,
    total_time: f64,
    cfg: &OptimizerConfig,
) -> Result<Vec<Fig4Entry>> {
    if n_range.is_empty() {
        return invalid("empty ion-count range");
    }
    check_family_size(*n_range.start())?;
    check_family_size(*n_range.end())?;
    check_optimum_regime(total_time, gamma)?;
    cfg.validate()?;
    let ns: Vec<usize> = n_range.collect();
    Ok(ns
        .into_par_iter()
        .map(|n| Fig4Entry {
            n,
            outcome: curve_point(n, gamma, total_time, cfg),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> OptimizerConfig {
        OptimizerConfig {
            restarts: 4,
            ..Default::default()
        }
    }

    #[test]
    fn product_state_scores_zero_improvement() {
        for n in 2..=6 {
            let coeffs = SymmetricFamilyState::uncorrelated(n)
                .unwrap()
                .coeffs()
                .to_vec();
            let e = evaluate_coeffs(n, 1.0, 100.0, Method::GenRamsey, &coeffs, &quick()).unwrap();
            assert!(
                e.improvement_pct.abs() < 1e-10,
                "n={n}: {}",
                e.improvement_pct
            );
        }
    }

    #[test]
    fn ghz_is_degenerate_for_collective_readout() {
        let mut coeffs = vec![0.0; 2];
        coeffs[0] = 1.0;
        let r = evaluate_coeffs(2, 1.0, 100.0, Method::GenRamsey, &coeffs, &quick());
        assert!(matches!(r, Err(Error::DegenerateState(_))));
    }

    #[test]
    fn two_ions_beat_the_reference() {
        let opt = optimize_symmetric_coeffs(2, 1.0, 100.0, Method::GenRamsey, &quick()).unwrap();
        assert!(opt.improvement_pct > 0.0 && opt.improvement_pct < 39.35);
        let norm: f64 = opt.coeffs.iter().map(|c| c * c).sum();
        assert!((norm - 1.0).abs() < 1e-9);
        assert!(opt.coeffs.iter().find(|c| **c != 0.0).unwrap() > &0.0);
        assert_eq!(opt.restart_improvements.len(), 4);
    }

    #[test]
    fn rejects_family_size_out_of_range() {
        assert!(
            optimize_symmetric_coeffs(1, 1.0, 100.0, Method::GenRamsey, &quick())
                .unwrap_err()
                .is_invalid_argument()
        );
        assert!(fig4_curve(2..=11, 1.0, 100.0, &quick()).is_err());
    }

    #[test]
    fn method_tags() {
        for m in [Method::GenRamsey, Method::Qfi] {
            assert_eq!(m.tag().parse::<Method>().unwrap(), m);
        }
        assert!("both".parse::<Method>().is_err());
    }
}
