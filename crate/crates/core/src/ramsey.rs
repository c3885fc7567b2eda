//! Closed-form Ramsey signals and frequency uncertainties for the uncorrelated
//! and GHZ schemes, plus a density-matrix simulation of both networks.

use std::f64::consts::E;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::evolution::{dephase_evolve, DephasingParams};
use crate::qstate::{check_qubits, ghz_network, to_density, Gate, StateVector};

/// Largest register simulated by [`pipeline_signal`].
pub const PIPELINE_MAX_QUBITS: usize = 10;

/// |sin| below this is treated as a vanishing signal slope.
const SLOPE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Uncorrelated,
    Ghz,
    SymmetricGenramsey,
    SymmetricQfi,
}

impl Scheme {
    pub fn tag(&self) -> &'static str {
        match self {
            Scheme::Uncorrelated => "uncorrelated",
            Scheme::Ghz => "ghz",
            Scheme::SymmetricGenramsey => "symmetric-genramsey",
            Scheme::SymmetricQfi => "symmetric-qfi",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uncorrelated" => Ok(Scheme::Uncorrelated),
            "ghz" => Ok(Scheme::Ghz),
            "symmetric-genramsey" => Ok(Scheme::SymmetricGenramsey),
            "symmetric-qfi" => Ok(Scheme::SymmetricQfi),
            other => invalid(format!("unknown scheme '{other}'")),
        }
    }
}

/// Resources of one experiment: `n` ions, total duration `total_time` split
/// into shots of length `shot_time`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentBudget {
    pub n: usize,
    pub total_time: f64,
    pub shot_time: f64,
}

impl ExperimentBudget {
    pub fn new(n: usize, total_time: f64, shot_time: f64) -> Result<Self> {
        check_qubits(n)?;
        if !(shot_time > 0.0 && shot_time.is_finite()) {
            return invalid(format!("shot time {shot_time} must be positive"));
        }
        if !(total_time >= shot_time && total_time.is_finite()) {
            return invalid(format!(
                "total time {total_time} must be at least the shot time {shot_time}"
            ));
        }
        Ok(ExperimentBudget {
            n,
            total_time,
            shot_time,
        })
    }

    /// Number of shots T/t, treated as a real number.
    pub fn repetitions(&self) -> f64 {
        self.total_time / self.shot_time
    }

    /// Independent single-ion data points nT/t of the uncorrelated scheme.
    pub fn single_ion_data(&self) -> f64 {
        self.n as f64 * self.repetitions()
    }
}

/// Optimized precision of one scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionResult {
    pub scheme: Scheme,
    pub t_opt: f64,
    /// delta * t at the optimum
    pub phase_opt: f64,
    pub delta_omega: f64,
    pub improvement_pct: f64,
}

impl PrecisionResult {
    pub fn new(
        scheme: Scheme,
        t_opt: f64,
        phase_opt: f64,
        delta_omega: f64,
        reference: f64,
    ) -> Self {
        PrecisionResult {
            scheme,
            t_opt,
            phase_opt,
            delta_omega,
            improvement_pct: improvement_pct(delta_omega, reference),
        }
    }
}

pub fn improvement_pct(delta_omega: f64, reference: f64) -> f64 {
    100.0 * (1.0 - delta_omega / reference)
}

/// Excited-state probability of a single ion after the Ramsey sequence.
pub fn signal_uncorrelated(delta: f64, t: f64, gamma: f64) -> f64 {
    0.5 * (1.0 + (delta * t).cos() * (-gamma * t).exp())
}

/// Excited-state probability of ion 1 after the GHZ network.
pub fn signal_ghz(n: usize, delta: f64, t: f64, gamma: f64) -> f64 {
    let nf = n as f64;
    0.5 * (1.0 + (nf * delta * t).cos() * (-nf * gamma * t).exp())
}

/// Binomial variance P(1-P)/N of an estimated probability.
pub fn shot_variance(p: f64, data: f64) -> f64 {
    p * (1.0 - p) / data
}

fn check_rates(delta: f64, gamma: f64) -> Result<()> {
    if !delta.is_finite() {
        return invalid("detuning must be finite");
    }
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return invalid(format!("dephasing rate {gamma} must be finite and >= 0"));
    }
    Ok(())
}

/// Frequency uncertainty of uncorrelated Ramsey spectroscopy with
/// N = nT/t single-ion data points.
pub fn uncertainty_uncorrelated(budget: &ExperimentBudget, delta: f64, gamma: f64) -> Result<f64> {
    check_rates(delta, gamma)?;
    let t = budget.shot_time;
    let phase = delta * t;
    let (s, c) = phase.sin_cos();
    if s.abs() < SLOPE_EPS {
        return Err(Error::SingularPoint(format!(
            "delta*t = {phase} is a multiple of pi"
        )));
    }
    let decay2 = (-2.0 * gamma * t).exp();
    let num = 1.0 - c * c * decay2;
    let den = budget.n as f64 * budget.total_time * t * decay2 * s * s;
    Ok((num / den).sqrt())
}

/// Frequency uncertainty of the GHZ scheme with N = T/t measurements.
pub fn uncertainty_ghz(budget: &ExperimentBudget, delta: f64, gamma: f64) -> Result<f64> {
    check_rates(delta, gamma)?;
    let n = budget.n as f64;
    let t = budget.shot_time;
    let phase = n * delta * t;
    let (s, c) = phase.sin_cos();
    if s.abs() < SLOPE_EPS {
        return Err(Error::SingularPoint(format!(
            "n*delta*t = {phase} is a multiple of pi"
        )));
    }
    let decay2 = (-2.0 * n * gamma * t).exp();
    let num = 1.0 - c * c * decay2;
    let den = n * n * budget.total_time * t * decay2 * s * s;
    Ok((num / den).sqrt())
}

/// sqrt(2 gamma e / (n T)), the common optimum of the uncorrelated and GHZ
/// schemes and the reference for improvement percentages.
pub fn reference_limit(n: usize, total_time: f64, gamma: f64) -> f64 {
    (2.0 * gamma * E / (n as f64 * total_time)).sqrt()
}

/// The optimal shot time 1/(2 gamma) must fit into the total time.
pub fn check_optimum_regime(total_time: f64, gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return invalid(format!("dephasing rate {gamma} must be positive"));
    }
    if !(total_time.is_finite() && total_time >= 0.5 / gamma) {
        return invalid(format!(
            "total time {total_time} is shorter than half the decoherence time {}",
            0.5 / gamma
        ));
    }
    Ok(())
}

/// Simulates prepare, dephased free evolution and read-out on the full
/// density matrix, returning the |1> population of ion 1.
///
/// Both pulses are y rotations, so at zero evolution time they compose to a
/// bit flip and the signal is 1.
pub fn pipeline_signal(scheme: Scheme, n: usize, delta: f64, gamma: f64, t: f64) -> Result<f64> {
    check_qubits(n)?;
    if n > PIPELINE_MAX_QUBITS {
        return invalid(format!(
            "pipeline simulation limited to {PIPELINE_MAX_QUBITS} ions"
        ));
    }
    let params = DephasingParams::new(delta, gamma, t)?;
    let (prepare, readout): (Vec<Gate>, Vec<Gate>) = match scheme {
        Scheme::Uncorrelated => {
            let pulses: Vec<Gate> = (0..n).map(Gate::HalfPiY).collect();
            (pulses.clone(), pulses)
        }
        Scheme::Ghz => {
            let prep = ghz_network(n);
            // disentangle first, then the second pulse on ion 1
            let mut read: Vec<Gate> = prep[1..].to_vec();
            read.push(Gate::HalfPiY(0));
            (prep, read)
        }
        other => return invalid(format!("no pipeline for scheme '{other}'")),
    };
    let mut psi = StateVector::basis(n, 0)?;
    for g in prepare {
        psi.apply(g)?;
    }
    let mut rho = dephase_evolve(&to_density(&psi), &params);
    for g in readout {
        rho.apply(g)?;
    }
    Ok(rho.excited_population(0))
}
