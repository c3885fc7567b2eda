//! Free evolution at detuning `delta` with independent dephasing of every ion.
//!
//! Rate convention: a single-ion coherence decays as exp(-gamma t). In
//! Lindblad form this is the generator (gamma/2)(sigma_z rho sigma_z - rho)
//! per ion, half the coefficient of the textbook single-ion phase-damping
//! equation. In the frame rotating at the drive frequency each excited ion
//! picks up the phase exp(-i delta t), so
//!
//! ```text
//! <x|rho(t)|y> = <x|rho(0)|y> exp(i delta t (h(y) - h(x))) exp(-gamma t d(x, y))
//! ```
//!
//! with `h` the excitation number and `d` the Hamming distance.

use nalgebra::DMatrix;

use crate::error::{invalid, Result};
use crate::qstate::{excitation_number, DensityMatrix, C64};

/// Human-readable statement of the decay convention, echoed in reports.
pub const CONVENTION: &str = "single-ion coherence decays as exp(-gamma*t); \
excited-state phase exp(-i*delta*t); pi/2 pulses rotate about y";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DephasingParams {
    pub delta: f64,
    pub gamma: f64,
    pub t: f64,
}

impl DephasingParams {
    pub fn new(delta: f64, gamma: f64, t: f64) -> Result<Self> {
        if !delta.is_finite() {
            return invalid("detuning must be finite");
        }
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return invalid(format!("dephasing rate {gamma} must be finite and >= 0"));
        }
        if !(t >= 0.0 && t.is_finite()) {
            return invalid(format!("evolution time {t} must be finite and >= 0"));
        }
        Ok(DephasingParams { delta, gamma, t })
    }

    pub fn with_time(self, t: f64) -> Result<Self> {
        Self::new(self.delta, self.gamma, t)
    }
}

/// Per-element factor tables indexed by h(y) - h(x) + n and d(x, y).
struct Factors {
    n: usize,
    phase: Vec<C64>,
    decay: Vec<f64>,
}

impl Factors {
    fn new(n: usize, p: &DephasingParams) -> Self {
        let phase = (0..=2 * n)
            .map(|s| {
                let dh = s as f64 - n as f64;
                C64::from_polar(1.0, p.delta * p.t * dh)
            })
            .collect();
        let decay = (0..=n).map(|d| (-p.gamma * p.t * d as f64).exp()).collect();
        Factors { n, phase, decay }
    }

    #[inline]
    fn at(&self, x: usize, y: usize) -> (C64, f64, i64) {
        let dh = excitation_number(y) as i64 - excitation_number(x) as i64;
        let d = (x ^ y).count_ones() as usize;
        (self.phase[(dh + self.n as i64) as usize], self.decay[d], dh)
    }
}

fn evolve_elems(n: usize, elems: &DMatrix<C64>, p: &DephasingParams) -> DMatrix<C64> {
    let f = Factors::new(n, p);
    DMatrix::from_fn(elems.nrows(), elems.ncols(), |x, y| {
        if x == y {
            return elems[(x, y)];
        }
        let (phase, decay, _) = f.at(x, y);
        elems[(x, y)] * phase * decay
    })
}

/// Closed-form dephased evolution. Populations are left exactly unchanged.
pub fn dephase_evolve(rho0: &DensityMatrix, p: &DephasingParams) -> DensityMatrix {
    DensityMatrix::from_parts(rho0.n(), evolve_elems(rho0.n(), rho0.elems(), p))
}

/// d rho(t) / d delta, computed elementwise as i t (h(y) - h(x)) rho_xy(t).
pub fn drho_ddelta(rho0: &DensityMatrix, p: &DephasingParams) -> DMatrix<C64> {
    let n = rho0.n();
    let f = Factors::new(n, p);
    let elems = rho0.elems();
    DMatrix::from_fn(elems.nrows(), elems.ncols(), |x, y| {
        let (phase, decay, dh) = f.at(x, y);
        if dh == 0 {
            return C64::new(0.0, 0.0);
        }
        C64::new(0.0, p.t * dh as f64) * elems[(x, y)] * phase * decay
    })
}

/// Integrates the n-ion master equation
///
/// ```text
/// d rho/dt = -i [delta * sum_k |1><1|_k, rho] + (gamma/2) sum_k (Z_k rho Z_k - rho)
/// ```
///
/// with a fixed-step classical Runge-Kutta scheme. The right-hand side is
/// assembled from dense operators, independent of the closed form above.
pub fn master_equation_oracle(
    rho0: &DensityMatrix,
    p: &DephasingParams,
    steps: usize,
) -> Result<DensityMatrix> {
    if steps < 1 {
        return invalid("integrator needs at least one step");
    }
    let n = rho0.n();
    let ops = LindbladOps::new(n, p);
    let h = p.t / steps as f64;
    let mut rho = rho0.elems().clone();
    for _ in 0..steps {
        let k1 = ops.rhs(&rho);
        let k2 = ops.rhs(&(&rho + &k1 * C64::from(h / 2.0)));
        let k3 = ops.rhs(&(&rho + &k2 * C64::from(h / 2.0)));
        let k4 = ops.rhs(&(&rho + &k3 * C64::from(h)));
        rho += (k1 + k2 * C64::from(2.0) + k3 * C64::from(2.0) + k4) * C64::from(h / 6.0);
    }
    Ok(DensityMatrix::from_parts(n, rho))
}

struct LindbladOps {
    hamiltonian: DMatrix<C64>,
    z_ops: Vec<DMatrix<C64>>,
    half_gamma: f64,
}

impl LindbladOps {
    fn new(n: usize, p: &DephasingParams) -> Self {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        let id2 = DMatrix::<C64>::identity(2, 2);
        let proj1 = DMatrix::from_row_slice(2, 2, &[zero, zero, zero, one]);
        let sz = DMatrix::from_row_slice(2, 2, &[one, zero, zero, -one]);
        // Ion k acts on bit k, so it is the k-th factor from the right.
        let embed = |single: &DMatrix<C64>, k: usize| {
            (0..n).rev().fold(DMatrix::<C64>::identity(1, 1), |acc, q| {
                acc.kronecker(if q == k { single } else { &id2 })
            })
        };
        let dim = 1 << n;
        let hamiltonian = (0..n).fold(DMatrix::zeros(dim, dim), |acc, k| {
            acc + embed(&proj1, k) * C64::from(p.delta)
        });
        LindbladOps {
            hamiltonian,
            z_ops: (0..n).map(|k| embed(&sz, k)).collect(),
            half_gamma: p.gamma / 2.0,
        }
    }

    fn rhs(&self, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let comm = &self.hamiltonian * rho - rho * &self.hamiltonian;
        let mut out = comm * C64::new(0.0, -1.0);
        if self.half_gamma != 0.0 {
            for z in &self.z_ops {
                out += (z * rho * z - rho) * C64::from(self.half_gamma);
            }
        }
        out
    }
}
