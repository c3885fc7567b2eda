//! n-qubit pure states and density matrices over the computational basis.
//!
//! Basis index `b` encodes the bit string of the register: bit `k` of `b` is
//! the state of ion `k + 1`, so ion 1 is the least significant bit. The
//! excitation number of a basis string is its Hamming weight.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{storage::StorageMut, DMatrix, DVector, Dim, Dyn, Matrix};
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

pub type C64 = Complex64;

/// Largest supported register; dense 2^n x 2^n complex matrices stay in memory.
pub const MAX_QUBITS: usize = 12;

/// Tolerance used to accept a state as normalized.
pub const NORM_TOL: f64 = 1e-12;
/// Inputs within this distance of unit norm are silently renormalized.
pub const RENORM_TOL: f64 = 1e-9;

pub(crate) fn check_qubits(n: usize) -> Result<()> {
    if n == 0 || n > MAX_QUBITS {
        return invalid(format!("qubit count {n} outside 1..={MAX_QUBITS}"));
    }
    Ok(())
}

/// Number of excited ions in basis string `b`.
#[inline]
pub fn excitation_number(b: usize) -> u32 {
    b.count_ones()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n: usize,
    amps: DVector<C64>,
}

impl StateVector {
    /// Builds a state from raw amplitudes. Amplitudes whose norm is within
    /// `RENORM_TOL` of one are rescaled, anything further off is rejected.
    pub fn new(n: usize, amps: DVector<C64>) -> Result<Self> {
        check_qubits(n)?;
        if amps.len() != 1 << n {
            return invalid(format!(
                "expected {} amplitudes for {n} qubits, got {}",
                1usize << n,
                amps.len()
            ));
        }
        let norm2: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if !norm2.is_finite() || (norm2 - 1.0).abs() > RENORM_TOL {
            return invalid(format!("state norm^2 {norm2} is not 1"));
        }
        let mut state = StateVector { n, amps };
        if (norm2 - 1.0).abs() > NORM_TOL {
            state.amps /= C64::from(norm2.sqrt());
        }
        Ok(state)
    }

    /// Rescales arbitrary non-zero amplitudes to unit norm.
    pub fn normalized(n: usize, amps: DVector<C64>) -> Result<Self> {
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return invalid("cannot normalize a zero or non-finite vector");
        }
        StateVector::new(n, amps / C64::from(norm))
    }

    /// Computational basis state |b>.
    pub fn basis(n: usize, b: usize) -> Result<Self> {
        check_qubits(n)?;
        if b >= 1 << n {
            return invalid(format!("basis index {b} out of range for {n} qubits"));
        }
        let mut amps = DVector::zeros(1 << n);
        amps[b] = C64::new(1.0, 0.0);
        Ok(StateVector { n, amps })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amps(&self) -> &DVector<C64> {
        &self.amps
    }

    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amps.dotc(&other.amps)
    }

    /// |<self|other>|^2
    pub fn fidelity(&self, other: &StateVector) -> f64 {
        self.inner(other).norm_sqr()
    }

    /// True when every amplitude has zero imaginary part.
    pub fn is_real(&self) -> bool {
        self.amps.iter().all(|a| a.im == 0.0)
    }

    pub fn apply(&mut self, gate: Gate) -> Result<()> {
        gate.check(self.n)?;
        gate.apply_columns(&mut self.amps);
        Ok(())
    }
}

/// Gates used by the preparation and read-out networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    /// pi/2 rotation about y: |0> -> (|0>+|1>)/sqrt2, |1> -> (-|0>+|1>)/sqrt2.
    HalfPiY(usize),
    Cnot {
        control: usize,
        target: usize,
    },
}

impl Gate {
    fn check(&self, n: usize) -> Result<()> {
        match *self {
            Gate::HalfPiY(q) if q < n => Ok(()),
            Gate::Cnot { control, target } if control < n && target < n && control != target => {
                Ok(())
            }
            _ => invalid(format!("gate {self:?} does not fit a {n}-qubit register")),
        }
    }

    /// Applies the gate to every column of `m` (m -> G m).
    fn apply_columns<C, S>(&self, m: &mut Matrix<C64, Dyn, C, S>)
    where
        C: Dim,
        S: StorageMut<C64, Dyn, C>,
    {
        let rows = m.nrows();
        match *self {
            Gate::HalfPiY(q) => {
                let bit = 1 << q;
                for c in 0..m.ncols() {
                    for b in 0..rows {
                        if b & bit == 0 {
                            let a0 = m[(b, c)];
                            let a1 = m[(b | bit, c)];
                            m[(b, c)] = (a0 - a1) * FRAC_1_SQRT_2;
                            m[(b | bit, c)] = (a0 + a1) * FRAC_1_SQRT_2;
                        }
                    }
                }
            }
            Gate::Cnot { control, target } => {
                let (cb, tb) = (1 << control, 1 << target);
                for c in 0..m.ncols() {
                    for b in 0..rows {
                        if b & cb != 0 && b & tb == 0 {
                            m.swap((b, c), (b | tb, c));
                        }
                    }
                }
            }
        }
    }
}

/// Hermitian, unit-trace, positive semidefinite matrix of dimension 2^n.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n: usize,
    elems: DMatrix<C64>,
}

impl DensityMatrix {
    pub const HERMITIAN_TOL: f64 = 1e-12;
    pub const TRACE_TOL: f64 = 1e-12;
    pub const EIGEN_TOL: f64 = 1e-10;

    /// Validates Hermiticity, trace and positivity.
    pub fn new(n: usize, elems: DMatrix<C64>) -> Result<Self> {
        check_qubits(n)?;
        let dim = 1 << n;
        if elems.nrows() != dim || elems.ncols() != dim {
            return invalid(format!("expected a {dim}x{dim} matrix"));
        }
        if !is_hermitian(&elems, Self::HERMITIAN_TOL) {
            return invalid("density matrix is not Hermitian");
        }
        let tr = elems.trace();
        if (tr.re - 1.0).abs() > Self::TRACE_TOL || tr.im.abs() > Self::TRACE_TOL {
            return invalid(format!("density matrix trace {tr} is not 1"));
        }
        let min_eig = elems.clone().symmetric_eigenvalues().min();
        if min_eig < -Self::EIGEN_TOL {
            return invalid(format!("density matrix has negative eigenvalue {min_eig}"));
        }
        Ok(DensityMatrix { n, elems })
    }

    /// For maps known to preserve the invariants.
    pub(crate) fn from_parts(n: usize, elems: DMatrix<C64>) -> Self {
        debug_assert_eq!(elems.nrows(), 1 << n);
        DensityMatrix { n, elems }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.elems.nrows()
    }

    pub fn elems(&self) -> &DMatrix<C64> {
        &self.elems
    }

    pub fn into_elems(self) -> DMatrix<C64> {
        self.elems
    }

    pub fn trace(&self) -> C64 {
        self.elems.trace()
    }

    /// Tr(rho^2)
    pub fn purity(&self) -> f64 {
        // Tr(rho rho) = sum |rho_ij|^2 for Hermitian rho
        self.elems.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Tr(rho A)
    pub fn expectation(&self, op: &DMatrix<C64>) -> C64 {
        (&self.elems * op).trace()
    }

    /// Probability of finding ion `qubit + 1` in |1>.
    pub fn excited_population(&self, qubit: usize) -> f64 {
        let bit = 1 << qubit;
        (0..self.dim())
            .filter(|b| b & bit != 0)
            .map(|b| self.elems[(b, b)].re)
            .sum()
    }

    /// rho -> G rho G^dagger. The gates are real, so the right action is the
    /// same column map applied to the transpose.
    pub fn apply(&mut self, gate: Gate) -> Result<()> {
        gate.check(self.n)?;
        gate.apply_columns(&mut self.elems);
        self.elems.transpose_mut();
        gate.apply_columns(&mut self.elems);
        self.elems.transpose_mut();
        Ok(())
    }
}

pub(crate) fn is_hermitian(m: &DMatrix<C64>, tol: f64) -> bool {
    let d = m.nrows();
    if d != m.ncols() {
        return false;
    }
    for i in 0..d {
        for j in i..d {
            if (m[(i, j)] - m[(j, i)].conj()).norm() > tol {
                return false;
            }
        }
    }
    true
}

/// Real coefficients of the symmetric family sum_k a_k |k>, where |k> is the
/// normalized uniform superposition of all strings with k or n-k excitations.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricFamilyState {
    n: usize,
    coeffs: Vec<f64>,
}

impl SymmetricFamilyState {
    /// Coefficient count for `n` ions.
    pub fn dimension(n: usize) -> usize {
        n / 2 + 1
    }

    pub fn new(n: usize, coeffs: Vec<f64>) -> Result<Self> {
        check_qubits(n)?;
        if coeffs.len() != Self::dimension(n) {
            return invalid(format!(
                "{n} ions need {} coefficients, got {}",
                Self::dimension(n),
                coeffs.len()
            ));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return invalid("non-finite coefficient");
        }
        let norm2: f64 = coeffs.iter().map(|c| c * c).sum();
        if (norm2 - 1.0).abs() > RENORM_TOL {
            return invalid(format!("coefficient norm^2 {norm2} is not 1"));
        }
        let mut state = SymmetricFamilyState { n, coeffs };
        if norm2 != 1.0 {
            let norm = norm2.sqrt();
            state.coeffs.iter_mut().for_each(|c| *c /= norm);
        }
        Ok(state)
    }

    /// Projects an arbitrary non-zero vector onto the unit sphere.
    pub fn normalized(n: usize, raw: &[f64]) -> Result<Self> {
        let norm = raw.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return invalid("cannot normalize a zero or non-finite coefficient vector");
        }
        Self::new(n, raw.iter().map(|c| c / norm).collect())
    }

    /// The product state (|0>+|1>)^n / 2^(n/2) written in the family.
    pub fn uncorrelated(n: usize) -> Result<Self> {
        check_qubits(n)?;
        let scale = 0.5f64.powi(n as i32);
        let coeffs: Vec<f64> = (0..Self::dimension(n))
            .map(|k| (orbit_size(n, k) as f64 * scale).sqrt())
            .collect();
        Self::normalized(n, &coeffs)
    }

    /// a_0 = 1, the maximally entangled state.
    pub fn ghz(n: usize) -> Result<Self> {
        check_qubits(n)?;
        let mut coeffs = vec![0.0; Self::dimension(n)];
        coeffs[0] = 1.0;
        Self::new(n, coeffs)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Same physical state with the first non-zero coefficient made positive.
    pub fn with_canonical_sign(mut self) -> Self {
        if let Some(first) = self.coeffs.iter().find(|c| **c != 0.0) {
            if *first < 0.0 {
                self.coeffs.iter_mut().for_each(|c| *c = -*c);
            }
        }
        self
    }

    pub fn to_state(&self) -> StateVector {
        let n = self.n;
        let amp_per_class: Vec<f64> = (0..Self::dimension(n))
            .map(|k| self.coeffs[k] / (orbit_size(n, k) as f64).sqrt())
            .collect();
        let amps = DVector::from_fn(1 << n, |b, _| {
            let h = excitation_number(b) as usize;
            C64::new(amp_per_class[h.min(n - h)], 0.0)
        });
        StateVector { n, amps }
    }
}

/// Number of strings with k or n-k excitations.
pub fn orbit_size(n: usize, k: usize) -> u64 {
    let c = binomial(n as u64, k as u64);
    if 2 * k == n {
        c
    } else {
        2 * c
    }
}

pub(crate) fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// Each ion in (|0>+|1>)/sqrt2.
pub fn product_superposition(n: usize) -> Result<StateVector> {
    check_qubits(n)?;
    let amp = 0.5f64.powf(n as f64 / 2.0);
    Ok(StateVector {
        n,
        amps: DVector::from_element(1 << n, C64::new(amp, 0.0)),
    })
}

/// (|0...0> + |1...1>)/sqrt2
pub fn ghz(n: usize) -> Result<StateVector> {
    check_qubits(n)?;
    let mut amps = DVector::zeros(1 << n);
    amps[0] = C64::new(FRAC_1_SQRT_2, 0.0);
    amps[(1 << n) - 1] += C64::new(FRAC_1_SQRT_2, 0.0);
    Ok(StateVector { n, amps })
}

pub fn symmetric_state(n: usize, coeffs: &[f64]) -> Result<StateVector> {
    Ok(SymmetricFamilyState::new(n, coeffs.to_vec())?.to_state())
}

/// Pulse on ion 1 followed by CNOTs from ion 1 onto every other ion.
pub fn ghz_via_network(n: usize) -> Result<StateVector> {
    let mut psi = StateVector::basis(n, 0)?;
    for gate in ghz_network(n) {
        psi.apply(gate)?;
    }
    Ok(psi)
}

/// Gate sequence of the entangling half of the GHZ network.
pub fn ghz_network(n: usize) -> Vec<Gate> {
    std::iter::once(Gate::HalfPiY(0))
        .chain((1..n).map(|target| Gate::Cnot { control: 0, target }))
        .collect()
}

/// First and second moments of the collective spin operators
/// S_x = sum_k sigma_x^k and S_y = sum_k sigma_y^k.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollectiveMoments {
    pub n: usize,
    pub sx_mean: f64,
    pub sx2_mean: f64,
    pub sy_mean: f64,
    pub sy2_mean: f64,
    /// <(S_x S_y + S_y S_x)/2>; zero for real-amplitude states.
    pub sxy_mean: f64,
}

impl CollectiveMoments {
    pub fn sx_variance(&self) -> f64 {
        self.sx2_mean - self.sx_mean * self.sx_mean
    }

    pub fn sy_variance(&self) -> f64 {
        self.sy2_mean - self.sy_mean * self.sy_mean
    }
}

/// S_x |psi>
pub fn apply_sx(psi: &StateVector) -> DVector<C64> {
    let n = psi.n;
    DVector::from_fn(psi.dim(), |b, _| {
        (0..n).map(|k| psi.amps[b ^ (1 << k)]).sum()
    })
}

/// S_y |psi>, with sigma_y |0> = i|1> and sigma_y |1> = -i|0>.
pub fn apply_sy(psi: &StateVector) -> DVector<C64> {
    let n = psi.n;
    let i = C64::i();
    DVector::from_fn(psi.dim(), |b, _| {
        (0..n)
            .map(|k| {
                let src = psi.amps[b ^ (1 << k)];
                if b & (1 << k) != 0 {
                    i * src
                } else {
                    -i * src
                }
            })
            .sum()
    })
}

pub fn collective_moments(psi: &StateVector) -> CollectiveMoments {
    let sx = apply_sx(psi);
    let sy = apply_sy(psi);
    let real_state = psi.is_real();
    CollectiveMoments {
        n: psi.n,
        sx_mean: psi.amps.dotc(&sx).re,
        sx2_mean: sx.norm_squared(),
        sy_mean: if real_state {
            0.0
        } else {
            psi.amps.dotc(&sy).re
        },
        sy2_mean: sy.norm_squared(),
        sxy_mean: if real_state { 0.0 } else { sx.dotc(&sy).re },
    }
}

/// |psi><psi|
pub fn to_density(psi: &StateVector) -> DensityMatrix {
    let elems = &psi.amps * psi.amps.adjoint();
    DensityMatrix::from_parts(psi.n, elems)
}

impl From<&StateVector> for DensityMatrix {
    fn from(psi: &StateVector) -> Self {
        to_density(psi)
    }
}

impl TryFrom<(usize, Vec<f64>)> for SymmetricFamilyState {
    type Error = Error;

    fn try_from((n, coeffs): (usize, Vec<f64>)) -> Result<Self> {
        SymmetricFamilyState::new(n, coeffs)
    }
}
