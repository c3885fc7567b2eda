//! Quantum Fisher information of the detuning, the symmetric logarithmic
//! derivative (SLD) and its eigenbasis as the optimal projective measurement,
//! and classical Fisher information of explicit projective measurements.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::qstate::{
    binomial, is_hermitian, DensityMatrix, StateVector, SymmetricFamilyState, C64,
};

/// Eigenvalue pairs with lambda_j + lambda_k at or below this are dropped
/// from the SLD sum. Dephased states are generically rank deficient.
pub const EIGEN_CUTOFF: f64 = 1e-12;

const INPUT_TOL: f64 = 1e-10;
const PROB_FLOOR: f64 = 1e-15;
const SLOPE_FLOOR: f64 = 1e-12;

/// Hermitian eigendecomposition with eigenvalues ascending and each
/// eigenvector's phase fixed so its first significant component is real and
/// positive. Ties keep the solver's order, which is deterministic.
pub fn sorted_eigen(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let eig = m.clone().symmetric_eigen();
    let d = m.nrows();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .unwrap_or(Ordering::Equal)
    });
    let mut vecs = DMatrix::<C64>::zeros(d, d);
    let mut vals = Vec::with_capacity(d);
    for (col, &src) in order.iter().enumerate() {
        vals.push(eig.eigenvalues[src]);
        let v = eig.eigenvectors.column(src);
        let pivot = v
            .iter()
            .copied()
            .find(|z| z.norm() > 1e-8)
            .unwrap_or(C64::new(1.0, 0.0));
        let phase = pivot.conj() / pivot.norm();
        vecs.set_column(col, &(v * phase));
    }
    (vals, vecs)
}

/// A complete set of orthogonal projectors. Each projector is stored as a
/// block of orthonormal columns B with projector B B^dagger.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectiveMeasurement {
    dim: usize,
    blocks: Vec<DMatrix<C64>>,
}

impl ProjectiveMeasurement {
    /// Validates that the concatenated columns form a unitary matrix.
    pub fn from_blocks(blocks: Vec<DMatrix<C64>>) -> Result<Self> {
        let Some(first) = blocks.first() else {
            return invalid("empty measurement");
        };
        let dim = first.nrows();
        if blocks.iter().any(|b| b.nrows() != dim || b.ncols() == 0) {
            return invalid("projector blocks have inconsistent shapes");
        }
        let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
        if cols != dim {
            return invalid(format!("projectors span {cols} of {dim} dimensions"));
        }
        let mut all = DMatrix::<C64>::zeros(dim, dim);
        let mut c = 0;
        for b in &blocks {
            all.columns_mut(c, b.ncols()).copy_from(b);
            c += b.ncols();
        }
        let gram = all.adjoint() * &all;
        let dev = (gram - DMatrix::<C64>::identity(dim, dim))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if dev > INPUT_TOL {
            return invalid(format!(
                "projectors are not orthogonal and complete (deviation {dev:e})"
            ));
        }
        Ok(ProjectiveMeasurement { dim, blocks })
    }

    /// Rank-one projectors onto the columns of a unitary matrix.
    pub fn from_basis(basis: &DMatrix<C64>) -> Result<Self> {
        let blocks = (0..basis.ncols())
            .map(|c| basis.columns(c, 1).into_owned())
            .collect();
        Self::from_blocks(blocks)
    }

    /// Accepts projector matrices, checking Hermiticity, idempotence and
    /// completeness, then factors each into orthonormal columns.
    pub fn from_projectors(projectors: &[DMatrix<C64>]) -> Result<Self> {
        let mut blocks = Vec::with_capacity(projectors.len());
        for p in projectors {
            if !is_hermitian(p, INPUT_TOL) {
                return invalid("projector is not Hermitian");
            }
            let idem = (p * p - p).iter().map(|z| z.norm()).fold(0.0, f64::max);
            if idem > INPUT_TOL {
                return invalid("projector is not idempotent");
            }
            let (vals, vecs) = sorted_eigen(p);
            let keep: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > 0.5).collect();
            if keep.is_empty() {
                return invalid("zero projector");
            }
            blocks.push(vecs.select_columns(&keep));
        }
        Self::from_blocks(blocks)
    }

    /// Projectors onto the computational basis states.
    pub fn computational(n: usize) -> Self {
        let dim = 1 << n;
        let blocks = (0..dim)
            .map(|b| {
                let mut v = DMatrix::<C64>::zeros(dim, 1);
                v[(b, 0)] = C64::new(1.0, 0.0);
                v
            })
            .collect();
        ProjectiveMeasurement { dim, blocks }
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn blocks(&self) -> &[DMatrix<C64>] {
        &self.blocks
    }

    pub fn projector(&self, i: usize) -> DMatrix<C64> {
        let b = &self.blocks[i];
        b * b.adjoint()
    }

    /// Tr(Pi_m A) for every outcome m.
    pub fn traces(&self, a: &DMatrix<C64>) -> Vec<f64> {
        self.blocks
            .iter()
            .map(|b| (b.adjoint() * a * b).trace().re)
            .collect()
    }
}

/// Fisher information of the outcome distribution p_m = Tr(Pi_m rho).
pub fn classical_fi(
    rho: &DensityMatrix,
    drho: &DMatrix<C64>,
    measurement: &ProjectiveMeasurement,
) -> Result<f64> {
    if measurement.dim() != rho.dim() || drho.nrows() != rho.dim() || drho.ncols() != rho.dim() {
        return invalid("measurement, state and derivative dimensions differ");
    }
    let probs = measurement.traces(rho.elems());
    let slopes = measurement.traces(drho);
    let mut fi = 0.0;
    for (m, (&p, &dp)) in probs.iter().zip(&slopes).enumerate() {
        if p < PROB_FLOOR {
            if dp.abs() < SLOPE_FLOOR {
                continue;
            }
            return Err(Error::SingularOutcome(format!(
                "outcome {m} has probability {p:e} but slope {dp:e}"
            )));
        }
        fi += dp * dp / p;
    }
    Ok(fi)
}

#[derive(Debug, Clone)]
pub struct QfiResult {
    /// Fisher information per shot, in units of time^2.
    pub qfi: f64,
    /// SLD in the computational basis.
    pub sld: DMatrix<C64>,
    pub sld_eigenvalues: Vec<f64>,
    /// Rank-one projectors onto the SLD eigenvectors.
    pub sld_eigenbasis: ProjectiveMeasurement,
    /// Classical Fisher information of measuring in the SLD eigenbasis.
    pub classical_fi_check: f64,
}

/// QFI F = sum_{j,k} 2 |<j|drho|k>|^2 / (lambda_j + lambda_k) over the
/// eigenpairs of rho, together with the SLD L solving drho = (L rho + rho L)/2
/// on the support of rho.
pub fn qfi(rho: &DensityMatrix, drho: &DMatrix<C64>) -> Result<QfiResult> {
    let d = rho.dim();
    if drho.nrows() != d || drho.ncols() != d {
        return invalid("derivative has the wrong dimension");
    }
    if !is_hermitian(rho.elems(), INPUT_TOL) || !is_hermitian(drho, INPUT_TOL) {
        return invalid("state and derivative must be Hermitian");
    }
    if drho.trace().norm() > INPUT_TOL {
        return invalid("derivative of a unit-trace family must be traceless");
    }
    let (lambda, vecs) = sorted_eigen(rho.elems());
    let dr = vecs.adjoint() * drho * &vecs;
    let mut fisher = 0.0;
    let mut sld_eig = DMatrix::<C64>::zeros(d, d);
    for j in 0..d {
        for k in 0..d {
            let s = lambda[j] + lambda[k];
            if s > EIGEN_CUTOFF {
                fisher += 2.0 * dr[(j, k)].norm_sqr() / s;
                sld_eig[(j, k)] = dr[(j, k)] * (2.0 / s);
            }
        }
    }
    let sld = &vecs * sld_eig * vecs.adjoint();
    // symmetrize away rounding before the eigensolver
    let sld = (&sld + sld.adjoint()) * C64::from(0.5);
    let (sld_eigenvalues, sld_vecs) = sorted_eigen(&sld);
    let sld_eigenbasis = ProjectiveMeasurement::from_basis(&sld_vecs)?;
    let classical_fi_check = classical_fi(rho, drho, &sld_eigenbasis)?;
    Ok(QfiResult {
        qfi: fisher.max(0.0),
        sld,
        sld_eigenvalues,
        sld_eigenbasis,
        classical_fi_check,
    })
}

/// Optimal-measurement uncertainty 1/sqrt((T/t) F) with one collective
/// measurement per shot.
pub fn qfi_uncertainty(qfi_per_shot: f64, total_time: f64, shot_time: f64) -> Result<f64> {
    if !(shot_time > 0.0 && total_time >= shot_time && total_time.is_finite()) {
        return invalid(format!(
            "need total time {total_time} >= shot time {shot_time} > 0"
        ));
    }
    if !(qfi_per_shot.is_finite() && qfi_per_shot > 0.0) {
        return Err(Error::NoInformation(format!(
            "Fisher information {qfi_per_shot} carries no information"
        )));
    }
    Ok(1.0 / (total_time / shot_time * qfi_per_shot).sqrt())
}

/// QFI of the detuning after dephased evolution of a permutation-invariant
/// pure state.
///
/// The evolved state commutes with every qubit permutation, so it splits into
/// spin-j sectors sigma_j (x) 1_{d_j}, with d_j the multiplicity of spin j, and
/// the excitation-number generator acts diagonally inside each sector. The QFI
/// is then the d_j-weighted sum of (2j+1)-dimensional block contributions.
/// The phase rotation commutes with dephasing, so the result does not depend
/// on the detuning.
pub fn symmetric_phase_qfi(state: &SymmetricFamilyState, gamma: f64, t: f64) -> Result<f64> {
    let sectors = SectorBasis::new(state.n());
    SymmetricQfiProfile::new(&sectors, state).qfi(gamma, t)
}

/// One copy of every spin-j sector of an n-ion register.
#[derive(Debug, Clone)]
pub struct SectorBasis {
    n: usize,
    /// (singlet pairs, multiplicity, basis |j, m> for m = j..-j)
    sectors: Vec<(usize, f64, Vec<DVector<C64>>)>,
}

impl SectorBasis {
    pub fn new(n: usize) -> Self {
        let sectors = (0..=n / 2)
            .map(|singlets| {
                let multiplicity = binomial(n as u64, singlets as u64) as f64
                    - if singlets > 0 {
                        binomial(n as u64, singlets as u64 - 1) as f64
                    } else {
                        0.0
                    };
                (singlets, multiplicity, spin_sector(n, singlets))
            })
            .collect();
        SectorBasis { n, sectors }
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

/// Sector blocks of the dephased state of one permutation-invariant pure
/// state, stored as polynomials in the single-ion coherence factor
/// c = exp(-gamma t) so that scans over t only redo the small eigenproblems.
#[derive(Debug, Clone)]
pub struct SymmetricQfiProfile {
    /// (singlet pairs, multiplicity, block coefficient of c^k for k = 0..=n)
    blocks: Vec<(usize, f64, Vec<DMatrix<C64>>)>,
}

impl SymmetricQfiProfile {
    pub fn new(sectors: &SectorBasis, state: &SymmetricFamilyState) -> Self {
        Self::from_state(sectors, &state.to_state())
    }

    pub(crate) fn from_state(sectors: &SectorBasis, psi: &StateVector) -> Self {
        assert_eq!(sectors.n, psi.n(), "sector basis and state sizes differ");
        let n = psi.n();
        let amps = psi.amps();
        let blocks = sectors
            .sectors
            .iter()
            .map(|(singlets, multiplicity, basis)| {
                let dim = basis.len();
                let applied: Vec<Vec<DVector<C64>>> = basis
                    .iter()
                    .map(|w| dephased_state_poly(amps, w, n))
                    .collect();
                let coeffs = (0..=n)
                    .map(|k| DMatrix::from_fn(dim, dim, |a, b| basis[a].dotc(&applied[b][k])))
                    .collect();
                (*singlets, *multiplicity, coeffs)
            })
            .collect();
        SymmetricQfiProfile { blocks }
    }

    pub fn qfi(&self, gamma: f64, t: f64) -> Result<f64> {
        if !(gamma >= 0.0 && gamma.is_finite() && t >= 0.0 && t.is_finite()) {
            return invalid("need gamma >= 0 and t >= 0");
        }
        let c = (-gamma * t).exp();
        let mut total = 0.0;
        for (singlets, multiplicity, coeffs) in &self.blocks {
            let dim = coeffs[0].nrows();
            let mut block = DMatrix::<C64>::zeros(dim, dim);
            let mut ck = 1.0;
            for m in coeffs {
                block += m * C64::from(ck);
                ck *= c;
            }
            let block = (&block + block.adjoint()) * C64::from(0.5);
            total += multiplicity * block_qfi(&block, *singlets);
        }
        Ok(t * t * total)
    }
}

/// Unit-time QFI of a sector block under the excitation-number generator,
/// which is diagonal with entries singlets + s on |j, j - s>.
fn block_qfi(block: &DMatrix<C64>, singlets: usize) -> f64 {
    let dim = block.nrows();
    let (lambda, u) = sorted_eigen(block);
    let mut sum = 0.0;
    for a in 0..dim {
        for b in 0..dim {
            let s = lambda[a] + lambda[b];
            if s > EIGEN_CUTOFF {
                let hab: C64 = (0..dim)
                    .map(|k| u[(k, a)].conj() * u[(k, b)] * (singlets + k) as f64)
                    .sum();
                let diff = lambda[a] - lambda[b];
                sum += 2.0 * diff * diff / s * hab.norm_sqr();
            }
        }
    }
    sum
}

/// Coefficients of c^k in (sigma v)_x = psi_x sum_y K(x, y) conj(psi_y) v_y,
/// with K the tensor power of [[1, c], [c, 1]].
fn dephased_state_poly(psi: &DVector<C64>, v: &DVector<C64>, n: usize) -> Vec<DVector<C64>> {
    let dim = psi.len();
    // poly[k][x]
    let mut poly = vec![DVector::<C64>::zeros(dim); n + 1];
    poly[0] = psi.zip_map(v, |p, x| p.conj() * x);
    for q in 0..n {
        let bit = 1 << q;
        for k in (0..=q).rev() {
            for b in 0..dim {
                if b & bit == 0 {
                    let (a0, a1) = (poly[k][b], poly[k][b | bit]);
                    poly[k + 1][b] += a1;
                    poly[k + 1][b | bit] += a0;
                }
            }
        }
    }
    poly.into_iter()
        .map(|w| psi.zip_map(&w, |p, x| p * x))
        .collect()
}

/// Orthonormal basis |j, m>, m = j..-j, of one copy of the spin-j sector with
/// j = n/2 - singlets: singlets on pairs (0,1), (2,3), ..., remaining ions in
/// |0>, lowered repeatedly by J_- = sum_k |1><0|_k.
fn spin_sector(n: usize, singlets: usize) -> Vec<DVector<C64>> {
    let dim = 1 << n;
    let mut top = DVector::<C64>::zeros(dim);
    for pattern in 0..(1usize << singlets) {
        // each singlet pair is (|01> - |10>)/sqrt2 with the excitation on
        // the first or second ion of the pair
        let mut b = 0;
        let mut sign = 1.0;
        for pair in 0..singlets {
            if pattern & (1 << pair) == 0 {
                b |= 1 << (2 * pair + 1);
            } else {
                b |= 1 << (2 * pair);
                sign = -sign;
            }
        }
        top[b] = C64::from(sign);
    }
    top.normalize_mut();
    let steps = n - 2 * singlets;
    let mut sector = vec![top];
    for _ in 0..steps {
        let prev = sector.last().unwrap();
        let mut next = DVector::<C64>::zeros(dim);
        for b in 0..dim {
            for k in 0..n {
                if b & (1 << k) != 0 {
                    next[b] += prev[b ^ (1 << k)];
                }
            }
        }
        next.normalize_mut();
        sector.push(next);
    }
    sector
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{dephase_evolve, drho_ddelta, DephasingParams};
    use crate::qstate::{ghz, product_superposition, to_density};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use std::f64::consts::FRAC_PI_2;

    fn evolved(psi: &StateVector, delta: f64, gamma: f64, t: f64) -> (DensityMatrix, DMatrix<C64>) {
        let p = DephasingParams::new(delta, gamma, t).unwrap();
        let rho0 = to_density(psi);
        (dephase_evolve(&rho0, &p), drho_ddelta(&rho0, &p))
    }

    #[test]
    fn single_qubit_pure_qfi() {
        let (rho, d) = evolved(&product_superposition(1).unwrap(), 0.4, 0.0, 1.7);
        let r = qfi(&rho, &d).unwrap();
        assert_relative_eq!(r.qfi, 1.7 * 1.7, max_relative = 1e-10);
        assert_relative_eq!(r.classical_fi_check, r.qfi, max_relative = 1e-6);
    }

    #[test]
    fn degenerate_product_state_spectrum() {
        // heavily degenerate spectra
        let psi = product_superposition(5).unwrap();
        for t in [0.364552, 0.3645, 0.5, 1.3] {
            let (rho, drho) = evolved(&psi, 0.0, 1.0, t);
            let (vals, vecs) = sorted_eigen(rho.elems());
            let lambda = DMatrix::from_diagonal(&DVector::from_iterator(
                32,
                vals.iter().map(|&v| C64::from(v)),
            ));
            let residual = (rho.elems() * &vecs - &vecs * lambda).norm();
            assert!(residual < 1e-12, "t={t}: residual {residual}");
            let q = qfi(&rho, &drho).unwrap().qfi;
            assert_relative_eq!(q, 5.0 * t * t * (-2.0 * t).exp(), max_relative = 1e-10);
        }
    }

    #[test]
    fn ghz_qfi_with_and_without_dephasing() {
        for n in 2..=4 {
            let t = 0.6;
            let (rho, d) = evolved(&ghz(n).unwrap(), 0.9, 0.0, t);
            let nf = n as f64;
            assert_relative_eq!(
                qfi(&rho, &d).unwrap().qfi,
                nf * nf * t * t,
                max_relative = 1e-9
            );

            let gamma = 0.3;
            let (rho, d) = evolved(&ghz(n).unwrap(), 0.9, gamma, t);
            let expect = nf * nf * t * t * (-2.0 * nf * gamma * t).exp();
            let r = qfi(&rho, &d).unwrap();
            assert_relative_eq!(r.qfi, expect, max_relative = 1e-8);
            assert_relative_eq!(r.classical_fi_check, r.qfi, max_relative = 1e-6);
        }
    }

    #[test]
    fn computational_basis_carries_no_information() {
        let (rho, d) = evolved(&product_superposition(3).unwrap(), 0.9, 0.4, 0.8);
        let fi = classical_fi(&rho, &d, &ProjectiveMeasurement::computational(3)).unwrap();
        assert_abs_diff_eq!(fi, 0.0, epsilon = 1e-20);
    }

    #[test]
    fn sigma_x_readout_matches_ramsey_error_propagation() {
        // measuring sigma_x after evolution at delta t = pi/2
        let (t, gamma) = (0.8, 0.5);
        let delta = FRAC_PI_2 / t;
        let (rho, d) = evolved(&product_superposition(1).unwrap(), delta, gamma, t);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let basis = DMatrix::from_row_slice(2, 2, &[s, s, s, -s].map(C64::from));
        let fi = classical_fi(
            &rho,
            &d,
            &ProjectiveMeasurement::from_basis(&basis).unwrap(),
        )
        .unwrap();
        let budget = crate::ramsey::ExperimentBudget::new(1, 1.0, t).unwrap();
        let unc = crate::ramsey::uncertainty_uncorrelated(&budget, delta, gamma).unwrap();
        // one datum per shot, T = 1
        assert_relative_eq!(1.0 / (fi / t).sqrt(), unc, max_relative = 1e-9);
    }

    #[test]
    fn uncertainty_scaling_and_errors() {
        let a = qfi_uncertainty(2.0, 10.0, 0.5).unwrap();
        let b = qfi_uncertainty(2.0, 20.0, 0.5).unwrap();
        assert_relative_eq!(a / b, 2f64.sqrt(), max_relative = 1e-14);
        assert!(matches!(
            qfi_uncertainty(0.0, 10.0, 0.5),
            Err(Error::NoInformation(_))
        ));
        assert!(qfi_uncertainty(1.0, 0.1, 0.5).is_err());
    }

    #[test]
    fn rejects_bad_inputs() {
        let (rho, mut d) = evolved(&product_superposition(1).unwrap(), 0.9, 0.4, 0.8);
        d[(0, 1)] += C64::new(0.3, 0.0);
        assert!(qfi(&rho, &d).is_err());
        let broken = DMatrix::from_row_slice(2, 1, &[C64::from(1.0), C64::from(0.0)]);
        assert!(ProjectiveMeasurement::from_blocks(vec![broken]).is_err());
        let p0 = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0].map(C64::from));
        assert!(ProjectiveMeasurement::from_projectors(std::slice::from_ref(&p0)).is_err());
        let p1 = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0].map(C64::from));
        let m = ProjectiveMeasurement::from_projectors(&[p0.clone(), p1]).unwrap();
        assert_eq!(m.len(), 2);
        assert!((m.projector(0) - p0).norm() < 1e-12);
    }

    #[test]
    fn singular_outcome_is_reported() {
        let rho = to_density(&StateVector::basis(1, 0).unwrap());
        let d = DMatrix::from_row_slice(2, 2, &[-0.1, 0.0, 0.0, 0.1].map(C64::from));
        let err = classical_fi(&rho, &d, &ProjectiveMeasurement::computational(1)).unwrap_err();
        assert!(matches!(err, Error::SingularOutcome(_)));
    }

    #[test]
    fn spin_sector_route_matches_dense_route() {
        let cases: &[(usize, &[f64])] = &[
            (2, &[0.6, 0.8]),
            (3, &[0.28, 0.96]),
            (4, &[0.6, 0.64, 0.48]),
            (5, &[0.5, 0.5, std::f64::consts::FRAC_1_SQRT_2]),
        ];
        for &(n, a) in cases {
            let fam = SymmetricFamilyState::normalized(n, a).unwrap();
            for &(gamma, t) in &[(0.0, 0.7), (1.0, 0.3), (0.5, 1.4)] {
                let (rho, d) = evolved(&fam.to_state(), 0.77, gamma, t);
                let dense = qfi(&rho, &d).unwrap().qfi;
                let fast = symmetric_phase_qfi(&fam, gamma, t).unwrap();
                assert_relative_eq!(fast, dense, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn spin_sectors_are_orthonormal_and_complete() {
        let n = 5;
        let mut total = 0.0;
        let mut all = Vec::new();
        for (_, mult, sector) in SectorBasis::new(n).sectors {
            total += mult * sector.len() as f64;
            all.extend(sector);
        }
        assert_eq!(total, 32.0);
        for (i, a) in all.iter().enumerate() {
            for (j, b) in all.iter().enumerate() {
                let ip = a.dotc(b).norm();
                assert_abs_diff_eq!(ip, if i == j { 1.0 } else { 0.0 }, epsilon = 1e-12);
            }
        }
    }
}
