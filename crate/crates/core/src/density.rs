//! Density operators and the entropic quantities built on them.
//!
//! [`DensityOp`] stores an explicit matrix over the same MSB-first basis
//! convention as [`LabeledState`]. Entropies are in bits. Spectra of
//! reduced states are exact up to eigensolver roundoff; eigenvalues in
//! `[-1e-12, 0)` are treated as zero and anything more negative is
//! rejected as a bug rather than noise.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::state::{LabeledState, RegId, SystemLabel};

/// Eigenvalues above this (negative) floor are clamped to zero before
/// logarithms; below it they indicate a real defect.
pub const EIGENVALUE_FLOOR: f64 = -1e-12;

/// Tolerance on Hermiticity, unit trace and spectrum checks when a
/// matrix is supplied from outside.
pub const VALIDATION_TOL: f64 = 1e-9;

/// Positive operator with unit trace on an ordered list of registers.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOp {
    labels: Vec<SystemLabel>,
    mat: DMatrix<Complex64>,
}

impl DensityOp {
    /// Validates Hermiticity, trace and spectrum of an untrusted matrix.
    pub fn new(labels: Vec<SystemLabel>, mat: DMatrix<Complex64>) -> Result<Self> {
        let dim = 1usize << labels.len();
        if mat.nrows() != dim || mat.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: labels.len(),
                got: mat.nrows(),
            });
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].iter().any(|m| m.id == l.id) {
                return Err(Error::DuplicateLabel(l.id));
            }
        }
        let mut herm_dev: f64 = 0.0;
        for i in 0..dim {
            for j in 0..dim {
                herm_dev = herm_dev.max((mat[(i, j)] - mat[(j, i)].conj()).norm());
            }
        }
        if herm_dev > VALIDATION_TOL {
            return Err(Error::NonHermitian(herm_dev));
        }
        let tr: Complex64 = (0..dim).map(|i| mat[(i, i)]).sum();
        if (tr - Complex64::new(1.0, 0.0)).norm() > VALIDATION_TOL {
            return Err(Error::NonUnitTrace(tr.re));
        }
        let op = DensityOp { labels, mat };
        let min = op
            .spectrum_raw()
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if min < -VALIDATION_TOL {
            return Err(Error::NegativeEigenvalue(min));
        }
        Ok(op)
    }

    /// Construction path for matrices positive by construction.
    fn trusted(labels: Vec<SystemLabel>, mat: DMatrix<Complex64>) -> Self {
        DensityOp { labels, mat }
    }

    /// Rank-one projector onto a pure state.
    pub fn from_pure(state: &LabeledState) -> Self {
        let amps = state.amplitudes();
        let d = amps.len();
        let mat = DMatrix::from_fn(d, d, |i, j| amps[i] * amps[j].conj());
        DensityOp::trusted(state.labels().to_vec(), mat)
    }

    pub fn labels(&self) -> &[SystemLabel] {
        &self.labels
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    pub fn qubits(&self) -> usize {
        self.labels.len()
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn ids(&self) -> Vec<RegId> {
        self.labels.iter().map(|l| l.id).collect()
    }

    fn positions(&self, part: &[RegId]) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(part.len());
        for id in part {
            let pos = self
                .labels
                .iter()
                .position(|l| l.id == *id)
                .ok_or(Error::UnknownLabel(*id))?;
            if out.contains(&pos) {
                return Err(Error::DuplicateLabel(*id));
            }
            out.push(pos);
        }
        Ok(out)
    }

    /// Reduction to `keep`, emitted in the order given.
    pub fn partial_trace(&self, keep: &[RegId]) -> Result<DensityOp> {
        let q = self.labels.len();
        let keep_pos = self.positions(keep)?;
        let rest_pos: Vec<usize> = (0..q).filter(|p| !keep_pos.contains(p)).collect();
        let keep_masks: Vec<usize> = keep_pos.iter().map(|&p| 1 << (q - 1 - p)).collect();
        let rest_masks: Vec<usize> = rest_pos.iter().map(|&p| 1 << (q - 1 - p)).collect();
        let dk = 1usize << keep_pos.len();
        let dr = 1usize << rest_pos.len();
        let scatter = |pattern: usize, masks: &[usize]| -> usize {
            let mut idx = 0;
            for (t, m) in masks.iter().enumerate() {
                if pattern & (1 << (masks.len() - 1 - t)) != 0 {
                    idx |= m;
                }
            }
            idx
        };
        let mut out = DMatrix::from_element(dk, dk, Complex64::new(0.0, 0.0));
        for r in 0..dr {
            let r_idx = scatter(r, &rest_masks);
            for k1 in 0..dk {
                let i = scatter(k1, &keep_masks) | r_idx;
                for k2 in 0..dk {
                    let j = scatter(k2, &keep_masks) | r_idx;
                    out[(k1, k2)] += self.mat[(i, j)];
                }
            }
        }
        let labels = keep_pos.iter().map(|&p| self.labels[p]).collect();
        Ok(DensityOp::trusted(labels, out))
    }

    /// Same operator with labels in the given order.
    pub fn permuted(&self, order: &[RegId]) -> Result<DensityOp> {
        if order.len() != self.labels.len() {
            return Err(Error::DimensionMismatch {
                expected: self.labels.len(),
                got: order.len(),
            });
        }
        self.partial_trace(order)
    }

    fn spectrum_raw(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.mat)
    }

    /// Spectrum with the numerical-noise clamp applied.
    pub fn spectrum(&self) -> Result<Vec<f64>> {
        clamp_spectrum(self.spectrum_raw())
    }

    /// Von Neumann entropy in bits.
    pub fn entropy(&self) -> Result<f64> {
        Ok(shannon_bits(&self.spectrum()?))
    }

    /// `H(A) + H(B) - H(AB)` for disjoint nonempty parts of this
    /// operator's registers.
    pub fn mutual_information(&self, a: &[RegId], b: &[RegId]) -> Result<f64> {
        check_parts(a, b)?;
        let joint: Vec<RegId> = a.iter().chain(b.iter()).cloned().collect();
        Ok(self.partial_trace(a)?.entropy()? + self.partial_trace(b)?.entropy()?
            - self.partial_trace(&joint)?.entropy()?)
    }

    /// `H(B) - H(AB)`, the coherent information from A to B.
    pub fn coherent_information(&self, a: &[RegId], b: &[RegId]) -> Result<f64> {
        check_parts(a, b)?;
        let joint: Vec<RegId> = a.iter().chain(b.iter()).cloned().collect();
        Ok(self.partial_trace(b)?.entropy()? - self.partial_trace(&joint)?.entropy()?)
    }
}

fn check_parts(a: &[RegId], b: &[RegId]) -> Result<()> {
    if a.is_empty() {
        return Err(Error::ArityMismatch { expected: 1, got: 0 });
    }
    if b.is_empty() {
        return Err(Error::ArityMismatch { expected: 1, got: 0 });
    }
    for id in a {
        if b.contains(id) {
            return Err(Error::OverlappingParts(*id));
        }
    }
    Ok(())
}

impl LabeledState {
    /// Reduction of the pure-state projector to `keep`, in that order.
    pub fn partial_trace(&self, keep: &[RegId]) -> Result<DensityOp> {
        let q = self.qubits();
        let keep_pos = self.pattern_positions(keep)?;
        let rest_pos: Vec<usize> = (0..q).filter(|p| !keep_pos.contains(p)).collect();
        let keep_masks = self.bit_masks(&keep_pos);
        let rest_masks = self.bit_masks(&rest_pos);
        let dk = 1usize << keep_pos.len();
        let dr = 1usize << rest_pos.len();
        let scatter = |pattern: usize, masks: &[usize]| -> usize {
            let mut idx = 0;
            for (t, m) in masks.iter().enumerate() {
                if pattern & (1 << (masks.len() - 1 - t)) != 0 {
                    idx |= m;
                }
            }
            idx
        };
        let amps = self.amplitudes();
        let mut out = DMatrix::from_element(dk, dk, Complex64::new(0.0, 0.0));
        let mut col = vec![Complex64::new(0.0, 0.0); dk];
        for r in 0..dr {
            let r_idx = scatter(r, &rest_masks);
            for (k, slot) in col.iter_mut().enumerate() {
                *slot = amps[scatter(k, &keep_masks) | r_idx];
            }
            for k1 in 0..dk {
                for k2 in 0..dk {
                    out[(k1, k2)] += col[k1] * col[k2].conj();
                }
            }
        }
        let labels = keep_pos
            .iter()
            .map(|&p| self.labels()[p])
            .collect();
        Ok(DensityOp::trusted(labels, out))
    }

    /// Full-state projector.
    pub fn density(&self) -> DensityOp {
        DensityOp::from_pure(self)
    }

    /// Entropy of the reduction to `part`, in bits.
    pub fn entropy_of(&self, part: &[RegId]) -> Result<f64> {
        self.partial_trace(part)?.entropy()
    }

    /// `H(A) + H(B) - H(AB)` evaluated on reductions of this pure state.
    pub fn mutual_information(&self, a: &[RegId], b: &[RegId]) -> Result<f64> {
        check_parts(a, b)?;
        let joint: Vec<RegId> = a.iter().chain(b.iter()).cloned().collect();
        Ok(self.entropy_of(a)? + self.entropy_of(b)? - self.entropy_of(&joint)?)
    }

    /// `H(B) - H(AB)` evaluated on reductions of this pure state.
    pub fn coherent_information(&self, a: &[RegId], b: &[RegId]) -> Result<f64> {
        check_parts(a, b)?;
        let joint: Vec<RegId> = a.iter().chain(b.iter()).cloned().collect();
        Ok(self.entropy_of(b)? - self.entropy_of(&joint)?)
    }
}

fn hermitian_eigenvalues(mat: &DMatrix<Complex64>) -> Vec<f64> {
    // Symmetrize first so eigensolver input is exactly Hermitian.
    let herm = (mat + mat.adjoint()) * Complex64::new(0.5, 0.0);
    herm.symmetric_eigen().eigenvalues.iter().cloned().collect()
}

fn clamp_spectrum(mut vals: Vec<f64>) -> Result<Vec<f64>> {
    for v in &mut vals {
        if *v < EIGENVALUE_FLOOR {
            return Err(Error::NegativeEigenvalue(*v));
        }
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    Ok(vals)
}

fn shannon_bits(spectrum: &[f64]) -> f64 {
    let h: f64 = spectrum
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| -v * v.log2())
        .sum();
    h.max(0.0)
}

/// Uhlmann fidelity `tr sqrt(sqrt(rho) sigma sqrt(rho))`, so the
/// pure-state case reduces to `|<a|b>|`.
///
/// Eigenvalues of the inner product below `1e-12` of the largest are
/// discarded before the square root; they are roundoff, and rooting
/// them would otherwise inflate the result by far more than their
/// actual weight.
pub fn fidelity(rho: &DensityOp, sigma: &DensityOp) -> Result<f64> {
    let sigma = sigma.permuted(&rho.ids())?;
    let root = hermitian_sqrt(&rho.mat)?;
    let inner = &root * &sigma.mat * &root;
    let vals = hermitian_eigenvalues(&inner);
    let top = vals.iter().cloned().fold(0.0, f64::max);
    if vals.iter().any(|&v| v < -VALIDATION_TOL) {
        let min = vals.into_iter().fold(f64::INFINITY, f64::min);
        return Err(Error::NegativeEigenvalue(min));
    }
    let cutoff = top * 1e-12;
    Ok(vals
        .iter()
        .filter(|&&v| v > cutoff)
        .map(|v| v.sqrt())
        .sum())
}

/// Half the trace norm of `rho - sigma`.
pub fn trace_distance(rho: &DensityOp, sigma: &DensityOp) -> Result<f64> {
    let sigma = sigma.permuted(&rho.ids())?;
    let diff = &rho.mat - &sigma.mat;
    Ok(hermitian_eigenvalues(&diff).iter().map(|v| v.abs()).sum::<f64>() / 2.0)
}

fn hermitian_sqrt(mat: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let herm = (mat + mat.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = herm.symmetric_eigen();
    let vals = clamp_spectrum(eig.eigenvalues.iter().cloned().collect())?;
    let d = mat.nrows();
    let mut scaled = eig.eigenvectors.clone();
    for (c, v) in vals.iter().enumerate() {
        let s = Complex64::new(v.sqrt(), 0.0);
        for r in 0..d {
            scaled[(r, c)] *= s;
        }
    }
    Ok(&scaled * eig.eigenvectors.adjoint())
}
