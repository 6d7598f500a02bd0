//! Brute-force reference for small spins: the joint atom-field state in a
//! truncated Fock space, evolved by explicit exponentiation of the generator
//! `-iCM (c^dag + c)` for each `M`, then measured projectively.
//!
//! Nothing here relies on coherent-state algebra, so it serves as an
//! independent check of the closed-form scattering and collapse routines.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spin_basis::{DickeState, SpinQuantum};

/// Largest atom count the oracle accepts (`S <= 6`).
pub const ORACLE_MAX_ATOMS: u32 = 12;
/// Population allowed in the guard levels at the top of the Fock space.
pub const LEAKAGE_BOUND: f64 = 1e-8;

/// Smallest admissible Fock dimension, `ceil((CS)^2 + 10 CS + 20)`.
pub fn minimum_fock_dim(spin: SpinQuantum, c: f64) -> usize {
    let cs = c * spin.s();
    (cs * cs + 10.0 * cs + 20.0).ceil() as usize
}

/// Joint amplitudes indexed by `(M index, n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedJointState {
    spin: SpinQuantum,
    fock_dim: usize,
    amplitudes: DMatrix<Complex64>,
}

impl TruncatedJointState {
    pub fn spin(&self) -> SpinQuantum {
        self.spin
    }

    pub fn fock_dim(&self) -> usize {
        self.fock_dim
    }

    pub fn amplitudes(&self) -> &DMatrix<Complex64> {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Photon-number marginal `P(n) = sum_M |amp[M, n]|^2`.
    pub fn photon_marginal(&self) -> Vec<f64> {
        (0..self.fock_dim)
            .map(|n| self.amplitudes.column(n).iter().map(|z| z.norm_sqr()).sum())
            .collect()
    }
}

/// `(c + c^dag)` truncated to `dim` levels.
fn quadrature_matrix(dim: usize) -> DMatrix<f64> {
    let mut k = DMatrix::zeros(dim, dim);
    for n in 1..dim {
        let v = (n as f64).sqrt();
        k[(n - 1, n)] = v;
        k[(n, n - 1)] = v;
    }
    k
}

/// Evolves `state ⊗ |0>` under `exp[-iC S_z (c^dag + c)]`.
pub fn oracle_evolve(state: &DickeState, c: f64, fock_dim: usize) -> Result<TruncatedJointState> {
    let spin = state.spin();
    if spin.n_atoms() > ORACLE_MAX_ATOMS {
        return Err(Error::domain(format!(
            "oracle limited to N_a <= {ORACLE_MAX_ATOMS}, got {}",
            spin.n_atoms()
        )));
    }
    if !(c >= 0.0) || !c.is_finite() {
        return Err(Error::domain(format!(
            "strength C = {c} must be non-negative"
        )));
    }
    let needed = minimum_fock_dim(spin, c);
    if fock_dim < needed {
        return Err(Error::domain(format!(
            "fock_dim {fock_dim} below required {needed}"
        )));
    }

    let eigen = SymmetricEigen::new(quadrature_matrix(fock_dim));
    let vectors = eigen.eigenvectors.map(|x| Complex64::new(x, 0.0));
    // V^T e_0
    let overlap: DVector<Complex64> = vectors.row(0).transpose();
    let guard = (fock_dim / 10).max(5).min(fock_dim);

    let mut amplitudes = DMatrix::zeros(spin.dim(), fock_dim);
    for (i, m) in spin.m_values().enumerate() {
        let phases = DVector::from_iterator(
            fock_dim,
            eigen
                .eigenvalues
                .iter()
                .zip(overlap.iter())
                .map(|(&lambda, &o)| Complex64::from_polar(1.0, -c * m * lambda) * o),
        );
        let column = &vectors * phases;
        let norm: f64 = column.iter().map(|z| z.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::Truncation {
                what: "unitarity defect",
                value: (norm - 1.0).abs(),
                bound: 1e-9,
            });
        }
        let leaked: f64 = column
            .rows(fock_dim - guard, guard)
            .iter()
            .map(|z| z.norm_sqr())
            .sum();
        if leaked > LEAKAGE_BOUND {
            return Err(Error::Truncation {
                what: "Fock-space leakage",
                value: leaked,
                bound: LEAKAGE_BOUND,
            });
        }
        let a = state.amplitudes()[i];
        for n in 0..fock_dim {
            amplitudes[(i, n)] = a * column[n];
        }
    }
    Ok(TruncatedJointState {
        spin,
        fock_dim,
        amplitudes,
    })
}

/// Projects the field onto `|n_m>` and returns the normalized atomic state.
pub fn oracle_project(joint: &TruncatedJointState, n_m: u64) -> Result<DickeState> {
    let n = n_m as usize;
    if n >= joint.fock_dim {
        return Err(Error::domain(format!(
            "n_m = {n_m} outside the truncated space of dimension {}",
            joint.fock_dim
        )));
    }
    let column: Vec<Complex64> = joint.amplitudes.column(n).iter().copied().collect();
    let probability: f64 = column.iter().map(|z| z.norm_sqr()).sum();
    if !(probability > 1e-300) {
        return Err(Error::Conditioning { n_m, probability });
    }
    DickeState::from_amplitudes(joint.spin, column)
}
