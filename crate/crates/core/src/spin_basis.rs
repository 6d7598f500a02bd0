//! Collective spin states of `N_a` two-level atoms in the Dicke basis.
//!
//! Spin quantum numbers are half-integers; internally they are carried as
//! doubled integers (`2S = N_a`, `2M`) so that no arithmetic is done on
//! half-integers. Basis index `i = 0..=N_a` corresponds to `M = i - S`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::ln_factorial;

/// Tolerance on `|norm - 1|` accepted by routines that require normalized input.
pub const NORM_TOLERANCE: f64 = 1e-9;

/// Mean-spin lengths below this are treated as zero when forming `xi`.
pub const MEAN_SPIN_FLOOR: f64 = 1e-9;

/// Total collective spin `S = N_a / 2`, stored as the atom count.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpinQuantum {
    n_atoms: u32,
}

impl SpinQuantum {
    pub fn new(n_atoms: u32) -> Result<Self> {
        if n_atoms == 0 {
            return Err(Error::domain("atom count N_a must be at least 1"));
        }
        Ok(Self { n_atoms })
    }

    pub fn n_atoms(self) -> u32 {
        self.n_atoms
    }

    /// `2S`.
    pub fn twice_s(self) -> i64 {
        self.n_atoms as i64
    }

    pub fn s(self) -> f64 {
        self.n_atoms as f64 / 2.0
    }

    /// Dimension of the Dicke basis, `N_a + 1`.
    pub fn dim(self) -> usize {
        self.n_atoms as usize + 1
    }

    /// `2M` for basis index `i`.
    pub fn twice_m(self, index: usize) -> i64 {
        2 * index as i64 - self.twice_s()
    }

    /// `M` for basis index `i`.
    pub fn m(self, index: usize) -> f64 {
        self.twice_m(index) as f64 / 2.0
    }

    /// Basis index of `2M`, if it lies on the lattice.
    pub fn index_of_twice_m(self, twice_m: i64) -> Option<usize> {
        let shifted = twice_m + self.twice_s();
        if shifted < 0 || shifted > 2 * self.twice_s() || shifted % 2 != 0 {
            None
        } else {
            Some((shifted / 2) as usize)
        }
    }

    /// Basis index of a lattice value `M`.
    pub fn index_of_m(self, m: f64) -> Option<usize> {
        let twice = 2.0 * m;
        if twice.fract() != 0.0 {
            return None;
        }
        self.index_of_twice_m(twice as i64)
    }

    /// `<M+1| S_+ |M> = sqrt(S(S+1) - M(M+1))` for basis index `i`.
    pub fn raising_coefficient(self, index: usize) -> f64 {
        let s = self.s();
        let m = self.m(index);
        (s * (s + 1.0) - m * (m + 1.0)).max(0.0).sqrt()
    }

    pub fn m_values(self) -> impl Iterator<Item = f64> {
        (0..self.dim()).map(move |i| self.m(i))
    }
}

/// `ln A(S, M)` with `A(S,M) = 2^{-S} sqrt((2S)! / ((S+M)! (S-M)!))`.
pub fn log_binomial_amplitude(twice_s: u32, twice_m: i64) -> Result<f64> {
    let ts = twice_s as i64;
    if twice_m.abs() > ts {
        return Err(Error::domain(format!(
            "|2M| = {} exceeds 2S = {ts}",
            twice_m.abs()
        )));
    }
    if (ts + twice_m) % 2 != 0 {
        return Err(Error::domain(format!(
            "2M = {twice_m} has the wrong parity for 2S = {ts}"
        )));
    }
    let up = ((ts + twice_m) / 2) as u64;
    let down = ((ts - twice_m) / 2) as u64;
    let half_s = ts as f64 / 2.0;
    Ok(-half_s * std::f64::consts::LN_2
        + 0.5 * (ln_factorial(ts as u64) - ln_factorial(up) - ln_factorial(down)))
}

/// Pure collective state, `sum_M a_M |S, M>`.
#[derive(Clone, Debug, PartialEq)]
pub struct DickeState {
    spin: SpinQuantum,
    amplitudes: Vec<Complex64>,
}

impl DickeState {
    /// Builds a state from raw amplitudes (index `i` = `M + S`), normalizing them.
    pub fn from_amplitudes(spin: SpinQuantum, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != spin.dim() {
            return Err(Error::domain(format!(
                "expected {} amplitudes for N_a = {}, got {}",
                spin.dim(),
                spin.n_atoms(),
                amplitudes.len()
            )));
        }
        if amplitudes
            .iter()
            .any(|a| !a.re.is_finite() || !a.im.is_finite())
        {
            return Err(Error::domain("amplitudes must be finite"));
        }
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::domain("cannot normalize the zero vector"));
        }
        let amplitudes = amplitudes.into_iter().map(|a| a / norm).collect();
        Ok(Self { spin, amplitudes })
    }

    /// Dicke basis state `|S, M>` with `M = twice_m / 2`.
    pub fn basis(spin: SpinQuantum, twice_m: i64) -> Result<Self> {
        let index = spin
            .index_of_twice_m(twice_m)
            .ok_or_else(|| Error::domain(format!("2M = {twice_m} is not on the lattice")))?;
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); spin.dim()];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(Self { spin, amplitudes })
    }

    pub fn spin(&self) -> SpinQuantum {
        self.spin
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    /// Amplitude at lattice value `M`, zero off the lattice.
    pub fn amplitude_at(&self, m: f64) -> Complex64 {
        self.spin
            .index_of_m(m)
            .map_or(Complex64::new(0.0, 0.0), |i| self.amplitudes[i])
    }

    /// `|a_M|^2` for every `M`.
    pub fn populations(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `S_x |psi>` as a raw amplitude vector.
    pub fn apply_sx(&self) -> Vec<Complex64> {
        let dim = self.spin.dim();
        let mut out = vec![Complex64::new(0.0, 0.0); dim];
        for i in 0..dim - 1 {
            let c = 0.5 * self.spin.raising_coefficient(i);
            out[i + 1] += c * self.amplitudes[i];
            out[i] += c * self.amplitudes[i + 1];
        }
        out
    }
}

/// The `S_x = S` eigenstate, `a_M = A(S, M)`.
pub fn initial_coherent_spin_state(n_atoms: u32) -> Result<DickeState> {
    let spin = SpinQuantum::new(n_atoms)?;
    let amplitudes = (0..spin.dim())
        .map(|i| {
            log_binomial_amplitude(n_atoms, spin.twice_m(i))
                .map(|ln_a| Complex64::new(ln_a.exp(), 0.0))
        })
        .collect::<Result<Vec<_>>>()?;
    DickeState::from_amplitudes(spin, amplitudes)
}

/// Anything that can report the matrix elements `<i| rho |i+k>` of a
/// collective-spin density operator in the Dicke basis.
pub trait SpinExpectation {
    fn spin(&self) -> SpinQuantum;

    /// `<i| rho |i + offset>`.
    fn element(&self, i: usize, offset: usize) -> Complex64;

    fn trace(&self) -> f64 {
        (0..self.spin().dim()).map(|i| self.element(i, 0).re).sum()
    }
}

impl SpinExpectation for DickeState {
    fn spin(&self) -> SpinQuantum {
        self.spin
    }

    fn element(&self, i: usize, offset: usize) -> Complex64 {
        self.amplitudes[i] * self.amplitudes[i + offset].conj()
    }

    fn trace(&self) -> f64 {
        self.norm_sqr()
    }
}

/// First and second moments of the collective spin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinMoments {
    pub mean_sx: f64,
    pub mean_sy: f64,
    pub mean_sz: f64,
    pub var_sz: f64,
    pub var_sy: f64,
    pub mean_spin_length: f64,
}

/// Mean vector and symmetrized covariance matrix of `(S_x, S_y, S_z)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpinCovariance {
    pub mean: [f64; 3],
    pub covariance: [[f64; 3]; 3],
}

fn check_normalized<T: SpinExpectation + ?Sized>(state: &T) -> Result<()> {
    let trace = state.trace();
    if (trace - 1.0).abs() > NORM_TOLERANCE {
        return Err(Error::Contract(format!(
            "state is not normalized (norm {trace:.3e} deviates from 1 by more than {NORM_TOLERANCE:e})"
        )));
    }
    Ok(())
}

/// Mean and covariance of the spin vector, from `<S_z>`, `<S_z^2>`, `<S_+>`,
/// `<S_+^2>` and `<{S_+, S_z}>`.
pub fn spin_covariance<T: SpinExpectation + ?Sized>(state: &T) -> Result<SpinCovariance> {
    check_normalized(state)?;
    let spin = state.spin();
    let dim = spin.dim();
    let s = spin.s();

    let mut sz = 0.0;
    let mut sz2 = 0.0;
    let mut s_plus = Complex64::new(0.0, 0.0);
    let mut s_plus_sq = Complex64::new(0.0, 0.0);
    let mut s_plus_sz = Complex64::new(0.0, 0.0);
    for i in 0..dim {
        let m = spin.m(i);
        let p = state.element(i, 0).re;
        sz += m * p;
        sz2 += m * m * p;
        if i + 1 < dim {
            let c = spin.raising_coefficient(i);
            let rho = state.element(i, 1);
            s_plus += c * rho;
            s_plus_sz += c * (2.0 * m + 1.0) * rho;
            if i + 2 < dim {
                s_plus_sq += c * spin.raising_coefficient(i + 1) * state.element(i, 2);
            }
        }
    }

    let mean = [s_plus.re, s_plus.im, sz];
    let transverse = 0.5 * (s * (s + 1.0) - sz2);
    let second = [
        [
            transverse + 0.5 * s_plus_sq.re,
            0.5 * s_plus_sq.im,
            0.5 * s_plus_sz.re,
        ],
        [
            0.5 * s_plus_sq.im,
            transverse - 0.5 * s_plus_sq.re,
            0.5 * s_plus_sz.im,
        ],
        [0.5 * s_plus_sz.re, 0.5 * s_plus_sz.im, sz2],
    ];
    let mut covariance = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            covariance[a][b] = second[a][b] - mean[a] * mean[b];
        }
    }
    Ok(SpinCovariance { mean, covariance })
}

pub fn spin_moments<T: SpinExpectation + ?Sized>(state: &T) -> Result<SpinMoments> {
    let SpinCovariance { mean, covariance } = spin_covariance(state)?;
    Ok(SpinMoments {
        mean_sx: mean[0],
        mean_sy: mean[1],
        mean_sz: mean[2],
        var_sz: covariance[2][2].max(0.0),
        var_sy: covariance[1][1].max(0.0),
        mean_spin_length: norm3(mean),
    })
}

fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn quadratic_form(m: &[[f64; 3]; 3], u: [f64; 3], v: [f64; 3]) -> f64 {
    (0..3)
        .map(|a| (0..3).map(|b| u[a] * m[a][b] * v[b]).sum::<f64>())
        .sum()
}

/// Smallest principal variance of the spin components orthogonal to the mean
/// spin, together with the mean spin length.
///
/// For the states produced by collapse from the `S_x` eigenstate the mean spin
/// points along `x` and this reduces to `Var(S_z)` whenever `S_z` is the
/// squeezed quadrature.
pub fn orthogonal_variance<T: SpinExpectation + ?Sized>(state: &T) -> Result<(f64, f64)> {
    let SpinCovariance { mean, covariance } = spin_covariance(state)?;
    let length = norm3(mean);
    if length < MEAN_SPIN_FLOOR {
        return Err(Error::Singular(length));
    }
    let u = [mean[0] / length, mean[1] / length, mean[2] / length];
    // helper axis least aligned with the mean spin
    let helper_axis = (0..3)
        .min_by(|&a, &b| u[a].abs().total_cmp(&u[b].abs()))
        .unwrap_or(2);
    let mut helper = [0.0; 3];
    helper[helper_axis] = 1.0;
    let e1 = {
        let c = cross(helper, u);
        let n = norm3(c);
        [c[0] / n, c[1] / n, c[2] / n]
    };
    let e2 = cross(u, e1);
    let a = quadratic_form(&covariance, e1, e1);
    let d = quadratic_form(&covariance, e2, e2);
    let b = quadratic_form(&covariance, e1, e2);
    // det / max_eig avoids cancellation when the two variances differ by many decades
    let max_eig = 0.5 * (a + d) + (0.25 * (a - d) * (a - d) + b * b).sqrt();
    let min_eig = if max_eig > 0.0 {
        (a * d - b * b) / max_eig
    } else {
        0.0
    };
    Ok((min_eig.max(0.0), length))
}

/// `xi = sqrt(2S) * Delta S_perp / |<S>|`.
pub fn squeezing_parameter<T: SpinExpectation + ?Sized>(state: &T) -> Result<f64> {
    let (var_perp, length) = orthogonal_variance(state)?;
    Ok((2.0 * state.spin().s()).sqrt() * var_perp.sqrt() / length)
}

/// Mean spin reduced by spontaneous-emission decoherence, `<S_x> e^{-C_spon^2}`.
pub fn mean_spin_with_decay(bare_mean_sx: f64, c_spon: f64) -> f64 {
    bare_mean_sx * (-c_spon * c_spon).exp()
}
