//! The probe-pulse interaction and the statistics of the scattered photons.
//!
//! A pulse of strength `C` maps `|S,M> (x) |0>` to `|S,M> (x) |alpha_M>` with
//! `alpha_M = -iCM`, so the joint atom-field state is stored exactly as one
//! (atomic amplitude, coherent amplitude) pair per `M`. The interaction is
//! diagonal in `S_z`, so branches never mix and no Fock truncation is needed.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{ln_poisson_pmf, plateau_local_maxima};
use crate::spin_basis::{spin_moments, DickeState, SpinQuantum};

/// Relative tolerance for merging the two equal tops of an integer-mean
/// Poisson peak into one plateau.
pub const PEAK_PLATEAU_TOLERANCE: f64 = 1e-6;

/// Dimensionless measurement strength `C >= 0`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct PulseStrength(f64);

impl PulseStrength {
    pub fn new(c: f64) -> Result<Self> {
        if !c.is_finite() || c < 0.0 {
            return Err(Error::domain(format!(
                "pulse strength C = {c} must be finite and >= 0"
            )));
        }
        Ok(Self(c))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for PulseStrength {
    type Error = Error;

    fn try_from(c: f64) -> Result<Self> {
        Self::new(c)
    }
}

impl From<PulseStrength> for f64 {
    fn from(c: PulseStrength) -> f64 {
        c.0
    }
}

/// One `M` component of the joint state: atomic amplitude times `|alpha>`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Branch {
    pub amplitude: Complex64,
    pub alpha: Complex64,
}

/// Atom-field state `sum_M a_M |S,M> (x) |alpha_M>_coh`.
#[derive(Clone, Debug, PartialEq)]
pub struct JointState {
    spin: SpinQuantum,
    branches: Vec<Branch>,
}

impl JointState {
    pub fn spin(&self) -> SpinQuantum {
        self.spin
    }

    /// Branches indexed like the Dicke basis (`i = M + S`).
    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    /// Reduced atomic populations `|a_M|^2`.
    pub fn weights(&self) -> Vec<f64> {
        self.branches
            .iter()
            .map(|b| b.amplitude.norm_sqr())
            .collect()
    }

    /// Mean photon number `|alpha_M|^2` of each branch.
    pub fn photon_means(&self) -> Vec<f64> {
        self.branches.iter().map(|b| b.alpha.norm_sqr()).collect()
    }
}

/// Applies `U = exp[-iC (c^dag + c) S_z]`-type displacement per branch:
/// `a_M` unchanged, field `|0> -> |-iCM>`.
pub fn apply_pulse(state: &DickeState, c: PulseStrength) -> JointState {
    let spin = state.spin();
    let branches = state
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(i, &amplitude)| Branch {
            amplitude,
            alpha: Complex64::new(0.0, -c.value() * spin.m(i)),
        })
        .collect();
    JointState { spin, branches }
}

/// `ceil(C^2 S^2 + 10 C S + 20)`: at least ten standard deviations beyond the
/// largest branch mean.
pub fn default_n_max(spin: SpinQuantum, c: f64) -> usize {
    let cs = c * spin.s();
    (cs * cs + 10.0 * cs + 20.0).ceil() as usize
}

/// Tabulated photon-count law on `0..=n_max` plus the mass beyond it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhotonDistribution {
    probabilities: Vec<f64>,
    tail_mass: f64,
}

impl PhotonDistribution {
    /// Wraps a tabulated law; the tail mass is whatever the table misses.
    pub fn from_probabilities(probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(Error::domain(
                "photon distribution needs at least one entry",
            ));
        }
        if probabilities.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::domain(
                "probabilities must be finite and non-negative",
            ));
        }
        let total: f64 = probabilities.iter().sum();
        Ok(Self {
            probabilities,
            tail_mass: (1.0 - total).max(0.0),
        })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn n_max(&self) -> usize {
        self.probabilities.len() - 1
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn probability(&self, n: usize) -> f64 {
        self.probabilities.get(n).copied().unwrap_or(0.0)
    }

    /// Total probability on `lo..=hi`.
    pub fn mass_between(&self, lo: usize, hi: usize) -> f64 {
        self.probabilities.iter().take(hi + 1).skip(lo).sum()
    }
}

/// `P(n) = sum_k w_k Poisson(n; mean_k)` on `0..=n_max`.
///
/// Each term is evaluated in log space and exponentiated individually; per `n`
/// the terms are added from largest to smallest. Branches with equal means are
/// merged first.
pub fn poisson_mixture(weights: &[f64], means: &[f64], n_max: usize) -> PhotonDistribution {
    assert_eq!(weights.len(), means.len(), "one weight per branch mean");
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(weights.len());
    for (&w, &mean) in weights.iter().zip(means) {
        if w <= 0.0 {
            continue;
        }
        match merged.iter_mut().find(|(_, m)| *m == mean) {
            Some(entry) => entry.0 += w,
            None => merged.push((w, mean)),
        }
    }
    let ln_merged: Vec<(f64, f64)> = merged.iter().map(|&(w, m)| (w.ln(), m)).collect();

    // exp(x) underflows to exactly 0 below this
    const LN_UNDERFLOW: f64 = -745.2;
    let mut terms = Vec::with_capacity(ln_merged.len());
    let probabilities = (0..=n_max as u64)
        .map(|n| {
            terms.clear();
            for &(ln_w, mean) in &ln_merged {
                let ln_term = ln_w + ln_poisson_pmf(n, mean);
                if ln_term > LN_UNDERFLOW {
                    terms.push(ln_term.exp());
                }
            }
            terms.sort_by(|a, b| b.total_cmp(a));
            terms.iter().fold(0.0, |acc, t| acc + t)
        })
        .collect::<Vec<f64>>();
    let total: f64 = probabilities.iter().sum();
    PhotonDistribution {
        probabilities,
        tail_mass: (1.0 - total).max(0.0),
    }
}

/// Photon-number law of the field after tracing out the atoms,
/// `P_n = sum_M |a_M|^2 e^{-|alpha_M|^2} |alpha_M|^{2n} / n!`.
pub fn photon_distribution(state: &JointState, n_max: usize) -> PhotonDistribution {
    poisson_mixture(&state.weights(), &state.photon_means(), n_max)
}

/// Closed-form mean and standard deviation of the photon number for the
/// initial coherent spin state: `C^2 N_a / 4` and
/// `C^2 sqrt((N_a/4) ((N_a - 1)/2 + 1/C^2))`.
///
/// `C = 0` returns `(0, 0)` (the continuous limit).
pub fn photon_moments_closed_form(n_atoms: u32, c: f64) -> Result<(f64, f64)> {
    SpinQuantum::new(n_atoms)?;
    let c = PulseStrength::new(c)?.value();
    if c == 0.0 {
        return Ok((0.0, 0.0));
    }
    let na = n_atoms as f64;
    let c2 = c * c;
    let mean = c2 * na / 4.0;
    let std = c2 * ((na / 4.0) * ((na - 1.0) / 2.0 + 1.0 / c2)).sqrt();
    Ok((mean, std))
}

/// Tail mass above which numeric moments are refused.
pub const MOMENT_TAIL_LIMIT: f64 = 1e-8;

/// Mean and standard deviation of a tabulated distribution.
pub fn photon_moments_numeric(dist: &PhotonDistribution) -> Result<(f64, f64)> {
    if dist.tail_mass >= MOMENT_TAIL_LIMIT {
        return Err(Error::Truncation {
            what: "photon tail mass",
            value: dist.tail_mass,
            bound: MOMENT_TAIL_LIMIT,
        });
    }
    let mean: f64 = dist
        .probabilities
        .iter()
        .enumerate()
        .map(|(n, p)| n as f64 * p)
        .sum();
    let var: f64 = dist
        .probabilities
        .iter()
        .enumerate()
        .map(|(n, p)| (n as f64 - mean).powi(2) * p)
        .sum();
    Ok((mean, var.max(0.0).sqrt()))
}

/// Statistics of the Faraday rotation operator `phi = prefactor * S_z / S`
/// for the initial coherent spin state: `(0, prefactor / sqrt(N_a))`.
pub fn faraday_variance_operator(n_atoms: u32, prefactor: f64) -> Result<(f64, f64)> {
    SpinQuantum::new(n_atoms)?;
    if !(prefactor >= 0.0) {
        return Err(Error::domain(format!(
            "Faraday prefactor {prefactor} must be >= 0"
        )));
    }
    Ok((0.0, prefactor / (n_atoms as f64).sqrt()))
}

/// `(<phi>, Delta phi)` of `phi = prefactor * S_z / S` in an arbitrary state.
pub fn faraday_operator_statistics(state: &DickeState, prefactor: f64) -> Result<(f64, f64)> {
    let moments = spin_moments(state)?;
    let s = state.spin().s();
    Ok((
        prefactor * moments.mean_sz / s,
        prefactor * moments.var_sz.sqrt() / s,
    ))
}

/// One resolved peak of a photon-count distribution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhotonPeak {
    pub n: usize,
    pub probability: f64,
    /// Half-width where the peak falls to `e^{-1/2}` of its top (the standard
    /// deviation for a Gaussian-shaped peak).
    pub half_width_sigma: f64,
    /// Half-width where the peak falls to `1/e` of its top.
    pub half_width_1e: f64,
}

/// Distance from `top` to where `values` first drops to `level`, walking in
/// one direction. `None` if a rise or the table edge comes first.
fn crossing_distance(values: &[f64], top: usize, level: f64, rightward: bool) -> Option<f64> {
    let mut k = top;
    loop {
        let next = if rightward {
            if k + 1 >= values.len() {
                return None;
            }
            k + 1
        } else {
            if k == 0 {
                return None;
            }
            k - 1
        };
        let (here, there) = (values[k], values[next]);
        if there <= level {
            let frac = if here == there {
                0.0
            } else {
                (here - level) / (here - there)
            };
            return Some(k.abs_diff(top) as f64 + frac);
        }
        // a rise before the crossing means a neighbouring peak, but the
        // flat top of the peak itself is fine
        if there > here * (1.0 + PEAK_PLATEAU_TOLERANCE) {
            return None;
        }
        k = next;
    }
}

fn half_width(values: &[f64], top: usize, fraction: f64) -> f64 {
    let level = values[top] * fraction;
    match (
        crossing_distance(values, top, level, false),
        crossing_distance(values, top, level, true),
    ) {
        (Some(l), Some(r)) => 0.5 * (l + r),
        (Some(d), None) | (None, Some(d)) => d,
        (None, None) => f64::NAN,
    }
}

/// Plateau-aware local maxima of `P_n` with their half-widths.
pub fn photon_peaks(dist: &PhotonDistribution) -> Vec<PhotonPeak> {
    let p = &dist.probabilities;
    plateau_local_maxima(p, PEAK_PLATEAU_TOLERANCE)
        .into_iter()
        .map(|n| PhotonPeak {
            n,
            probability: p[n],
            half_width_sigma: half_width(p, n, (-0.5f64).exp()),
            half_width_1e: half_width(p, n, (-1.0f64).exp()),
        })
        .collect()
}
