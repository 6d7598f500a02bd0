//! Laboratory parameters and the dimensionless quantities they imply.
//!
//! ```text
//! C_spon^2 = gamma ∫|chi|^2 dt / Delta^2
//! C^2      = 3/(16 pi^2) (lambda^2/A) C_spon^2
//! d_res    = n_a lambda^2 L
//! eta      = (d_res/N_a) (gamma/Delta)^2 N_ph      (photon losses per atom)
//! C_bound  = sqrt(d_res/N_a)
//! ```
//!
//! When `N_a = n_a A L` these combine into `C_spon^2 = (16 pi^2/3) C^2 N_a/d_res`
//! and `C = sqrt(eta) C_bound`, provided the Rabi integral and photon number
//! describe the same pulse: `∫|chi|^2 dt = (16 pi^2/3) gamma (lambda^2/A) N_ph`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::detection::{collapse_imperfect, DetectionOutcome};
use crate::error::{Error, Result};
use crate::numerics::brent_minimize;
use crate::pulse_scattering::{apply_pulse, PulseStrength};
use crate::spin_basis::{initial_coherent_spin_state, squeezing_parameter};

/// `16 pi^2 / 3`, the constant in `C_spon^2 = K C^2 N_a / d_res`.
pub const SPON_STRENGTH_CONSTANT: f64 = 16.0 * PI * PI / 3.0;

/// Relative tolerance for the numerical check of the decay optimum.
pub const OPTIMUM_TOLERANCE: f64 = 1e-6;

/// Laboratory parameters, SI units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalConfig {
    /// Excited-state decay rate (1/s).
    pub gamma: f64,
    /// Detuning (1/s).
    pub delta: f64,
    /// Carrier wavelength (m).
    pub wavelength: f64,
    /// Beam cross-section (m^2).
    pub area: f64,
    /// Medium length (m).
    pub length: f64,
    /// Atomic density (1/m^3).
    pub density: f64,
    /// Atom count; `density * area * length` when absent.
    #[serde(rename = "N_a", default, skip_serializing_if = "Option::is_none")]
    pub n_atoms: Option<f64>,
    /// Time integral of the squared Rabi frequency (1/s).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi_sq_integral: Option<f64>,
    /// Incident photon number.
    #[serde(rename = "N_ph", default, skip_serializing_if = "Option::is_none")]
    pub n_photons: Option<f64>,
}

fn positive(field: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::config(
            field,
            format!("must be positive and finite, got {value}"),
        ))
    }
}

fn non_negative(field: &str, value: f64) -> Result<()> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::config(
            field,
            format!("must be non-negative and finite, got {value}"),
        ))
    }
}

impl PhysicalConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| {
            let message = e.to_string();
            let field = message
                .split('`')
                .nth(1)
                .map(str::to_owned)
                .unwrap_or_else(|| "<document>".into());
            Error::config(field, message)
        })?;
        config.validate()?;
        Ok(config)
    }

    /// Rejects non-physical values. Advisory conditions are reported by
    /// [`derive`] as warnings instead.
    pub fn validate(&self) -> Result<()> {
        positive("gamma", self.gamma)?;
        if self.delta == 0.0 || !self.delta.is_finite() {
            return Err(Error::config(
                "delta",
                format!("must be nonzero and finite, got {}", self.delta),
            ));
        }
        positive("wavelength", self.wavelength)?;
        positive("area", self.area)?;
        positive("length", self.length)?;
        positive("density", self.density)?;
        if let Some(n) = self.n_atoms {
            positive("N_a", n)?;
        }
        match (self.chi_sq_integral, self.n_photons) {
            (None, None) => Err(Error::config(
                "chi_sq_integral",
                "one of chi_sq_integral or N_ph is required",
            )),
            (chi, n_ph) => {
                if let Some(v) = chi {
                    non_negative("chi_sq_integral", v)?;
                }
                if let Some(v) = n_ph {
                    non_negative("N_ph", v)?;
                }
                Ok(())
            }
        }
    }

    /// `N_a`, falling back to `n_a A L`.
    pub fn atom_count(&self) -> f64 {
        self.n_atoms
            .unwrap_or(self.density * self.area * self.length)
    }

    /// `lambda^2 / A`.
    pub fn wavelength_area_ratio(&self) -> f64 {
        self.wavelength * self.wavelength / self.area
    }

    pub fn fresnel_number(&self) -> f64 {
        self.area / (self.wavelength * self.length)
    }

    /// The Rabi integral, derived from `N_ph` when not given.
    pub fn rabi_integral(&self) -> f64 {
        self.chi_sq_integral.unwrap_or_else(|| {
            SPON_STRENGTH_CONSTANT
                * self.gamma
                * self.wavelength_area_ratio()
                * self.n_photons.unwrap_or(0.0)
        })
    }

    /// The photon number, derived from the Rabi integral when not given.
    pub fn photon_number(&self) -> f64 {
        self.n_photons.unwrap_or_else(|| {
            self.chi_sq_integral.unwrap_or(0.0)
                / (SPON_STRENGTH_CONSTANT * self.gamma * self.wavelength_area_ratio())
        })
    }
}

/// Dimensionless parameters of a configuration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivedStrengths {
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "C_spon")]
    pub c_spon: f64,
    pub d_res: f64,
    pub eta: f64,
    #[serde(rename = "C_bound")]
    pub c_bound: f64,
    /// `C` from the photon-number form, for cross-checking.
    #[serde(rename = "C_photon")]
    pub c_photon: f64,
}

/// `C_spon = sqrt(gamma ∫|chi|^2 dt) / |Delta|`.
pub fn c_spon(config: &PhysicalConfig) -> f64 {
    (config.gamma * config.rabi_integral()).sqrt() / config.delta.abs()
}

/// `C = [3/(16 pi^2) (lambda^2/A)]^{1/2} C_spon`.
pub fn measurement_strength(config: &PhysicalConfig) -> f64 {
    (config.wavelength_area_ratio() / SPON_STRENGTH_CONSTANT).sqrt() * c_spon(config)
}

/// `C = (gamma/|Delta|) (d_res/N_a) sqrt(N_ph)`.
pub fn photon_form_strength(config: &PhysicalConfig) -> f64 {
    let (d_res, _, _) = optical_depths(config);
    config.gamma / config.delta.abs() * d_res / config.atom_count() * config.photon_number().sqrt()
}

/// `(d_res, eta, C_bound)`.
pub fn optical_depths(config: &PhysicalConfig) -> (f64, f64, f64) {
    let d_res = config.density * config.wavelength * config.wavelength * config.length;
    let per_atom = d_res / config.atom_count();
    let ratio = config.gamma / config.delta;
    (
        d_res,
        per_atom * ratio * ratio * config.photon_number(),
        per_atom.sqrt(),
    )
}

/// All derived strengths plus advisory warnings.
pub fn derive(config: &PhysicalConfig) -> Result<(DerivedStrengths, Vec<String>)> {
    config.validate()?;
    let (d_res, eta, c_bound) = optical_depths(config);
    let strengths = DerivedStrengths {
        c: measurement_strength(config),
        c_spon: c_spon(config),
        d_res,
        eta,
        c_bound,
        c_photon: photon_form_strength(config),
    };
    let mut warnings = Vec::new();
    let detuning_ratio = config.delta.abs() / config.gamma;
    if detuning_ratio < 10.0 {
        warnings.push(format!(
            "|delta|/gamma = {detuning_ratio:.3} is below 10; far-detuned model may not apply"
        ));
    }
    let fresnel = config.fresnel_number();
    if !(0.1 * (1.0 - 1e-9)..=10.0 * (1.0 + 1e-9)).contains(&fresnel) {
        warnings.push(format!("Fresnel number {fresnel:.3e} outside [0.1, 10]"));
    }
    if let Some(n) = config.n_atoms {
        let geometric = config.density * config.area * config.length;
        if (n - geometric).abs() > 0.01 * geometric {
            warnings.push(format!(
                "N_a = {n:e} differs from density*area*length = {geometric:e} by more than 1%"
            ));
        }
    }
    if let (Some(chi), Some(_)) = (config.chi_sq_integral, config.n_photons) {
        let implied = SPON_STRENGTH_CONSTANT
            * config.gamma
            * config.wavelength_area_ratio()
            * config.photon_number();
        if (chi - implied).abs() > 1e-6 * chi.abs().max(implied.abs()) {
            warnings.push(format!(
                "chi_sq_integral = {chi:e} and N_ph imply different pulses (N_ph implies {implied:e})"
            ));
        }
    }
    if eta >= 1.0 {
        warnings.push(format!("photon loss per atom exceeds 1 (eta = {eta:.4})"));
    }
    if strengths.c > c_bound {
        warnings.push(format!(
            "C = {:.4e} exceeds the bound sqrt(d_res/N_a) = {c_bound:.4e}",
            strengths.c
        ));
    }
    let (a, b) = (strengths.c, strengths.c_photon);
    if a > 0.0 && b > 0.0 && (a / b > 2.0 || b / a > 2.0) {
        warnings.push(format!(
            "C = {a:.4e} and photon-number form {b:.4e} differ by more than a factor of 2"
        ));
    }
    Ok((strengths, warnings))
}

/// `C_spon^2 / (C^2 N_a / d_res)`; equals [`SPON_STRENGTH_CONSTANT`] when
/// `N_a = n_a A L`.
pub fn spon_identity_ratio(config: &PhysicalConfig) -> f64 {
    let (d_res, _, _) = optical_depths(config);
    let c = measurement_strength(config);
    c_spon(config).powi(2) / (c * c * config.atom_count() / d_res)
}

/// `2 p^2 Omega / (hbar Delta c eps_0 A)` with `Omega = 2 pi c / lambda`, given
/// `p^2/(hbar eps_0)` as a single constant. Reduces to `4 pi D / (lambda Delta A)`.
pub fn faraday_prefactor(config: &PhysicalConfig, dipole_sq_over_hbar_eps0: f64) -> f64 {
    4.0 * PI * dipole_sq_over_hbar_eps0 / (config.wavelength * config.delta * config.area)
}

/// Rotation angle `phi = prefactor * <S_z>`.
pub fn faraday_angle(config: &PhysicalConfig, dipole_sq_over_hbar_eps0: f64, mean_sz: f64) -> f64 {
    faraday_prefactor(config, dipole_sq_over_hbar_eps0) * mean_sz
}

/// Squeezing after a null count with spontaneous decay of the mean spin,
/// `xi = 1 / (sqrt(S) C e^{-C^2 N_a/d_res})`.
pub fn squeezing_with_decay(c: f64, n_atoms: f64, d_res: f64) -> Result<f64> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::domain(format!("strength C = {c} must be positive")));
    }
    positive_domain("N_a", n_atoms)?;
    positive_domain("d_res", d_res)?;
    let s = n_atoms / 2.0;
    Ok(1.0 / (s.sqrt() * c * (-c * c * n_atoms / d_res).exp()))
}

fn positive_domain(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} = {value} must be positive")))
    }
}

/// Warning when `C sqrt(S)` is too small for the Gaussian null-width picture.
pub fn decay_regime_warning(c: f64, n_atoms: f64) -> Option<String> {
    let product = c * (n_atoms / 2.0).sqrt();
    (product < 3.0)
        .then(|| format!("C sqrt(S) = {product:.3} is not large; decay formula is asymptotic"))
}

/// Closed-form optimum of [`squeezing_with_decay`] and its numerical check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayOptimum {
    #[serde(rename = "C_opt")]
    pub c_opt: f64,
    pub xi_min: f64,
    #[serde(rename = "C_numeric")]
    pub c_numeric: f64,
    pub xi_numeric: f64,
}

/// `C_opt = sqrt(d_res/(2 N_a))`, `xi_min = 2 sqrt(e)/sqrt(d_res)`, verified by
/// minimizing [`squeezing_with_decay`] over `(0, 10 C_opt]`.
pub fn optimal_strength(n_atoms: f64, d_res: f64) -> Result<DecayOptimum> {
    positive_domain("d_res", d_res)?;
    if !(n_atoms >= 1.0) || !n_atoms.is_finite() {
        return Err(Error::domain(format!("N_a = {n_atoms} must be at least 1")));
    }
    let c_opt = (d_res / (2.0 * n_atoms)).sqrt();
    let xi_min = 2.0 * 0.5f64.exp() / d_res.sqrt();
    // ln xi is smooth and well scaled near the minimum
    let ln_xi = |c: f64| -0.5 * (n_atoms / 2.0).ln() - c.ln() + c * c * n_atoms / d_res;
    let found = brent_minimize(ln_xi, 1e-3 * c_opt, 10.0 * c_opt, 1e-12, 500);
    let relative = (found.x - c_opt).abs() / c_opt;
    if relative > OPTIMUM_TOLERANCE {
        return Err(Error::Consistency(format!(
            "numerical optimum C = {} differs from closed form {c_opt} by {relative:e}",
            found.x
        )));
    }
    let xi_numeric = squeezing_with_decay(found.x, n_atoms, d_res)?;
    let xi_closed = squeezing_with_decay(c_opt, n_atoms, d_res)?;
    if (xi_closed - xi_min).abs() > 1e-9 * xi_min {
        return Err(Error::Consistency(format!(
            "xi(C_opt) = {xi_closed} differs from xi_min = {xi_min}"
        )));
    }
    Ok(DecayOptimum {
        c_opt,
        xi_min,
        c_numeric: found.x,
        xi_numeric,
    })
}

/// Estimated optimal strength `1/sqrt(1 - mu)` under inefficient detection;
/// infinite at `mu = 1`.
pub fn inefficiency_optimum(mu: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&mu) {
        return Err(Error::domain(format!("efficiency mu = {mu} not in [0, 1]")));
    }
    Ok(if mu == 1.0 {
        f64::INFINITY
    } else {
        1.0 / (1.0 - mu).sqrt()
    })
}

/// `xi` of the state left by a null count (`n_m = 0`) at efficiency `mu`.
pub fn null_xi_with_inefficiency(n_atoms: u32, c: f64, mu: f64) -> Result<f64> {
    let psi = initial_coherent_spin_state(n_atoms)?;
    let joint = apply_pulse(&psi, PulseStrength::new(c)?);
    let rho = collapse_imperfect(&joint, DetectionOutcome::new(0, mu)?)?;
    squeezing_parameter(&rho)
}

/// Grid point with the smallest value; `None` on an empty grid.
pub fn grid_argmin(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    points
        .iter()
        .copied()
        .filter(|(_, v)| v.is_finite())
        .min_by(|a, b| a.1.total_cmp(&b.1))
}
