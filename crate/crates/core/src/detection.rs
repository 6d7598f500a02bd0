//! Photon counting on the scattered field and the conditional atomic state it
//! leaves behind.
//!
//! A perfect detector (`mu = 1`) projects the field onto `|n_m>` and leaves
//! the atoms in a pure state with amplitudes `a_M alpha_M^{n_m}
//! e^{-|alpha_M|^2/2}`. An inefficient detector leaves undetected photons in
//! the field; tracing them out gives a mixed atomic state
//!
//! ```text
//! rho_MN ∝ a_M a_N^* alpha_M^n alpha_N^{*n} e^{(1-mu) alpha_N^* alpha_M}
//!          e^{-(|alpha_M|^2 + |alpha_N|^2)/2}
//! ```
//!
//! The map is linear in the prior density matrix, so mixed priors (later
//! pulses of an inefficient-detection trajectory) are handled by applying it
//! element-wise to `rho`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::ln_factorial;
use crate::pulse_scattering::{
    apply_pulse, default_n_max, poisson_mixture, JointState, PhotonDistribution, PulseStrength,
};
use crate::spin_basis::{squeezing_parameter, DickeState, SpinExpectation, SpinQuantum};

/// Conditioning events less likely than this are declared impossible.
pub const PROBABILITY_FLOOR: f64 = 1e-300;

/// Tolerance used when validating Hermiticity and trace of density matrices.
pub const DENSITY_TOLERANCE: f64 = 1e-10;

/// Largest Poisson mean sampled by sequential-search inversion.
pub const INVERSION_MAX_MEAN: f64 = 30.0;

/// A photon-count record: `n_m` clicks with detector efficiency `mu`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionOutcome {
    n_m: u64,
    mu: f64,
}

impl DetectionOutcome {
    pub fn new(n_m: u64, mu: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&mu) {
            return Err(Error::domain(format!(
                "detection efficiency mu = {mu} not in [0, 1]"
            )));
        }
        Ok(Self { n_m, mu })
    }

    pub fn perfect(n_m: u64) -> Self {
        Self { n_m, mu: 1.0 }
    }

    pub fn n_m(self) -> u64 {
        self.n_m
    }

    pub fn mu(self) -> f64 {
        self.mu
    }
}

/// `mu = 1 - e^{-lambda T_d}` for attenuation rate `lambda` over window `T_d`.
pub fn efficiency_from_attenuation(rate: f64, window: f64) -> f64 {
    -(-rate * window).exp_m1()
}

/// Collective atomic density matrix in the Dicke basis.
#[derive(Clone, Debug, PartialEq)]
pub struct AtomicDensityMatrix {
    spin: SpinQuantum,
    rho: DMatrix<Complex64>,
}

impl AtomicDensityMatrix {
    pub fn from_pure(state: &DickeState) -> Self {
        let a = state.amplitudes();
        let dim = a.len();
        Self {
            spin: state.spin(),
            rho: DMatrix::from_fn(dim, dim, |i, j| a[i] * a[j].conj()),
        }
    }

    /// Wraps a Hermitian matrix, normalizing its trace to one.
    pub fn from_matrix(spin: SpinQuantum, rho: DMatrix<Complex64>) -> Result<Self> {
        if rho.nrows() != spin.dim() || rho.ncols() != spin.dim() {
            return Err(Error::domain(format!(
                "density matrix must be {0}x{0}, got {1}x{2}",
                spin.dim(),
                rho.nrows(),
                rho.ncols()
            )));
        }
        let trace: f64 = (0..spin.dim()).map(|i| rho[(i, i)].re).sum();
        if !(trace > 0.0) || !trace.is_finite() {
            return Err(Error::Contract(format!(
                "density matrix trace {trace} is not positive"
            )));
        }
        let matrix = Self {
            spin,
            rho: rho / Complex64::new(trace, 0.0),
        };
        let defect = matrix.hermiticity_defect();
        if defect > DENSITY_TOLERANCE {
            return Err(Error::Contract(format!(
                "matrix is not Hermitian (defect {defect:e})"
            )));
        }
        Ok(matrix)
    }

    pub fn spin(&self) -> SpinQuantum {
        self.spin
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.rho
    }

    /// `rho[M, N]` for lattice values `M`, `N`.
    pub fn element_at(&self, m: f64, n: f64) -> Option<Complex64> {
        Some(self.rho[(self.spin.index_of_m(m)?, self.spin.index_of_m(n)?)])
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.spin.dim()).map(|i| self.rho[(i, i)].re).collect()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let dim = self.spin.dim();
        let mut worst: f64 = 0.0;
        for i in 0..dim {
            for j in i..dim {
                worst = worst.max((self.rho[(i, j)] - self.rho[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let hermitian = (&self.rho + self.rho.adjoint()) * Complex64::new(0.5, 0.0);
        hermitian
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn purity(&self) -> f64 {
        (&self.rho * &self.rho).trace().re
    }

    /// Checks Hermiticity, unit trace and positivity.
    pub fn validate(&self) -> Result<()> {
        let defect = self.hermiticity_defect();
        if defect > DENSITY_TOLERANCE {
            return Err(Error::Contract(format!(
                "not Hermitian (defect {defect:e})"
            )));
        }
        let trace = self.trace();
        if (trace - 1.0).abs() > DENSITY_TOLERANCE {
            return Err(Error::Contract(format!("trace {trace} differs from 1")));
        }
        let min_eig = self.min_eigenvalue();
        if min_eig < -1e-9 {
            return Err(Error::Contract(format!("negative eigenvalue {min_eig:e}")));
        }
        Ok(())
    }
}

impl SpinExpectation for AtomicDensityMatrix {
    fn spin(&self) -> SpinQuantum {
        self.spin
    }

    fn element(&self, i: usize, offset: usize) -> Complex64 {
        self.rho[(i, i + offset)]
    }
}

/// `z^n / |z|^n`, exact for `z` on the real or imaginary axis.
fn unit_power(z: Complex64, n: u64) -> Complex64 {
    if n == 0 {
        return Complex64::new(1.0, 0.0);
    }
    let quarter = |k: u64| match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    };
    match (z.re == 0.0, z.im == 0.0) {
        (true, false) if z.im > 0.0 => quarter(n),
        (true, false) => quarter(3 * (n % 4)),
        (false, true) if z.re > 0.0 => quarter(0),
        (false, true) => quarter(2 * (n % 2)),
        _ => Complex64::from_polar(1.0, (n as f64) * z.arg()),
    }
}

/// `ln |alpha^n e^{-weight |alpha|^2 / 2}|`, `-inf` where the factor vanishes.
fn ln_count_factor(alpha: Complex64, n: u64, weight: f64) -> f64 {
    let r2 = alpha.norm_sqr();
    if r2 == 0.0 {
        return if n == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    0.5 * n as f64 * r2.ln() - 0.5 * weight * r2
}

/// `ln sum_k exp(x_k)` over finite entries, `-inf` for an empty sum.
fn ln_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Outcome probability `P(n) = sum_M |a_M|^2 Poisson(n; |alpha_M|^2)`.
pub fn outcome_probability(state: &JointState, n_m: u64) -> f64 {
    ln_outcome_probability(state, n_m).exp()
}

fn ln_outcome_probability(state: &JointState, n_m: u64) -> f64 {
    let terms = state
        .branches()
        .iter()
        .map(move |b| 2.0 * b.amplitude.norm().ln() + 2.0 * ln_count_factor(b.alpha, n_m, 1.0));
    ln_sum_exp(terms) - ln_factorial(n_m)
}

/// Probability of detecting no photon, `sum_M |a_M|^2 e^{-|alpha_M|^2}`.
pub fn null_probability(state: &JointState) -> f64 {
    state
        .branches()
        .iter()
        .map(|b| b.amplitude.norm_sqr() * (-b.alpha.norm_sqr()).exp())
        .sum()
}

/// Atomic state after a perfect detector registered `n_m` photons.
///
/// Amplitudes `∝ a_M alpha_M^{n_m} e^{-|alpha_M|^2/2}`, evaluated in log space.
/// The field is left in vacuum.
pub fn collapse_perfect(state: &JointState, n_m: u64) -> Result<DickeState> {
    let probability = outcome_probability(state, n_m);
    if !(probability > PROBABILITY_FLOOR) {
        return Err(Error::Conditioning { n_m, probability });
    }
    let ln_mod: Vec<f64> = state
        .branches()
        .iter()
        .map(|b| b.amplitude.norm().ln() + ln_count_factor(b.alpha, n_m, 1.0))
        .collect();
    let max = ln_mod.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let amplitudes = state
        .branches()
        .iter()
        .zip(&ln_mod)
        .map(|(b, &l)| {
            if l == f64::NEG_INFINITY {
                Complex64::new(0.0, 0.0)
            } else {
                let phase =
                    Complex64::from_polar(1.0, b.amplitude.arg()) * unit_power(b.alpha, n_m);
                phase * (l - max).exp()
            }
        })
        .collect();
    DickeState::from_amplitudes(state.spin(), amplitudes)
}

/// `exp[(1-mu)(alpha_N^* alpha_M - |alpha_M|^2/2 - |alpha_N|^2/2)]`, the overlap
/// of the undetected coherent remainders (modulus <= 1).
fn remainder_overlap(alpha_m: Complex64, alpha_n: Complex64, mu: f64) -> Complex64 {
    let exponent = alpha_n.conj() * alpha_m - 0.5 * (alpha_m.norm_sqr() + alpha_n.norm_sqr());
    ((1.0 - mu) * exponent).exp()
}

fn reweighted_matrix(
    spin: SpinQuantum,
    alphas: &[Complex64],
    ln_mod: &[f64],
    phases: &[Complex64],
    prior: impl Fn(usize, usize) -> Complex64,
    mu: f64,
) -> Result<AtomicDensityMatrix> {
    let max = ln_mod.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let u: Vec<Complex64> = ln_mod
        .iter()
        .zip(phases)
        .map(|(&l, &ph)| {
            if l == f64::NEG_INFINITY {
                Complex64::new(0.0, 0.0)
            } else {
                ph * (l - max).exp()
            }
        })
        .collect();
    let dim = spin.dim();
    let rho = DMatrix::from_fn(dim, dim, |i, j| {
        if u[i] == Complex64::new(0.0, 0.0) || u[j] == Complex64::new(0.0, 0.0) {
            return Complex64::new(0.0, 0.0);
        }
        prior(i, j) * u[i] * u[j].conj() * remainder_overlap(alphas[i], alphas[j], mu)
    });
    AtomicDensityMatrix::from_matrix(spin, rho)
}

/// Mixed atomic state after an efficiency-`mu` detector registered `n_m`
/// photons from a pure joint state.
pub fn collapse_imperfect(
    state: &JointState,
    outcome: DetectionOutcome,
) -> Result<AtomicDensityMatrix> {
    let (n_m, mu) = (outcome.n_m(), outcome.mu());
    let branches = state.branches();
    // ln of the normalization sum_X |a_X|^2 |alpha_X|^{2n} e^{-mu |alpha_X|^2}
    let ln_mod: Vec<f64> = branches
        .iter()
        .map(|b| b.amplitude.norm().ln() + ln_count_factor(b.alpha, n_m, mu))
        .collect();
    let ln_denominator = ln_sum_exp(ln_mod.iter().map(|l| 2.0 * l));
    let denominator = ln_denominator.exp();
    if !(denominator > PROBABILITY_FLOOR) {
        return Err(Error::Conditioning {
            n_m,
            probability: denominator,
        });
    }
    let phases: Vec<Complex64> = branches
        .iter()
        .map(|b| Complex64::from_polar(1.0, b.amplitude.arg()) * unit_power(b.alpha, n_m))
        .collect();
    let alphas: Vec<Complex64> = branches.iter().map(|b| b.alpha).collect();
    reweighted_matrix(
        state.spin(),
        &alphas,
        &ln_mod,
        &phases,
        |_, _| Complex64::new(1.0, 0.0),
        mu,
    )
}

/// Field amplitudes `alpha_M = -iCM` for a pulse on spin `S`.
pub fn pulse_alphas(spin: SpinQuantum, c: PulseStrength) -> Vec<Complex64> {
    spin.m_values()
        .map(|m| Complex64::new(0.0, -c.value() * m))
        .collect()
}

/// Applies a pulse of strength `c` to a mixed prior and conditions on `outcome`.
pub fn collapse_mixed(
    prior: &AtomicDensityMatrix,
    c: PulseStrength,
    outcome: DetectionOutcome,
) -> Result<AtomicDensityMatrix> {
    let (n_m, mu) = (outcome.n_m(), outcome.mu());
    let spin = prior.spin();
    let alphas = pulse_alphas(spin, c);
    let populations = prior.populations();
    // scale by sqrt(rho_MM) so the largest diagonal term of the result is O(1)
    let ln_mod: Vec<f64> = alphas
        .iter()
        .zip(&populations)
        .map(|(&a, &p)| {
            if p <= 0.0 {
                f64::NEG_INFINITY
            } else {
                0.5 * p.ln() + ln_count_factor(a, n_m, mu)
            }
        })
        .collect();
    let ln_denominator = ln_sum_exp(ln_mod.iter().map(|l| 2.0 * l));
    if !(ln_denominator.exp() > PROBABILITY_FLOOR) {
        return Err(Error::Conditioning {
            n_m,
            probability: ln_denominator.exp(),
        });
    }
    let phases: Vec<Complex64> = alphas.iter().map(|&a| unit_power(a, n_m)).collect();
    let rho = prior.matrix();
    let inv_sqrt: Vec<f64> = populations
        .iter()
        .map(|&p| if p > 0.0 { 1.0 / p.sqrt() } else { 0.0 })
        .collect();
    reweighted_matrix(
        spin,
        &alphas,
        &ln_mod,
        &phases,
        |i, j| rho[(i, j)] * inv_sqrt[i] * inv_sqrt[j],
        mu,
    )
}

/// `Tr(rho S_z^2) - Tr(rho S_z)^2`.
pub fn variance_sz_from_rho(rho: &AtomicDensityMatrix) -> f64 {
    let spin = rho.spin();
    let (mut first, mut second) = (0.0, 0.0);
    for (i, p) in rho.populations().into_iter().enumerate() {
        let m = spin.m(i);
        first += m * p;
        second += m * m * p;
    }
    (second - first * first).max(0.0)
}

/// Poisson draw: sequential-search inversion for small means, transformed
/// rejection (`rand_distr`) above [`INVERSION_MAX_MEAN`].
pub fn sample_poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    if mean <= INVERSION_MAX_MEAN {
        let u: f64 = rng.random();
        let mut k = 0u64;
        let mut p = (-mean).exp();
        let mut cdf = p;
        let cap = (mean + 40.0 * mean.sqrt() + 100.0) as u64;
        while u > cdf && k < cap {
            k += 1;
            p *= mean / k as f64;
            cdf += p;
        }
        k
    } else {
        let law = Poisson::new(mean).expect("finite positive Poisson mean");
        law.sample(rng) as u64
    }
}

/// Draws an index with probability proportional to `weights`.
fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last_positive = i;
            acc += w;
            if target < acc {
                return i;
            }
        }
    }
    last_positive
}

/// Born-rule sample of the photon count: `M ~ |a_M|^2`, then
/// `n ~ Poisson(|alpha_M|^2)`.
pub fn sample_outcome<R: Rng + ?Sized>(state: &JointState, rng: &mut R) -> u64 {
    let branch = sample_index(&state.weights(), rng);
    sample_poisson(state.branches()[branch].alpha.norm_sqr(), rng)
}

/// `count` independent outcomes from a generator seeded with `seed`.
pub fn sample_outcomes(state: &JointState, count: usize, seed: u64) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| sample_outcome(state, &mut rng))
        .collect()
}

/// Draw of the detected count for efficiency `mu`: `M ~ populations`, then
/// `n ~ Poisson(mu |alpha_M|^2)`.
fn sample_detected<R: Rng + ?Sized>(
    populations: &[f64],
    alphas: &[Complex64],
    mu: f64,
    rng: &mut R,
) -> u64 {
    let branch = sample_index(populations, rng);
    sample_poisson(mu * alphas[branch].norm_sqr(), rng)
}

/// One pulse of a sequential-measurement run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSpec {
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(default = "perfect_efficiency")]
    pub mu: f64,
    /// Forces the detected count instead of sampling it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub force_n: Option<u64>,
}

fn perfect_efficiency() -> f64 {
    1.0
}

impl PulseSpec {
    pub fn new(c: f64, mu: f64) -> Self {
        Self {
            c,
            mu,
            force_n: None,
        }
    }

    pub fn forced(c: f64, mu: f64, n_m: u64) -> Self {
        Self {
            c,
            mu,
            force_n: Some(n_m),
        }
    }
}

/// Post-measurement summary of one pulse.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseRecord {
    pub pulse_index: usize,
    pub c: f64,
    pub mu: f64,
    pub n_m: u64,
    pub post_var_sz: f64,
    /// `None` when the mean spin is below the singular floor.
    pub post_xi: Option<f64>,
}

/// Seeded record of a sequential-measurement run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub pulses: Vec<PulseRecord>,
}

/// Wire format of one JSONL line.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonlLine {
    seed: u64,
    pulse_index: usize,
    #[serde(rename = "C")]
    c: f64,
    mu: f64,
    n_m: u64,
    #[serde(rename = "post_var_Sz")]
    post_var_sz: f64,
    post_xi: Option<f64>,
}

impl TrajectoryRecord {
    /// One JSON object per pulse, newline-terminated, fixed field order
    /// `seed, pulse_index, C, mu, n_m, post_var_Sz, post_xi`.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for p in &self.pulses {
            let line = JsonlLine {
                seed: self.seed,
                pulse_index: p.pulse_index,
                c: p.c,
                mu: p.mu,
                n_m: p.n_m,
                post_var_sz: p.post_var_sz,
                post_xi: p.post_xi,
            };
            out.push_str(&serde_json::to_string(&line).expect("plain struct serializes"));
            out.push('\n');
        }
        out
    }

    /// Parses [`to_jsonl`](Self::to_jsonl) output. An empty document has no seed
    /// to recover, so `default_seed` is used.
    pub fn from_jsonl(text: &str, default_seed: u64) -> Result<Self> {
        let mut seed = default_seed;
        let mut pulses = Vec::new();
        for (k, line) in text.lines().filter(|l| !l.trim().is_empty()).enumerate() {
            let parsed: JsonlLine = serde_json::from_str(line)
                .map_err(|e| Error::config(format!("line {}", k + 1), e.to_string()))?;
            seed = parsed.seed;
            pulses.push(PulseRecord {
                pulse_index: parsed.pulse_index,
                c: parsed.c,
                mu: parsed.mu,
                n_m: parsed.n_m,
                post_var_sz: parsed.post_var_sz,
                post_xi: parsed.post_xi,
            });
        }
        Ok(Self { seed, pulses })
    }
}

/// The atomic state carried between pulses.
#[derive(Clone, Debug, PartialEq)]
pub enum ConditionalState {
    Pure(DickeState),
    Mixed(AtomicDensityMatrix),
}

impl ConditionalState {
    pub fn spin(&self) -> SpinQuantum {
        match self {
            Self::Pure(s) => s.spin(),
            Self::Mixed(r) => r.spin(),
        }
    }

    pub fn populations(&self) -> Vec<f64> {
        match self {
            Self::Pure(s) => s.populations(),
            Self::Mixed(r) => r.populations(),
        }
    }

    pub fn density_matrix(&self) -> AtomicDensityMatrix {
        match self {
            Self::Pure(s) => AtomicDensityMatrix::from_pure(s),
            Self::Mixed(r) => r.clone(),
        }
    }

    pub fn var_sz(&self) -> f64 {
        let spin = self.spin();
        let (mut first, mut second) = (0.0, 0.0);
        for (i, p) in self.populations().into_iter().enumerate() {
            let m = spin.m(i);
            first += m * p;
            second += m * m * p;
        }
        (second - first * first).max(0.0)
    }

    /// Squeezing parameter, `None` when the mean spin vanishes.
    pub fn xi(&self) -> Result<Option<f64>> {
        let xi = match self {
            Self::Pure(s) => squeezing_parameter(s),
            Self::Mixed(r) => squeezing_parameter(r),
        };
        match xi {
            Ok(v) => Ok(Some(v)),
            Err(Error::Singular(_)) => Ok(None),
            Err(e) => Err(e),
        }
    }
}

/// Sequential-pulse run with a private, explicitly seeded generator.
#[derive(Clone, Debug)]
pub struct Trajectory {
    seed: u64,
    rng: ChaCha8Rng,
    state: ConditionalState,
    pulses: Vec<PulseRecord>,
}

impl Trajectory {
    pub fn new(initial: DickeState, seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            state: ConditionalState::Pure(initial),
            pulses: Vec::new(),
        }
    }

    pub fn state(&self) -> &ConditionalState {
        &self.state
    }

    /// Law of the detected count for the next pulse, before it is measured.
    pub fn detected_distribution(
        &self,
        c: PulseStrength,
        mu: f64,
        n_max: Option<usize>,
    ) -> PhotonDistribution {
        let spin = self.state.spin();
        let n_max = n_max.unwrap_or_else(|| default_n_max(spin, c.value()));
        let means: Vec<f64> = pulse_alphas(spin, c)
            .iter()
            .map(|a| mu * a.norm_sqr())
            .collect();
        poisson_mixture(&self.state.populations(), &means, n_max)
    }

    /// Sends one pulse, samples (or forces) its outcome and collapses.
    pub fn step(&mut self, pulse: &PulseSpec) -> Result<PulseRecord> {
        let c = PulseStrength::new(pulse.c)?;
        let mu = pulse.mu;
        DetectionOutcome::new(0, mu)?;

        let next = match &self.state {
            ConditionalState::Pure(psi) if mu == 1.0 => {
                let joint = apply_pulse(psi, c);
                let n_m = match pulse.force_n {
                    Some(n) => n,
                    None => sample_outcome(&joint, &mut self.rng),
                };
                (n_m, ConditionalState::Pure(collapse_perfect(&joint, n_m)?))
            }
            ConditionalState::Pure(psi) => {
                let joint = apply_pulse(psi, c);
                let n_m = match pulse.force_n {
                    Some(n) => n,
                    None => {
                        let alphas: Vec<Complex64> =
                            joint.branches().iter().map(|b| b.alpha).collect();
                        sample_detected(&joint.weights(), &alphas, mu, &mut self.rng)
                    }
                };
                let outcome = DetectionOutcome::new(n_m, mu)?;
                (
                    n_m,
                    ConditionalState::Mixed(collapse_imperfect(&joint, outcome)?),
                )
            }
            ConditionalState::Mixed(rho) => {
                let n_m = match pulse.force_n {
                    Some(n) => n,
                    None => sample_detected(
                        &rho.populations(),
                        &pulse_alphas(rho.spin(), c),
                        mu,
                        &mut self.rng,
                    ),
                };
                let outcome = DetectionOutcome::new(n_m, mu)?;
                (
                    n_m,
                    ConditionalState::Mixed(collapse_mixed(rho, c, outcome)?),
                )
            }
        };
        let (n_m, state) = next;
        self.state = state;
        let record = PulseRecord {
            pulse_index: self.pulses.len(),
            c: c.value(),
            mu,
            n_m,
            post_var_sz: self.state.var_sz(),
            post_xi: self.state.xi()?,
        };
        self.pulses.push(record);
        Ok(record)
    }

    pub fn record(&self) -> TrajectoryRecord {
        TrajectoryRecord {
            seed: self.seed,
            pulses: self.pulses.clone(),
        }
    }

    pub fn into_parts(self) -> (TrajectoryRecord, ConditionalState) {
        (
            TrajectoryRecord {
                seed: self.seed,
                pulses: self.pulses,
            },
            self.state,
        )
    }
}

/// Runs `pulses` in order from `initial` with generator seed `seed`.
pub fn run_trajectory(
    initial: &DickeState,
    pulses: &[PulseSpec],
    seed: u64,
) -> Result<TrajectoryRecord> {
    let mut trajectory = Trajectory::new(initial.clone(), seed);
    for pulse in pulses {
        trajectory.step(pulse)?;
    }
    Ok(trajectory.record())
}
