//! Structure of collapsed atomic distributions: the two arms of the cat
//! produced by a nonzero count, their widths, the Gaussian width left by a null
//! count, and how much coherence between the arms survives lossy detection.

use serde::{Deserialize, Serialize};

use crate::detection::{AtomicDensityMatrix, PROBABILITY_FLOOR};
use crate::error::{Error, Result};
use crate::numerics::{bisect, plateau_local_maxima};
use crate::spin_basis::{DickeState, SpinQuantum};

/// Absolute tolerance of the width root search.
pub const WIDTH_TOLERANCE: f64 = 1e-10;
/// Iteration cap of the width root search.
pub const WIDTH_MAX_ITER: usize = 200;

/// Location and 1/e half-width of one cat arm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeakReport {
    #[serde(rename = "M_peak")]
    pub m_peak: f64,
    #[serde(rename = "M_width")]
    pub m_width: f64,
    pub distinguishable: bool,
}

fn check_strength(c: f64) -> Result<()> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::domain(format!("strength C = {c} must be positive")));
    }
    Ok(())
}

/// `M_m = sqrt(n_m)/C`, the continuous maximum of `(CM)^{2n_m} e^{-(CM)^2}`.
pub fn cat_peak_location(c: f64, n_m: u64) -> Result<f64> {
    check_strength(c)?;
    Ok((n_m as f64).sqrt() / c)
}

/// 1/e half-width `w` of an arm: the positive root of
/// `(1 + w/M_m)^{2n_m} = e^{C^2 (2 M_m w + w^2)} / e`.
pub fn cat_peak_width(c: f64, n_m: u64) -> Result<f64> {
    check_strength(c)?;
    if n_m == 0 {
        return Err(Error::domain("cat width needs n_m >= 1"));
    }
    let m_peak = cat_peak_location(c, n_m)?;
    let n = n_m as f64;
    let f = |w: f64| 2.0 * n * (w / m_peak).ln_1p() - c * c * (2.0 * m_peak * w + w * w) + 1.0;
    bisect(f, 0.0, m_peak, WIDTH_TOLERANCE, WIDTH_MAX_ITER)
}

pub fn peak_report(c: f64, n_m: u64) -> Result<PeakReport> {
    let m_peak = cat_peak_location(c, n_m)?;
    let m_width = if n_m == 0 {
        1.0 / c
    } else {
        cat_peak_width(c, n_m)?
    };
    Ok(PeakReport {
        m_peak,
        m_width,
        distinguishable: m_width < m_peak,
    })
}

/// Lattice point of `spin` closest to `m`, ties toward larger `|M|`.
pub fn nearest_lattice_m(spin: SpinQuantum, m: f64) -> f64 {
    let twice_s = spin.twice_s();
    // lattice values of 2M share the parity of 2S
    let x = 2.0 * m;
    let below = {
        let f = x.floor() as i64;
        if (f - twice_s).rem_euclid(2) == 0 {
            f
        } else {
            f - 1
        }
    };
    let above = below + 2;
    let (d_below, d_above) = (x - below as f64, above as f64 - x);
    let pick = if d_below < d_above {
        below
    } else if d_above < d_below {
        above
    } else if below.abs() > above.abs() {
        below
    } else {
        above
    };
    pick.clamp(-twice_s, twice_s) as f64 / 2.0
}

/// `M` values of the local maxima of a lattice distribution, ascending.
pub fn lattice_peaks(spin: SpinQuantum, populations: &[f64]) -> Vec<f64> {
    let mut peaks: Vec<f64> = plateau_local_maxima(populations, 1e-9)
        .into_iter()
        .map(|i| spin.m(i))
        .collect();
    // plateau ends point toward larger index; mirror that toward larger |M| on the negative side
    for m in peaks.iter_mut() {
        if *m < 0.0 {
            let i = spin.index_of_m(*m).expect("lattice value");
            let mut j = i;
            let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.max(b);
            while j > 0 && close(populations[j - 1], populations[i]) {
                j -= 1;
            }
            *m = spin.m(j);
        }
    }
    peaks
}

/// Half-width of a null-collapsed distribution: the smallest `|M|` where the
/// population falls to `1/e` of its `M = 0` value.
///
/// Between lattice points `ln P` is interpolated linearly in `M^2`, which is
/// exact for a Gaussian profile; a zero neighbour falls back to linear
/// interpolation in `P`.
pub fn null_width(state: &DickeState) -> Result<f64> {
    let spin = state.spin();
    let centre = spin
        .index_of_m(0.0)
        .ok_or_else(|| Error::Shape("half-integer spin has no M = 0 lattice point".into()))?;
    let p = state.populations();
    let p0 = p[centre];
    if !(p0 > 0.0) {
        return Err(Error::Shape("no population at M = 0".into()));
    }
    let slack = 1.0 + 1e-12;
    let descending_right = p[centre..].windows(2).all(|w| w[1] <= w[0] * slack);
    let descending_left = p[..=centre].windows(2).all(|w| w[0] <= w[1] * slack);
    if !descending_right || !descending_left {
        return Err(Error::Shape("distribution is not unimodal at M = 0".into()));
    }
    let threshold = p0 / std::f64::consts::E;
    let side = |step: isize| -> Option<f64> {
        let mut i = centre as isize;
        loop {
            let next = i + step;
            if next < 0 || next as usize >= p.len() {
                return None;
            }
            let (p1, p2) = (p[i as usize], p[next as usize]);
            if p2 <= threshold {
                let (m1, m2) = (spin.m(i as usize).abs(), spin.m(next as usize).abs());
                return Some(if p2 > 0.0 {
                    let t = (threshold.ln() - p1.ln()) / (p2.ln() - p1.ln());
                    (m1 * m1 + t * (m2 * m2 - m1 * m1)).sqrt()
                } else {
                    m1 + (p1 - threshold) / (p1 - p2) * (m2 - m1)
                });
            }
            i = next;
        }
    };
    match (side(1), side(-1)) {
        (Some(a), Some(b)) => Ok(a.min(b)),
        (Some(a), None) | (None, Some(a)) => Ok(a),
        (None, None) => Err(Error::Shape(
            "population never falls to 1/e of its peak".into(),
        )),
    }
}

/// `xi_x = sqrt(2S) M_m / S = sqrt(n_m / (S C^2))`.
pub fn cat_squeezing_xi_x(s: f64, c: f64, n_m: u64) -> Result<f64> {
    check_strength(c)?;
    if !(s > 0.0) {
        return Err(Error::domain(format!("spin S = {s} must be positive")));
    }
    Ok((n_m as f64 / (s * c * c)).sqrt())
}

/// Normalized arm coherence `|rho[M, -M]| / sqrt(rho[M, M] rho[-M, -M])`.
pub fn cat_coherence(rho: &AtomicDensityMatrix, m_arm: f64) -> Result<f64> {
    let spin = rho.spin();
    let (i, j) = match (spin.index_of_m(m_arm), spin.index_of_m(-m_arm)) {
        (Some(i), Some(j)) => (i, j),
        _ => {
            return Err(Error::domain(format!(
                "M = {m_arm} is not a lattice point of S = {}",
                spin.s()
            )))
        }
    };
    let m = rho.matrix();
    for (idx, arm) in [(i, m_arm), (j, -m_arm)] {
        let population = m[(idx, idx)].re;
        if !(population > PROBABILITY_FLOOR) {
            return Err(Error::DegenerateArm {
                m_arm: arm,
                population,
            });
        }
    }
    Ok(m[(i, j)].norm() / (m[(i, i)].re * m[(j, j)].re).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::{collapse_imperfect, collapse_perfect, DetectionOutcome};
    use crate::pulse_scattering::{apply_pulse, PulseStrength};
    use crate::spin_basis::initial_coherent_spin_state;

    #[test]
    fn peak_location_examples() {
        assert!((cat_peak_location(3.0, 30).unwrap() - 1.825_741_858).abs() < 1e-9);
        assert_eq!(cat_peak_location(3.0, 0).unwrap(), 0.0);
        assert_eq!(cat_peak_location(3.0, 36).unwrap(), 2.0);
        assert!(cat_peak_location(0.0, 3).is_err());
    }

    #[test]
    fn width_ratio_does_not_depend_on_strength() {
        for (n, ratio) in [(1, 0.7738), (5, 0.3313), (30, 0.1318)] {
            for c in [0.5, 1.0, 2.0, 3.0] {
                let r = cat_peak_width(c, n).unwrap() / cat_peak_location(c, n).unwrap();
                assert!((r - ratio).abs() < 1e-4, "n={n} C={c}: {r}");
            }
        }
        assert!(cat_peak_width(5.0, 1).unwrap() < 0.2);
        assert!(cat_peak_width(3.0, 0).is_err());
    }

    #[test]
    fn width_root_satisfies_equation() {
        let (c, n) = (2.0, 5u64);
        let (m, w) = (
            cat_peak_location(c, n).unwrap(),
            cat_peak_width(c, n).unwrap(),
        );
        let lhs = 2.0 * n as f64 * (1.0 + w / m).ln();
        let rhs = c * c * (2.0 * m * w + w * w) - 1.0;
        assert!((lhs - rhs).abs() < 1e-8);
    }

    #[test]
    fn nearest_lattice_rounding() {
        let integer = SpinQuantum::new(20).unwrap();
        assert_eq!(nearest_lattice_m(integer, 1.8257), 2.0);
        assert_eq!(nearest_lattice_m(integer, 1.5), 2.0);
        assert_eq!(nearest_lattice_m(integer, -1.5), -2.0);
        assert_eq!(nearest_lattice_m(integer, 42.0), 10.0);
        let half = SpinQuantum::new(5).unwrap();
        assert_eq!(nearest_lattice_m(half, 0.0), 0.5);
        assert_eq!(nearest_lattice_m(half, 1.4), 1.5);
        assert_eq!(nearest_lattice_m(half, -1.0), -1.5);
    }

    #[test]
    fn cat_lattice_peaks() {
        let joint = apply_pulse(
            &initial_coherent_spin_state(20).unwrap(),
            PulseStrength::new(3.0).unwrap(),
        );
        let psi = collapse_perfect(&joint, 30).unwrap();
        let spin = psi.spin();
        assert_eq!(lattice_peaks(spin, &psi.populations()), vec![-2.0, 2.0]);
        assert_eq!(psi.amplitude_at(0.0).norm(), 0.0);
    }

    #[test]
    fn null_width_of_initial_state() {
        for n_atoms in [20u32, 100, 400] {
            let psi = initial_coherent_spin_state(n_atoms).unwrap();
            let s = psi.spin().s();
            let w = null_width(&psi).unwrap();
            assert!((w - s.sqrt()).abs() < 1.0, "N_a={n_atoms}: {w}");
        }
    }

    #[test]
    fn null_width_rejects_cats_and_half_integers() {
        let joint = apply_pulse(
            &initial_coherent_spin_state(20).unwrap(),
            PulseStrength::new(1.0).unwrap(),
        );
        let cat = collapse_perfect(&joint, 4).unwrap();
        assert!(matches!(null_width(&cat), Err(Error::Shape(_))));
        let odd = initial_coherent_spin_state(21).unwrap();
        assert!(matches!(null_width(&odd), Err(Error::Shape(_))));
    }

    #[test]
    fn xi_x_examples() {
        assert!((cat_squeezing_xi_x(10.0, 2.0, 40).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cat_squeezing_xi_x(10.0, 2.0, 0).unwrap(), 0.0);
        let d_res = 50.0;
        let s = 10.0;
        let xi = cat_squeezing_xi_x(s, (d_res / s).sqrt(), 8).unwrap();
        assert!((xi - (8.0 / d_res).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn coherence_pure_and_lossy() {
        let psi = initial_coherent_spin_state(20).unwrap();
        let pure = {
            let joint = apply_pulse(&psi, PulseStrength::new(3.0).unwrap());
            collapse_imperfect(&joint, DetectionOutcome::perfect(36)).unwrap()
        };
        assert!((cat_coherence(&pure, 2.0).unwrap() - 1.0).abs() < 1e-10);

        let lossy = |c: f64, mu: f64| {
            let joint = apply_pulse(&psi, PulseStrength::new(c).unwrap());
            let n_m = (4.0 * c * c * mu).round() as u64;
            let rho = collapse_imperfect(&joint, DetectionOutcome::new(n_m, mu).unwrap()).unwrap();
            cat_coherence(&rho, 2.0).unwrap()
        };
        assert!(lossy(1.0, 0.85) > lossy(4.0, 0.85));
        // mu = 0: off-diagonal carries exp(-2 C^2 M^2) exactly
        let joint = apply_pulse(&psi, PulseStrength::new(0.4).unwrap());
        let rho = collapse_imperfect(&joint, DetectionOutcome::new(2, 0.0).unwrap()).unwrap();
        let expect = (-2.0 * 0.16 * 4.0f64).exp();
        assert!((cat_coherence(&rho, 2.0).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn coherence_errors() {
        let psi = initial_coherent_spin_state(20).unwrap();
        let joint = apply_pulse(&psi, PulseStrength::new(1.0).unwrap());
        let rho = collapse_imperfect(&joint, DetectionOutcome::perfect(2)).unwrap();
        assert!(matches!(
            cat_coherence(&rho, 0.0),
            Err(Error::DegenerateArm { .. })
        ));
        assert!(matches!(cat_coherence(&rho, 0.5), Err(Error::Domain(_))));
    }
}
