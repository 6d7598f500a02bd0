use dicke_core::cat_analysis::{
    cat_coherence, cat_peak_location, cat_peak_width, lattice_peaks, nearest_lattice_m,
};
use dicke_core::detection::{
    collapse_imperfect, collapse_perfect, outcome_probability, DetectionOutcome,
};
use dicke_core::physical_params::{
    derive, faraday_angle, null_xi_with_inefficiency, optimal_strength, spon_identity_ratio,
    squeezing_with_decay, PhysicalConfig, SPON_STRENGTH_CONSTANT,
};
use dicke_core::pulse_scattering::{
    apply_pulse, default_n_max, photon_distribution, PulseStrength,
};
use dicke_core::spin_basis::{initial_coherent_spin_state, spin_moments};
use proptest::prelude::*;

fn config_strategy() -> impl Strategy<Value = PhysicalConfig> {
    (
        1e6f64..1e8,
        10f64..1e4,
        3e-7f64..2e-6,
        1e-9f64..1e-5,
        1e-4f64..1e-1,
        1e15f64..1e19,
        0f64..1e12,
    )
        .prop_map(
            |(gamma, det_ratio, wavelength, area, length, density, n_ph)| PhysicalConfig {
                gamma,
                delta: det_ratio * gamma,
                wavelength,
                area,
                length,
                density,
                n_atoms: None,
                chi_sq_integral: None,
                n_photons: Some(n_ph),
            },
        )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn photon_distribution_is_normalized(n_atoms in 1u32..40, c in 0.0f64..3.0) {
        let psi = initial_coherent_spin_state(n_atoms).unwrap();
        let joint = apply_pulse(&psi, PulseStrength::new(c).unwrap());
        let dist = photon_distribution(&joint, default_n_max(psi.spin(), c));
        prop_assert!(dist.probabilities().iter().all(|&p| p >= 0.0));
        let total: f64 = dist.probabilities().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-10);
        prop_assert!(dist.tail_mass() < 1e-10);
    }

    #[test]
    fn perfect_collapse_is_normalized_and_symmetric(n_atoms in 2u32..40, c in 0.05f64..3.0, n_m in 0u64..60) {
        let psi = initial_coherent_spin_state(n_atoms).unwrap();
        let joint = apply_pulse(&psi, PulseStrength::new(c).unwrap());
        prop_assume!(outcome_probability(&joint, n_m) > 1e-200);
        let after = collapse_perfect(&joint, n_m).unwrap();
        prop_assert!((after.norm_sqr() - 1.0).abs() < 1e-12);
        let p = after.populations();
        for i in 0..p.len() {
            prop_assert!((p[i] - p[p.len() - 1 - i]).abs() < 1e-12);
        }
        let m = spin_moments(&after).unwrap();
        prop_assert!(m.mean_sz.abs() < 1e-10);
        if n_m > 0 && n_atoms % 2 == 0 {
            prop_assert_eq!(after.amplitude_at(0.0).norm(), 0.0);
        }
    }

    #[test]
    fn imperfect_collapse_is_a_density_matrix(n_atoms in 2u32..24, c in 0.05f64..2.5, mu in 0.0f64..1.0, n_m in 0u64..20) {
        let psi = initial_coherent_spin_state(n_atoms).unwrap();
        let joint = apply_pulse(&psi, PulseStrength::new(c).unwrap());
        let rho = collapse_imperfect(&joint, DetectionOutcome::new(n_m, mu).unwrap());
        if let Ok(rho) = rho {
            prop_assert!(rho.validate().is_ok(), "{:?}", rho.validate());
        }
    }

    #[test]
    fn efficiency_one_is_the_pure_projector(n_atoms in 2u32..24, c in 0.05f64..2.5, n_m in 0u64..20) {
        let psi = initial_coherent_spin_state(n_atoms).unwrap();
        let joint = apply_pulse(&psi, PulseStrength::new(c).unwrap());
        prop_assume!(outcome_probability(&joint, n_m) > 1e-200);
        let pure = collapse_perfect(&joint, n_m).unwrap();
        let rho = collapse_imperfect(&joint, DetectionOutcome::perfect(n_m)).unwrap();
        let a = pure.amplitudes();
        for i in 0..a.len() {
            for j in 0..a.len() {
                prop_assert!((rho.matrix()[(i, j)] - a[i] * a[j].conj()).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn cat_arms_are_distinguishable(c in 0.05f64..10.0, n_m in 1u64..200) {
        let w = cat_peak_width(c, n_m).unwrap();
        let m = cat_peak_location(c, n_m).unwrap();
        prop_assert!(w > 0.0 && w < m);
    }

    #[test]
    fn faraday_angle_is_linear_and_odd(cfg in config_strategy(), d in 1e-22f64..1e-18, sz in -1e6f64..1e6) {
        let phi = faraday_angle(&cfg, d, sz);
        prop_assert_eq!(faraday_angle(&cfg, d, -sz), -phi);
        let two = faraday_angle(&cfg, d, 2.0 * sz);
        prop_assert!((two - 2.0 * phi).abs() <= 1e-15 * two.abs());
    }

    #[test]
    fn strength_chain_and_bound(cfg in config_strategy()) {
        let (s, _) = derive(&cfg).unwrap();
        if s.c > 0.0 {
            let ratio = spon_identity_ratio(&cfg);
            prop_assert!((ratio / SPON_STRENGTH_CONSTANT - 1.0).abs() < 1e-6);
        }
        if s.eta < 1.0 {
            prop_assert!(s.c <= s.c_bound * (1.0 + 1e-12));
        }
        prop_assert!((s.c - s.eta.sqrt() * s.c_bound).abs() <= 1e-9 * s.c.max(1e-300));
    }

    #[test]
    fn decay_optimum_matches_closed_form(n_atoms in 10f64..1e6, d_res in 1f64..5e3) {
        let opt = optimal_strength(n_atoms, d_res).unwrap();
        prop_assert!((opt.c_numeric / opt.c_opt - 1.0).abs() < 1e-6);
        let xi_opt = squeezing_with_decay(opt.c_opt, n_atoms, d_res).unwrap();
        prop_assert!((xi_opt - opt.xi_min).abs() < 1e-9 * opt.xi_min.max(1.0));
        for f in [0.8, 1.25] {
            prop_assert!(squeezing_with_decay(f * opt.c_opt, n_atoms, d_res).unwrap() > xi_opt);
        }
    }
}

#[test]
fn null_xi_decreases_with_strength_at_unit_efficiency() {
    for n_atoms in [10u32, 20, 40] {
        let mut last = f64::INFINITY;
        for k in 1..=40 {
            let c = 0.1 * k as f64;
            let xi = null_xi_with_inefficiency(n_atoms, c, 1.0).unwrap();
            assert!(xi < last, "N_a={n_atoms} C={c}: {xi} >= {last}");
            last = xi;
        }
        let floor = 1.0 / ((n_atoms + 1) as f64).sqrt();
        assert!(
            last > floor * (1.0 - 1e-9),
            "N_a={n_atoms}: {last} below {floor}"
        );
    }
}

#[test]
fn coherence_decreases_with_strength_under_loss() {
    let psi = initial_coherent_spin_state(20).unwrap();
    for mu in [0.5, 0.85, 0.95] {
        let mut last = f64::INFINITY;
        for c in [0.5, 1.0, 2.0, 4.0] {
            let joint = apply_pulse(&psi, PulseStrength::new(c).unwrap());
            let n_m = (4.0 * c * c * mu).round() as u64;
            let rho = collapse_imperfect(&joint, DetectionOutcome::new(n_m, mu).unwrap()).unwrap();
            let coherence = cat_coherence(&rho, 2.0).unwrap();
            assert!(coherence <= last, "mu={mu} C={c}: {coherence} > {last}");
            last = coherence;
        }
    }
}

#[test]
fn lattice_peak_matches_continuous_peak_on_grid() {
    let psi = initial_coherent_spin_state(20).unwrap();
    let s = psi.spin().s();
    for c in [0.5, 1.0, 2.0, 3.0] {
        let joint = apply_pulse(&psi, PulseStrength::new(c).unwrap());
        for n_m in [1u64, 5, 30] {
            let m_peak = cat_peak_location(c, n_m).unwrap();
            if m_peak > s - 1.0 {
                continue;
            }
            let after = collapse_perfect(&joint, n_m).unwrap();
            let peaks = lattice_peaks(psi.spin(), &after.populations());
            let top = peaks.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            // a click empties M = 0, so a peak below 1/2 lands on the first nonzero site
            let expected = nearest_lattice_m(psi.spin(), m_peak).max(1.0);
            assert_eq!(top, expected, "C={c} n_m={n_m}");
            if m_peak >= 0.5 {
                assert!(
                    (top - m_peak).abs() <= 0.5,
                    "C={c} n_m={n_m}: {top} vs {m_peak}"
                );
            }
        }
    }
}
