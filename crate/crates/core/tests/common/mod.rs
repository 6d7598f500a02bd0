#![allow(dead_code)]

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use statrs::distribution::{ChiSquared, ContinuousCDF};

pub fn big_factorial(n: u64) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, k| acc * k)
}

/// Natural log of an arbitrary-size integer.
pub fn ln_big(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().unwrap().ln();
    }
    let shift = bits - 60;
    let top = (x >> shift).to_f64().unwrap();
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// `|A(S, M)|^2 = C(2S, S+M) / 4^S` with the binomial coefficient computed exactly.
pub fn exact_binomial_weight(n_atoms: u64, k: u64) -> f64 {
    let binom = big_factorial(n_atoms) / (big_factorial(k) * big_factorial(n_atoms - k));
    (ln_big(&binom) - n_atoms as f64 * std::f64::consts::LN_2).exp()
}

pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub critical: f64,
}

impl ChiSquare {
    pub fn passes(&self) -> bool {
        self.statistic < self.critical
    }
}

/// Pearson test of integer samples against `probabilities` (index = value).
/// Adjacent cells are pooled until each expects at least five counts; the last
/// cell absorbs the tail.
pub fn chi_square(samples: &[u64], probabilities: &[f64], significance: f64) -> ChiSquare {
    let total = samples.len() as f64;
    let mut observed = vec![0u64; probabilities.len()];
    let mut overflow = 0u64;
    for &s in samples {
        match observed.get_mut(s as usize) {
            Some(slot) => *slot += 1,
            None => overflow += 1,
        }
    }
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut exp_acc, mut obs_acc) = (0.0, 0.0);
    for (p, &o) in probabilities.iter().zip(&observed) {
        exp_acc += p * total;
        obs_acc += o as f64;
        if exp_acc >= 5.0 {
            cells.push((obs_acc, exp_acc));
            exp_acc = 0.0;
            obs_acc = 0.0;
        }
    }
    let tail_expected = (1.0 - probabilities.iter().sum::<f64>()).max(0.0) * total;
    exp_acc += tail_expected;
    obs_acc += overflow as f64;
    if let Some(last) = cells.last_mut() {
        last.0 += obs_acc;
        last.1 += exp_acc;
    }
    let statistic = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = cells.len() - 1;
    let critical = ChiSquared::new(dof as f64)
        .unwrap()
        .inverse_cdf(1.0 - significance);
    ChiSquare {
        statistic,
        dof,
        critical,
    }
}
