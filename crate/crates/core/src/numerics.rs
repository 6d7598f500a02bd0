//! Small numerical kernels shared by the physics modules: log-factorials,
//! Poisson log-probabilities, plateau-aware peak finding, bisection and
//! Brent minimization.

use std::sync::OnceLock;

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Largest `n` whose factorial is finite in `f64`.
const EXACT_FACTORIAL_MAX: usize = 170;

fn ln_factorial_table() -> &'static [f64; EXACT_FACTORIAL_MAX + 1] {
    static TABLE: OnceLock<[f64; EXACT_FACTORIAL_MAX + 1]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = [0.0; EXACT_FACTORIAL_MAX + 1];
        let mut factorial = 1.0_f64;
        for (n, slot) in table.iter_mut().enumerate().skip(1) {
            factorial *= n as f64;
            *slot = factorial.ln();
        }
        table
    })
}

/// `ln(n!)`.
///
/// Exact-product table up to 170!, log-gamma beyond.
pub fn ln_factorial(n: u64) -> f64 {
    if (n as usize) <= EXACT_FACTORIAL_MAX {
        ln_factorial_table()[n as usize]
    } else {
        ln_gamma(n as f64 + 1.0)
    }
}

/// `ln P(n; mean)` for a Poisson law. Returns `-inf` for impossible counts.
pub fn ln_poisson_pmf(n: u64, mean: f64) -> f64 {
    if mean == 0.0 {
        return if n == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    -mean + n as f64 * mean.ln() - ln_factorial(n)
}

/// Indices of local maxima of a sampled non-negative curve.
///
/// Adjacent samples within `rel_tol` of each other (relative to the larger)
/// are merged into one plateau, and a plateau counts as a maximum when both
/// outside neighbours are strictly lower (a missing neighbour at either end
/// counts as lower). The reported index is the plateau's upper end. Zero
/// plateaus never count.
pub fn plateau_local_maxima(values: &[f64], rel_tol: f64) -> Vec<usize> {
    let close = |a: f64, b: f64| {
        let scale = a.abs().max(b.abs());
        scale == 0.0 || (a - b).abs() <= rel_tol * scale
    };
    let mut peaks = Vec::new();
    let mut start = 0;
    while start < values.len() {
        let mut end = start;
        while end + 1 < values.len() && close(values[end], values[end + 1]) {
            end += 1;
        }
        let level = values[start..=end]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let left_lower = start == 0 || values[start - 1] < level;
        let right_lower = end + 1 == values.len() || values[end + 1] < level;
        if level > 0.0 && left_lower && right_lower {
            peaks.push(end);
        }
        start = end + 1;
    }
    peaks
}

/// Root of `f` on `[lo, hi]` by bisection. `f(lo)` and `f(hi)` must differ in sign.
pub fn bisect<F>(mut f: F, mut lo: f64, mut hi: f64, abs_tol: f64, max_iter: usize) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::Bracket(format!(
            "f({lo}) = {f_lo:e} and f({hi}) = {f_hi:e} have the same sign"
        )));
    }
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid);
        if f_mid == 0.0 || 0.5 * (hi - lo) < abs_tol {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Result of a one-dimensional minimization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Minimum {
    pub x: f64,
    pub value: f64,
    pub iterations: usize,
}

/// Brent's method (golden section with parabolic steps) on `[lo, hi]`.
pub fn brent_minimize<F>(mut f: F, lo: f64, hi: f64, rel_tol: f64, max_iter: usize) -> Minimum
where
    F: FnMut(f64) -> f64,
{
    const GOLDEN: f64 = 0.381_966_011_250_105_1;
    const TINY: f64 = 1e-21;

    let (mut a, mut b) = if lo < hi { (lo, hi) } else { (hi, lo) };
    let mut x = a + GOLDEN * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x);
    let (mut fw, mut fv) = (fx, fx);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;

    for iter in 0..max_iter {
        let xm = 0.5 * (a + b);
        let tol1 = rel_tol * x.abs() + TINY;
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            return Minimum {
                x,
                value: fx,
                iterations: iter,
            };
        }
        let mut golden_step = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let e_prev = e;
            if p.abs() < (0.5 * q * e_prev).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = tol1.copysign(xm - x);
                }
                golden_step = false;
            }
        }
        if golden_step {
            e = if x >= xm { a - x } else { b - x };
            d = GOLDEN * e;
        }
        let u = if d.abs() >= tol1 {
            x + d
        } else {
            x + tol1.copysign(d)
        };
        let fu = f(u);
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    Minimum {
        x,
        value: fx,
        iterations: max_iter,
    }
}
