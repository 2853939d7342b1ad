//! Special functions and a few numerical helpers shared across modules.

pub use statrs::function::beta::{beta_reg, ln_beta};
pub use statrs::function::gamma::{digamma, gamma_lr, ln_gamma};

/// `ln C(n, k)`.
pub fn ln_choose(n: u32, k: u32) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ln_gamma(f64::from(n) + 1.0) - ln_gamma(f64::from(k) + 1.0) - ln_gamma(f64::from(n - k) + 1.0)
}

/// `x * ln(y)` with the convention `0 * ln 0 = 0`.
pub fn xlogy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

/// Numerically stable `ln Σ exp(v)`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Bisection root of a monotone function on `[lo, hi]`; `f(lo)` and `f(hi)`
/// must bracket zero.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut f_lo = f(lo);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol {
            return mid;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if (f_mid < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Inverse of an increasing CDF on `[0, ∞)` by bracket expansion and bisection.
pub fn quantile_positive<F: Fn(f64) -> f64>(cdf: F, p: f64, scale_hint: f64) -> f64 {
    let mut hi = scale_hint.max(1e-12);
    while cdf(hi) < p && hi < 1e300 {
        hi *= 2.0;
    }
    bisect(|t| cdf(t) - p, 0.0, hi, 1e-14 * hi.max(1.0))
}
