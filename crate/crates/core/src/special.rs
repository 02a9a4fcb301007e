//! Standard normal helpers.

use statrs::function::erf::{erfc, erfc_inv};
use std::f64::consts::{PI, SQRT_2};

/// Standard normal CDF, accurate in both tails.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Upper tail `1 - Φ(x)` without cancellation.
pub fn norm_sf(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

pub fn norm_inv_cdf(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    -SQRT_2 * erfc_inv(2.0 * p)
}

pub fn norm_logpdf(x: f64) -> f64 {
    -0.5 * x * x - 0.5 * (2.0 * PI).ln()
}

/// `asin` with its argument clamped to [-1, 1] when it overshoots by rounding.
pub fn clamped_asin(x: f64) -> f64 {
    const TOL: f64 = 1e-12;
    debug_assert!(x.abs() <= 1.0 + TOL, "asin argument {x} out of range");
    x.clamp(-1.0, 1.0).asin()
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    p.ln() - (-p).ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_reference_values() {
        let rel = |a: f64, b: f64| ((a - b) / b).abs();
        assert!(rel(norm_cdf(2.0), 0.977_249_868_051_820_8) < 1e-10);
        assert!(rel(norm_cdf(-2.0), 0.022_750_131_948_179_2) < 1e-10);
        assert!(rel(norm_sf(8.0), 6.220_960_574_271_74e-16) < 1e-10);
    }

    #[test]
    fn inverse_round_trip() {
        for &p in &[1e-12, 1e-4, 0.1, 0.5, 0.9, 1.0 - 1e-9] {
            let x = norm_inv_cdf(p);
            assert!((norm_cdf(x) - p).abs() / p.min(1.0 - p).max(1e-300) < 1e-8);
        }
    }

    #[test]
    fn logistic_logit_inverse() {
        for &b in &[-15.0, -1.0, 0.0, 2.5, 15.0] {
            assert!((logit(logistic(b)) - b).abs() < 1e-6);
        }
    }
}
