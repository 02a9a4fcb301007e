//! GHK sequential importance sampler for Gaussian orthant probabilities.

use nalgebra::DVector;
use rand::Rng;

use super::tmvn::{Sign, SignConstraint};
use super::truncnorm::standard_truncnorm;
use crate::linalg::Chol;
use crate::special::{norm_cdf, norm_sf};

/// `log P(X ∈ orthant)` for `X ~ N(mean, L Lᵀ)`, estimated as the log of the
/// mean GHK weight over `n_draws` draws (coordinates in the factor's order).
pub fn orthant_log_prob_ghk<R: Rng + ?Sized>(
    mean: &DVector<f64>,
    cov_chol: &Chol,
    constraint: &SignConstraint,
    n_draws: usize,
    rng: &mut R,
) -> f64 {
    let l = cov_chol.l_dirty();
    let n = mean.len();
    assert_eq!(n, constraint.len(), "orthant dimension mismatch");
    assert!(n_draws >= 1, "GHK needs at least one draw");
    let mut log_weights = Vec::with_capacity(n_draws);
    let mut e = vec![0.0; n];
    for _ in 0..n_draws {
        let mut lw = 0.0;
        for i in 0..n {
            let mut c = mean[i];
            for (j, ej) in e.iter().enumerate().take(i) {
                c += l[(i, j)] * ej;
            }
            let t = -c / l[(i, i)];
            let (p, lo, hi) = match constraint.signs()[i] {
                Sign::Positive => (norm_sf(t), t, f64::INFINITY),
                Sign::NonPositive => (norm_cdf(t), f64::NEG_INFINITY, t),
            };
            if !(p > 0.0) {
                lw = f64::NEG_INFINITY;
                break;
            }
            lw += p.ln();
            e[i] = standard_truncnorm(lo, hi, rng);
        }
        log_weights.push(lw);
    }
    log_mean_exp(&log_weights)
}

pub fn orthant_prob_ghk<R: Rng + ?Sized>(
    mean: &DVector<f64>,
    cov_chol: &Chol,
    constraint: &SignConstraint,
    n_draws: usize,
    rng: &mut R,
) -> f64 {
    orthant_log_prob_ghk(mean, cov_chol, constraint, n_draws, rng).exp()
}

fn log_mean_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let s: f64 = v.iter().map(|x| (x - max).exp()).sum();
    max + (s / v.len() as f64).ln()
}
