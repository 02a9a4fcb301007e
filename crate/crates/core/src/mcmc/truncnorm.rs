use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::special::{norm_cdf, norm_inv_cdf, norm_sf};

/// Beyond this many standard deviations into a tail the inverse CDF loses
/// precision and we switch to rejection from an exponential proposal.
const TAIL_CUTOFF: f64 = 5.0;

/// Draw from `N(mu, sd²)` restricted to `(lower, upper)`. Either bound may be
/// infinite.
pub fn sample_truncnorm<R: Rng + ?Sized>(
    mu: f64,
    sd: f64,
    lower: f64,
    upper: f64,
    rng: &mut R,
) -> Result<f64> {
    if !(lower < upper) {
        return Err(Error::InvalidInterval { lower, upper });
    }
    if !(sd > 0.0) || !mu.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "truncated normal needs finite mean and positive sd, got ({mu}, {sd})"
        )));
    }
    let a = (lower - mu) / sd;
    let b = (upper - mu) / sd;
    let z = standard_truncnorm(a, b, rng);
    Ok((mu + sd * z).clamp(lower, upper))
}

/// Standard normal truncated to `(a, b)`, `a < b`.
pub fn standard_truncnorm<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    if a >= TAIL_CUTOFF {
        tail(a, b, rng)
    } else if b <= -TAIL_CUTOFF {
        -tail(-b, -a, rng)
    } else if a > 0.0 {
        // Work in the upper tail to keep precision.
        let pa = norm_sf(a);
        let pb = norm_sf(b);
        let u = pb + rng.random::<f64>() * (pa - pb);
        if !(pa > pb) {
            return uniform_fallback(a, b, rng);
        }
        (-norm_inv_cdf(u)).clamp(a, b)
    } else {
        let pa = norm_cdf(a);
        let pb = norm_cdf(b);
        if !(pb > pa) {
            return uniform_fallback(a, b, rng);
        }
        let u = pa + rng.random::<f64>() * (pb - pa);
        norm_inv_cdf(u).clamp(a, b)
    }
}

fn uniform_fallback<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    a + (b - a) * rng.random::<f64>()
}

/// Robert (1995) sampler for `(a, b)` with `a > 0` far in the upper tail.
fn tail<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    if b.is_finite() && b - a < 1.0 / a {
        // Narrow interval: uniform proposal, density is maximal at `a`.
        loop {
            let x = a + (b - a) * rng.random::<f64>();
            if rng.random::<f64>().ln() <= 0.5 * (a * a - x * x) {
                return x;
            }
        }
    }
    let alpha = 0.5 * (a + (a * a + 4.0).sqrt());
    loop {
        let e: f64 = Exp1.sample(rng);
        let x = a + e / alpha;
        if x > b {
            continue;
        }
        if rng.random::<f64>().ln() <= -0.5 * (x - alpha).powi(2) {
            return x;
        }
    }
}
