use crate::error::{Error, Result};

/// Default maximum lag of the autocorrelation sum.
pub const DEFAULT_MAX_LAG: usize = 30;

/// Empirical lag-`lag` autocorrelation using the biased (divide-by-L)
/// autocovariance estimator.
pub fn autocorrelation(chain: &[f64], lag: usize) -> Result<f64> {
    let n = chain.len();
    if lag >= n {
        return Err(Error::ChainTooShort { len: n, max_lag: lag });
    }
    let m = chain.iter().sum::<f64>() / n as f64;
    let var: f64 = chain.iter().map(|x| (x - m).powi(2)).sum();
    if !(var > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let cov: f64 = chain[..n - lag]
        .iter()
        .zip(&chain[lag..])
        .map(|(a, b)| (a - m) * (b - m))
        .sum();
    Ok(cov / var)
}

/// `L / (1 + 2 Σ_{j=1}^{J} ρ(j))` with raw (possibly negative) autocorrelations.
pub fn ess(chain: &[f64], max_lag: usize) -> Result<f64> {
    let n = chain.len();
    if n <= max_lag {
        return Err(Error::ChainTooShort { len: n, max_lag });
    }
    let m = chain.iter().sum::<f64>() / n as f64;
    let centred: Vec<f64> = chain.iter().map(|x| x - m).collect();
    let var: f64 = centred.iter().map(|x| x * x).sum();
    if !(var > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let mut rho_sum = 0.0;
    for lag in 1..=max_lag {
        let cov: f64 = centred[..n - lag]
            .iter()
            .zip(&centred[lag..])
            .map(|(a, b)| a * b)
            .sum();
        rho_sum += cov / var;
    }
    Ok(n as f64 / (1.0 + 2.0 * rho_sum))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn iid_chain() {
        // The truncated sum has sd about 2·sqrt(30 / L) ≈ 0.11 in ESS/L, so a
        // single chain gets a 3-sd band and the average of 20 chains the 10% band.
        let mut r = rng::seeded(1);
        let ratios: Vec<f64> = (0..20)
            .map(|_| {
                let x: Vec<f64> = (0..10_000).map(|_| StandardNormal.sample(&mut r)).collect();
                ess(&x, DEFAULT_MAX_LAG).unwrap() / 10_000.0
            })
            .collect();
        assert!(ratios.iter().all(|q| (q - 1.0).abs() < 0.35), "{ratios:?}");
        let mean = ratios.iter().sum::<f64>() / 20.0;
        assert!((mean - 1.0).abs() < 0.1, "{mean}");
    }

    #[test]
    fn ar1_chain() {
        let mut r = rng::seeded(2);
        let n = 100_000;
        let mut x = Vec::with_capacity(n);
        let mut v = 0.0;
        for _ in 0..n {
            let e: f64 = StandardNormal.sample(&mut r);
            v = 0.9 * v + e;
            x.push(v);
        }
        let ratio = ess(&x, 30).unwrap() / n as f64;
        let target = 0.1 / 1.9;
        assert!((ratio / target - 1.0).abs() < 0.2, "{ratio}");
    }

    #[test]
    fn short_and_constant_chains() {
        assert!(matches!(ess(&[1.0; 30], 30), Err(Error::ChainTooShort { .. })));
        assert!(matches!(ess(&[1.0; 100], 30), Err(Error::ZeroVariance)));
    }

    #[test]
    fn affine_invariance() {
        let mut r = rng::seeded(3);
        let x: Vec<f64> = (0..2000).map(|_| StandardNormal.sample(&mut r)).collect();
        let y: Vec<f64> = x.iter().map(|v| -4.0 * v + 7.0).collect();
        assert!((ess(&x, 30).unwrap() - ess(&y, 30).unwrap()).abs() < 1e-6);
    }
}
