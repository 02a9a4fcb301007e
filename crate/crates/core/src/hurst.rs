//! Rescaled-range (R/S) and detrended fluctuation analysis (DFA) estimators of
//! the Hurst exponent.
//!
//! Both use non-overlapping windows and report the OLS slope of the log
//! statistic against the log window size. R/S uses the population standard
//! deviation inside each block.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Strictly increasing window sizes, each in `[4, len / 2]`, at least four of them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScaleGrid {
    scales: Vec<usize>,
}

impl ScaleGrid {
    pub fn new(scales: Vec<usize>, series_len: usize) -> Result<Self> {
        if scales.len() < 4 {
            return Err(Error::InvalidArgument(format!(
                "need at least 4 scales, got {}",
                scales.len()
            )));
        }
        if scales.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "scales must be strictly increasing".into(),
            ));
        }
        let max = series_len / 2;
        if let Some(&s) = scales.iter().find(|&&s| s < 4 || s > max) {
            return Err(Error::InvalidArgument(format!(
                "scale {s} outside [4, {max}] for series of length {series_len}"
            )));
        }
        Ok(ScaleGrid { scales })
    }

    /// Powers of two from 8 up to `len / 4`.
    pub fn default_for(series_len: usize) -> Result<Self> {
        let mut scales = Vec::new();
        let mut s = 8;
        while s <= series_len / 4 {
            scales.push(s);
            s *= 2;
        }
        ScaleGrid::new(scales, series_len)
    }

    pub fn scales(&self) -> &[usize] {
        &self.scales
    }
}

/// Per-scale statistic plus the fitted log-log slope.
#[derive(Debug, Clone, PartialEq)]
pub struct HurstFit {
    pub scales: Vec<usize>,
    pub statistics: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
}

pub fn rs_statistic(series: &[f64], scale: usize) -> Result<f64> {
    if scale < 4 {
        return Err(Error::InvalidArgument(format!(
            "R/S scale must be >= 4, got {scale}"
        )));
    }
    if series.len() < scale {
        return Err(Error::InvalidArgument(format!(
            "series of length {} shorter than scale {scale}",
            series.len()
        )));
    }
    let mut total = 0.0;
    let mut used = 0usize;
    for block in series.chunks_exact(scale) {
        let m = block.iter().sum::<f64>() / scale as f64;
        let var = block.iter().map(|x| (x - m).powi(2)).sum::<f64>() / scale as f64;
        if var <= 0.0 {
            continue;
        }
        let (mut lo, mut hi, mut acc) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
        for x in block {
            acc += x - m;
            lo = lo.min(acc);
            hi = hi.max(acc);
        }
        total += (hi - lo) / var.sqrt();
        used += 1;
    }
    if used == 0 {
        return Err(Error::ZeroVariance);
    }
    Ok(total / used as f64)
}

pub fn fit_hurst_rs(series: &[f64], scales: &ScaleGrid) -> Result<HurstFit> {
    let stats = scales
        .scales()
        .iter()
        .map(|&s| rs_statistic(series, s))
        .collect::<Result<Vec<_>>>()?;
    log_log_fit(scales.scales(), stats)
}

pub fn estimate_hurst_rs(series: &[f64], scales: &ScaleGrid) -> Result<f64> {
    Ok(fit_hurst_rs(series, scales)?.slope)
}

/// RMS residual of the integrated, mean-centred series after a per-window
/// polynomial fit of degree `poly_degree`.
pub fn dfa_fluctuation(series: &[f64], scale: usize, poly_degree: usize) -> Result<f64> {
    if scale < poly_degree + 2 {
        return Err(Error::InvalidArgument(format!(
            "DFA scale {scale} too small for polynomial degree {poly_degree}"
        )));
    }
    if series.len() < scale {
        return Err(Error::InvalidArgument(format!(
            "series of length {} shorter than scale {scale}",
            series.len()
        )));
    }
    let m = series.iter().sum::<f64>() / series.len() as f64;
    let mut profile = Vec::with_capacity(series.len());
    let mut acc = 0.0;
    for x in series {
        acc += x - m;
        profile.push(acc);
    }
    let projector = WindowDetrender::new(scale, poly_degree);
    let mut ss = 0.0;
    let mut count = 0usize;
    for window in profile.chunks_exact(scale) {
        ss += projector.residual_sum_squares(window);
        count += scale;
    }
    Ok((ss / count as f64).sqrt())
}

pub fn fit_hurst_dfa(series: &[f64], scales: &ScaleGrid, poly_degree: usize) -> Result<HurstFit> {
    let stats = scales
        .scales()
        .iter()
        .map(|&s| dfa_fluctuation(series, s, poly_degree))
        .collect::<Result<Vec<_>>>()?;
    if stats.iter().any(|&f| f <= 0.0) {
        return Err(Error::ZeroVariance);
    }
    log_log_fit(scales.scales(), stats)
}

pub fn estimate_hurst_dfa(series: &[f64], scales: &ScaleGrid, poly_degree: usize) -> Result<f64> {
    Ok(fit_hurst_dfa(series, scales, poly_degree)?.slope)
}

/// Least-squares polynomial residuals for windows of a fixed length. The
/// orthonormal basis of the design matrix is computed once per scale.
struct WindowDetrender {
    basis: DMatrix<f64>,
}

impl WindowDetrender {
    fn new(scale: usize, degree: usize) -> Self {
        let half = (scale as f64 - 1.0) / 2.0;
        let design = DMatrix::from_fn(scale, degree + 1, |i, p| {
            let x = if half > 0.0 { (i as f64 - half) / half } else { 0.0 };
            x.powi(p as i32)
        });
        let basis = design.qr().q();
        WindowDetrender { basis }
    }

    fn residual_sum_squares(&self, window: &[f64]) -> f64 {
        let y = DVector::from_column_slice(window);
        let coef = self.basis.tr_mul(&y);
        let resid = &y - &self.basis * coef;
        resid.norm_squared()
    }
}

fn log_log_fit(scales: &[usize], stats: Vec<f64>) -> Result<HurstFit> {
    let xs: Vec<f64> = scales.iter().map(|&s| (s as f64).ln()).collect();
    let ys: Vec<f64> = stats.iter().map(|&v| v.ln()).collect();
    if ys.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("log statistic".into()));
    }
    let (slope, intercept) = ols(&xs, &ys);
    Ok(HurstFit {
        scales: scales.to_vec(),
        statistics: stats,
        slope,
        intercept,
    })
}

pub(crate) fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::longmem::{simulate_fgn, HurstCoeff};
    use crate::rng;
    use rand_distr::{Distribution, StandardNormal};

    fn pow2_grid(lo: usize, hi: usize, n: usize) -> ScaleGrid {
        let mut v = Vec::new();
        let mut s = lo;
        while s <= hi {
            v.push(s);
            s *= 2;
        }
        ScaleGrid::new(v, n).unwrap()
    }

    fn white(n: usize, seed: u64) -> Vec<f64> {
        let mut r = rng::seeded(seed);
        (0..n).map(|_| StandardNormal.sample(&mut r)).collect()
    }

    #[test]
    fn scale_grid_validation() {
        assert!(ScaleGrid::new(vec![8, 16, 32], 100).is_err());
        assert!(ScaleGrid::new(vec![8, 16, 16, 32], 100).is_err());
        assert!(ScaleGrid::new(vec![2, 8, 16, 32], 100).is_err());
        assert!(ScaleGrid::new(vec![8, 16, 32, 64], 100).is_err());
        assert_eq!(
            ScaleGrid::default_for(4096).unwrap().scales(),
            &[8, 16, 32, 64, 128, 256, 512, 1024]
        );
    }

    #[test]
    fn rs_alternating_series() {
        let x: Vec<f64> = (0..64).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert!((rs_statistic(&x, 4).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rs_constant_series_errors() {
        let x = vec![3.0; 64];
        assert!(matches!(rs_statistic(&x, 8), Err(Error::ZeroVariance)));
        let g = pow2_grid(4, 32, 64);
        assert!(estimate_hurst_rs(&x, &g).is_err());
        assert!(estimate_hurst_dfa(&x, &g, 1).is_err());
    }

    #[test]
    fn rs_white_noise_range() {
        let g = pow2_grid(8, 512, 4096);
        let h = estimate_hurst_rs(&white(4096, 1), &g).unwrap();
        assert!((0.4..=0.65).contains(&h), "{h}");
    }

    #[test]
    fn rs_recovers_fgn() {
        let g = pow2_grid(8, 512, 4096);
        let hv = HurstCoeff::new(0.7).unwrap();
        let mean: f64 = (0..20)
            .map(|s| estimate_hurst_rs(&simulate_fgn(4096, hv, 100 + s).unwrap(), &g).unwrap())
            .sum::<f64>()
            / 20.0;
        assert!((mean - 0.7).abs() < 0.1, "{mean}");
    }

    #[test]
    fn rs_linear_trend_inflates() {
        let x: Vec<f64> = (1..=4096).map(|i| i as f64).collect();
        let g = pow2_grid(8, 512, 4096);
        assert!(estimate_hurst_rs(&x, &g).unwrap() > 0.9);
    }

    #[test]
    fn dfa_removes_polynomial_trend_exactly() {
        // A linear series integrates to a quadratic profile.
        let x: Vec<f64> = (0..256).map(|i| 0.5 + 0.01 * i as f64).collect();
        assert!(dfa_fluctuation(&x, 32, 2).unwrap() < 1e-10);
        // A constant series has a zero profile.
        assert!(dfa_fluctuation(&vec![2.0; 256], 16, 1).unwrap() < 1e-10);
        assert!(dfa_fluctuation(&x, 3, 2).is_err());
    }

    #[test]
    fn dfa_recovers_white_and_fgn() {
        let g = pow2_grid(8, 512, 4096);
        let w: f64 = (0..20)
            .map(|s| estimate_hurst_dfa(&white(4096, 50 + s), &g, 1).unwrap())
            .sum::<f64>()
            / 20.0;
        assert!((w - 0.5).abs() < 0.1, "{w}");
        let hv = HurstCoeff::new(0.8).unwrap();
        let f: f64 = (0..20)
            .map(|s| estimate_hurst_dfa(&simulate_fgn(4096, hv, 70 + s).unwrap(), &g, 1).unwrap())
            .sum::<f64>()
            / 20.0;
        assert!((f - 0.8).abs() < 0.1, "{f}");
    }

    #[test]
    fn dfa_degree_robustness() {
        let g = pow2_grid(8, 512, 4096);
        let x = simulate_fgn(4096, HurstCoeff::new(0.7).unwrap(), 3).unwrap();
        let d1 = estimate_hurst_dfa(&x, &g, 1).unwrap();
        let d2 = estimate_hurst_dfa(&x, &g, 2).unwrap();
        assert!((d1 - d2).abs() < 0.1);
    }

    #[test]
    fn estimators_affine_invariant() {
        let g = pow2_grid(8, 256, 2048);
        let x = simulate_fgn(2048, HurstCoeff::new(0.65).unwrap(), 9).unwrap();
        let y: Vec<f64> = x.iter().map(|v| 3.5 * v - 2.0).collect();
        let rs = (estimate_hurst_rs(&x, &g).unwrap() - estimate_hurst_rs(&y, &g).unwrap()).abs();
        assert!(rs < 1e-12);
        let dfa = (estimate_hurst_dfa(&x, &g, 1).unwrap() - estimate_hurst_dfa(&y, &g, 1).unwrap()).abs();
        assert!(dfa < 1e-8);
    }
}
