//! Fractional Brownian motion, fractional Gaussian noise and the thresholded
//! binary process.
//!
//! All covariances are for unit-variance fGN; callers apply any precision
//! scaling. Simulation is exact: lower-Cholesky of the Toeplitz covariance for
//! short series, circulant embedding above [`CIRCULANT_THRESHOLD`].

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::linalg::{self, Chol};
use crate::rng;
use crate::special::clamped_asin;

/// Series longer than this are simulated by circulant embedding.
pub const CIRCULANT_THRESHOLD: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct HurstCoeff(f64);

impl HurstCoeff {
    pub fn new(value: f64) -> Result<Self> {
        if value > 0.0 && value < 1.0 {
            Ok(HurstCoeff(value))
        } else {
            Err(Error::InvalidHurst(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for HurstCoeff {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        HurstCoeff::new(v)
    }
}

impl From<HurstCoeff> for f64 {
    fn from(h: HurstCoeff) -> f64 {
        h.0
    }
}

/// Regular grid `t_0, t_0 + Δ, …, t_0 + nΔ`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub delta: f64,
    pub n: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, delta: f64, n: usize) -> Result<Self> {
        if !(delta > 0.0) || !t0.is_finite() || !delta.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "grid spacing must be positive and finite, got {delta}"
            )));
        }
        if n == 0 {
            return Err(Error::InvalidArgument("grid needs n >= 1".into()));
        }
        Ok(TimeGrid { t0, delta, n })
    }

    pub fn unit(n: usize) -> Self {
        TimeGrid {
            t0: 0.0,
            delta: 1.0,
            n,
        }
    }

    pub fn point(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.delta
    }

    /// All `n + 1` points including `t_0`.
    pub fn points(&self) -> Vec<f64> {
        (0..=self.n).map(|i| self.point(i)).collect()
    }

    /// Interval right end-points `t_1..t_n`.
    pub fn interval_ends(&self) -> Vec<f64> {
        (1..=self.n).map(|i| self.point(i)).collect()
    }

    /// Window length `t_n − t_0`.
    pub fn span(&self) -> f64 {
        self.n as f64 * self.delta
    }

    /// Position of `t` on the window rescaled to `[0, 1]`.
    pub fn to_window(&self, t: f64) -> f64 {
        (t - self.t0) / self.span()
    }

    /// `t_1..t_n` on the rescaled window: `i / n`.
    pub fn window_ends(&self) -> Vec<f64> {
        (1..=self.n).map(|i| i as f64 / self.n as f64).collect()
    }
}

pub fn fbm_cov(s: f64, t: f64, h: HurstCoeff) -> f64 {
    let e = 2.0 * h.0;
    0.5 * (t.abs().powf(e) + s.abs().powf(e) - (t - s).abs().powf(e))
}

pub fn fgn_autocov(k: usize, h: HurstCoeff) -> f64 {
    let e = 2.0 * h.0;
    let k = k as f64;
    0.5 * ((k + 1.0).powf(e) - 2.0 * k.powf(e) + (k - 1.0).abs().powf(e))
}

fn autocov_vec(n: usize, h: HurstCoeff) -> Vec<f64> {
    (0..n).map(|k| fgn_autocov(k, h)).collect()
}

/// The Toeplitz fGN covariance together with its lower Cholesky factor.
#[derive(Debug, Clone)]
pub struct FgnCovMatrix {
    h: HurstCoeff,
    matrix: DMatrix<f64>,
    chol: Chol,
}

impl FgnCovMatrix {
    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn hurst(&self) -> HurstCoeff {
        self.h
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn cholesky(&self) -> &Chol {
        &self.chol
    }

    pub fn log_det(&self) -> f64 {
        linalg::log_det(&self.chol)
    }

    /// `vᵀ Σ_H⁻¹ v`.
    pub fn inv_quad_form(&self, v: &DVector<f64>) -> f64 {
        linalg::inv_quad_form(&self.chol, v)
    }

    pub fn precision(&self) -> DMatrix<f64> {
        linalg::inverse_from_chol(&self.chol)
    }

    /// One exact draw from `N(0, Σ_H)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        linalg::sample_from_cov_chol(&self.chol, rng)
    }
}

pub fn fgn_cov_matrix(n: usize, h: HurstCoeff) -> Result<FgnCovMatrix> {
    if n == 0 {
        return Err(Error::InvalidArgument("fGN covariance needs n >= 1".into()));
    }
    let acf = autocov_vec(n, h);
    let matrix = DMatrix::from_fn(n, n, |i, j| acf[i.abs_diff(j)]);
    let chol = linalg::cholesky(matrix.clone(), &format!("fGN covariance (n={n}, H={})", h.0))?;
    Ok(FgnCovMatrix { h, matrix, chol })
}

/// Exact draw of `n` unit-variance fGN values.
pub fn sample_fgn<R: Rng + ?Sized>(n: usize, h: HurstCoeff, rng: &mut R) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidArgument("fGN length must be >= 1".into()));
    }
    if n <= CIRCULANT_THRESHOLD {
        let cov = fgn_cov_matrix(n, h)?;
        Ok(cov.sample(rng).iter().copied().collect())
    } else {
        circulant_fgn(n, h, rng)
    }
}

pub fn simulate_fgn(n: usize, h: HurstCoeff, seed: u64) -> Result<Vec<f64>> {
    sample_fgn(n, h, &mut rng::seeded(seed))
}

/// Wood–Chan circulant embedding; exact for fGN because the embedding's
/// eigenvalues are nonnegative for every H in (0, 1).
fn circulant_fgn<R: Rng + ?Sized>(n: usize, h: HurstCoeff, rng: &mut R) -> Result<Vec<f64>> {
    let m = 2 * n;
    let mut row: Vec<Complex<f64>> = Vec::with_capacity(m);
    for k in 0..=n {
        row.push(Complex::new(fgn_autocov(k, h), 0.0));
    }
    for k in (1..n).rev() {
        row.push(Complex::new(fgn_autocov(k, h), 0.0));
    }
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(m);
    fft.process(&mut row);
    let mut eig = Vec::with_capacity(m);
    for c in &row {
        let v = c.re;
        if v < -1e-8 * m as f64 {
            return Err(Error::NotPositiveDefinite(format!(
                "circulant embedding has negative eigenvalue {v}"
            )));
        }
        eig.push(v.max(0.0));
    }
    let mf = m as f64;
    let mut a = vec![Complex::new(0.0, 0.0); m];
    let mut z = || rng.sample::<f64, _>(StandardNormal);
    a[0] = Complex::new((eig[0] / mf).sqrt() * z(), 0.0);
    a[n] = Complex::new((eig[n] / mf).sqrt() * z(), 0.0);
    for k in 1..n {
        let s = (eig[k] / (2.0 * mf)).sqrt();
        let c = Complex::new(s * z(), s * z());
        a[k] = c;
        a[m - k] = c.conj();
    }
    fft.process(&mut a);
    Ok(a[..n].iter().map(|c| c.re).collect())
}

/// fBM on a regular grid: `n + 1` values starting at 0, built from fGN
/// increments scaled by `Δ^H`.
pub fn sample_fbm_path<R: Rng + ?Sized>(grid: &TimeGrid, h: HurstCoeff, rng: &mut R) -> Result<Vec<f64>> {
    let scale = grid.delta.powf(h.0);
    let incs = sample_fgn(grid.n, h, rng)?;
    let mut path = Vec::with_capacity(grid.n + 1);
    let mut acc = 0.0;
    path.push(0.0);
    for e in incs {
        acc += scale * e;
        path.push(acc);
    }
    Ok(path)
}

pub fn simulate_fbm_path(grid: &TimeGrid, h: HurstCoeff, seed: u64) -> Result<Vec<f64>> {
    sample_fbm_path(grid, h, &mut rng::seeded(seed))
}

/// Autocovariance of `1{ε_i > 0}` for fGN `ε`.
pub fn binary_acf(k: usize, h: HurstCoeff) -> f64 {
    clamped_asin(fgn_autocov(k, h)) / (2.0 * PI)
}

/// Scale-free `P(Z_{i+1} = 1 | Z_i = 1)` of the thresholded fGN.
pub fn conditional_persistence(h: HurstCoeff) -> f64 {
    0.5 + clamped_asin(2f64.powf(2.0 * h.0 - 1.0) - 1.0) / PI
}

/// Strict-positivity indicator; exact zeros map to 0.
pub fn threshold_to_binary(increments: &[f64]) -> Vec<u8> {
    increments.iter().map(|&x| u8::from(x > 0.0)).collect()
}

/// Symmetric truncated spectral sums `Σ_{|k|≤J} ρ(k) cos(kλ)` for the binary
/// process and the underlying fGN.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralPair {
    pub binary: f64,
    pub fgn: f64,
}

pub fn binary_spectral_lower_bound(lambda: f64, h: HurstCoeff, truncation: usize) -> Result<SpectralPair> {
    if truncation < 1 {
        return Err(Error::InvalidArgument("truncation must be >= 1".into()));
    }
    if !(lambda > 0.0 && lambda <= PI) {
        return Err(Error::InvalidArgument(format!(
            "frequency must lie in (0, π], got {lambda}"
        )));
    }
    let mut binary = binary_acf(0, h);
    let mut fgn = fgn_autocov(0, h);
    for k in 1..=truncation {
        let w = 2.0 * (k as f64 * lambda).cos();
        binary += w * binary_acf(k, h);
        fgn += w * fgn_autocov(k, h);
    }
    Ok(SpectralPair { binary, fgn })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(v: f64) -> HurstCoeff {
        HurstCoeff::new(v).unwrap()
    }

    fn mean(x: &[f64]) -> f64 {
        x.iter().sum::<f64>() / x.len() as f64
    }

    fn lag_corr(x: &[f64], k: usize) -> f64 {
        let m = mean(x);
        let v: f64 = x.iter().map(|a| (a - m).powi(2)).sum();
        let c: f64 = x.windows(k + 1).map(|w| (w[0] - m) * (w[k] - m)).sum();
        c / v
    }

    #[test]
    fn hurst_rejects_boundaries() {
        assert!(HurstCoeff::new(0.0).is_err());
        assert!(HurstCoeff::new(1.0).is_err());
        assert!(HurstCoeff::new(f64::NAN).is_err());
        assert!(HurstCoeff::new(0.3).is_ok());
    }

    #[test]
    fn fbm_cov_closed_form() {
        assert!((fbm_cov(2.0, 3.0, h(0.5)) - 2.0).abs() < 1e-12);
        assert_eq!(fbm_cov(0.0, 5.0, h(0.3)), 0.0);
        assert!((fbm_cov(1.0, 2.0, h(0.75)) - std::f64::consts::SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn fgn_autocov_values() {
        for &v in &[0.1, 0.5, 0.9] {
            assert!((fgn_autocov(0, h(v)) - 1.0).abs() < 1e-15);
        }
        for k in 1..20 {
            assert!(fgn_autocov(k, h(0.5)).abs() < 1e-15);
        }
        assert!((fgn_autocov(1, h(0.75)) - 0.414_213_562_373_095).abs() < 1e-12);
        assert!((fgn_autocov(1, h(0.8)) - 0.515_716_566_510_398).abs() < 1e-12);
    }

    #[test]
    fn cov_matrix_small_cases() {
        let one = fgn_cov_matrix(1, h(0.3)).unwrap();
        assert_eq!(one.matrix()[(0, 0)], 1.0);
        let id = fgn_cov_matrix(3, h(0.5)).unwrap();
        assert!((id.matrix() - DMatrix::<f64>::identity(3, 3)).abs().max() < 1e-15);
        let two = fgn_cov_matrix(2, h(0.75)).unwrap();
        assert!((two.matrix()[(0, 1)] - 0.414_213_562_373_095).abs() < 1e-12);
        assert!(fgn_cov_matrix(0, h(0.5)).is_err());
    }

    #[test]
    fn cov_matrix_structure_over_h_grid() {
        for hi in 1..=9 {
            let hv = h(hi as f64 / 10.0);
            for &n in &[2usize, 17, 128, 512] {
                let c = fgn_cov_matrix(n, hv).unwrap();
                let m = c.matrix();
                for i in 0..n {
                    assert_eq!(m[(i, i)], 1.0);
                    for j in 0..n {
                        assert_eq!(m[(i, j)], m[(j, i)]);
                        if i > 0 && j > 0 {
                            assert_eq!(m[(i, j)], m[(i - 1, j - 1)]);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn simulate_white_noise_moments() {
        let x = simulate_fgn(10_000, h(0.5), 11).unwrap();
        let m = mean(&x);
        let v = x.iter().map(|a| (a - m).powi(2)).sum::<f64>() / x.len() as f64;
        assert!(m.abs() < 0.03, "mean {m}");
        assert!((v - 1.0).abs() < 0.05, "var {v}");
    }

    #[test]
    fn simulate_lag_one_correlation() {
        let x = simulate_fgn(10_000, h(0.8), 5).unwrap();
        let r = lag_corr(&x, 1);
        assert!((r - fgn_autocov(1, h(0.8))).abs() < 0.05, "lag-1 {r}");
    }

    #[test]
    fn simulate_is_deterministic() {
        assert_eq!(
            simulate_fgn(300, h(0.7), 3).unwrap(),
            simulate_fgn(300, h(0.7), 3).unwrap()
        );
        assert_eq!(
            simulate_fgn(5000, h(0.7), 3).unwrap(),
            simulate_fgn(5000, h(0.7), 3).unwrap()
        );
    }

    #[test]
    fn circulant_matches_covariance() {
        // Second moments of the circulant path agree with the Toeplitz law.
        let hv = h(0.85);
        let mut rng = rng::seeded(99);
        let reps = 400;
        let n = 4096;
        let mut c0 = 0.0;
        let mut c1 = 0.0;
        let mut c10 = 0.0;
        for _ in 0..reps {
            let x = circulant_fgn(n, hv, &mut rng).unwrap();
            c0 += x[100] * x[100];
            c1 += x[100] * x[101];
            c10 += x[100] * x[110];
        }
        let r = reps as f64;
        assert!((c0 / r - 1.0).abs() < 0.2);
        assert!((c1 / r - fgn_autocov(1, hv)).abs() < 0.2);
        assert!((c10 / r - fgn_autocov(10, hv)).abs() < 0.2);
    }

    #[test]
    fn fbm_path_starts_at_zero_and_scales() {
        let grid = TimeGrid::new(0.0, 1.0, 16).unwrap();
        let hv = h(0.7);
        let p = simulate_fbm_path(&grid, hv, 1).unwrap();
        assert_eq!(p.len(), 17);
        assert_eq!(p[0], 0.0);
        let mut rng = rng::seeded(2);
        let reps = 10_000;
        let cov = fgn_cov_matrix(16, hv).unwrap();
        let mut acc = 0.0;
        for _ in 0..reps {
            let s: f64 = cov.sample(&mut rng).iter().sum();
            acc += s * s;
        }
        let var = acc / reps as f64;
        assert!((var / 16f64.powf(1.4) - 1.0).abs() < 0.1, "var {var}");
    }

    #[test]
    fn fbm_grid_spacing_scales_variance() {
        let grid = TimeGrid::new(0.0, 0.25, 4).unwrap();
        let hv = h(0.7);
        let mut rng = rng::seeded(8);
        let mut acc = 0.0;
        let reps = 10_000;
        for _ in 0..reps {
            let p = sample_fbm_path(&grid, hv, &mut rng).unwrap();
            acc += p[4] * p[4];
        }
        // Var B_H(1) = 1 regardless of Δ.
        assert!((acc / reps as f64 - 1.0).abs() < 0.05);
    }

    #[test]
    fn brownian_increments_uncorrelated() {
        let grid = TimeGrid::unit(10_000);
        let p = simulate_fbm_path(&grid, h(0.5), 4).unwrap();
        let inc: Vec<f64> = p.windows(2).map(|w| w[1] - w[0]).collect();
        assert!(lag_corr(&inc, 1).abs() < 0.05);
    }

    #[test]
    fn binary_acf_values() {
        assert!((binary_acf(0, h(0.3)) - 0.25).abs() < 1e-15);
        assert!(binary_acf(3, h(0.5)).abs() < 1e-15);
        assert!((binary_acf(1, h(0.75)) - 0.067_971_668_113_061_67).abs() < 1e-12);
    }

    #[test]
    fn binary_acf_dominates_scaled_fgn_acf() {
        for hi in 1..=9 {
            let hv = h(hi as f64 / 10.0);
            for k in 0..200 {
                let r = fgn_autocov(k, hv);
                if r >= 0.0 {
                    assert!(binary_acf(k, hv) >= r / (2.0 * PI) - 1e-15);
                }
            }
        }
    }

    #[test]
    fn persistence_values() {
        assert!((conditional_persistence(h(0.5)) - 0.5).abs() < 1e-15);
        assert!((conditional_persistence(h(0.75)) - 0.635_943_336_226_123_3).abs() < 1e-12);
        let a = conditional_persistence(h(0.5));
        let b = conditional_persistence(h(0.75));
        let c = conditional_persistence(h(0.9));
        assert!(a < b && b < c);
    }

    #[test]
    fn persistence_matches_monte_carlo() {
        let x = simulate_fgn(50_000, h(0.75), 21).unwrap();
        let z = threshold_to_binary(&x);
        let (mut both, mut prev) = (0usize, 0usize);
        for w in z.windows(2) {
            if w[0] == 1 {
                prev += 1;
                both += w[1] as usize;
            }
        }
        let p = both as f64 / prev as f64;
        assert!((p - conditional_persistence(h(0.75))).abs() < 0.02, "{p}");
    }

    #[test]
    fn threshold_cases() {
        assert_eq!(threshold_to_binary(&[0.3, -0.1, 0.0]), vec![1, 0, 0]);
        assert_eq!(threshold_to_binary(&[1.0, 2.0]), vec![1, 1]);
        let z = threshold_to_binary(&simulate_fgn(100_000, h(0.5), 8).unwrap());
        let m = z.iter().map(|&b| b as f64).sum::<f64>() / z.len() as f64;
        assert!((m - 0.5).abs() < 0.01);
    }

    #[test]
    fn spectral_sums() {
        let s = binary_spectral_lower_bound(1.3, h(0.5), 10).unwrap();
        assert!((s.binary - 0.25).abs() < 1e-15);
        assert!((s.fgn - 1.0).abs() < 1e-15);
        let s = binary_spectral_lower_bound(0.5, h(0.75), 500).unwrap();
        assert!(s.binary >= s.fgn / (2.0 * PI));
        let lo = binary_spectral_lower_bound(0.05, h(0.9), 500).unwrap();
        let hi = binary_spectral_lower_bound(0.5, h(0.9), 500).unwrap();
        assert!(lo.fgn > hi.fgn);
        assert!(binary_spectral_lower_bound(0.0, h(0.9), 5).is_err());
        assert!(binary_spectral_lower_bound(0.5, h(0.9), 0).is_err());
    }
}
