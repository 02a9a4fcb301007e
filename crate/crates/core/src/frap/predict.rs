use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::model::GpHyper;
use super::sampler::{equal_tailed, PosteriorSamples};
use crate::error::{Error, Result};
use crate::linalg;
use crate::longmem::fgn_cov_matrix;
use crate::longmem::HurstCoeff;

/// Per-draw `f / τ` at a set of test points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendPrediction {
    pub test_points: Vec<f64>,
    pub draws: Vec<Vec<f64>>,
}

impl TrendPrediction {
    pub fn mean(&self) -> Vec<f64> {
        let l = self.draws.len() as f64;
        (0..self.test_points.len())
            .map(|i| self.draws.iter().map(|d| d[i]).sum::<f64>() / l)
            .collect()
    }

    /// Pointwise equal-tailed bands.
    pub fn bands(&self, level: f64) -> (Vec<f64>, Vec<f64>) {
        (0..self.test_points.len())
            .map(|i| {
                let col: Vec<f64> = self.draws.iter().map(|d| d[i]).collect();
                equal_tailed(&col, level)
            })
            .unzip()
    }
}

/// Noise-free GP conditional at `test` given values at `train`, with `ν` added
/// to the training diagonal only.
pub fn gp_conditional(
    train: &[f64],
    values: &[f64],
    test: &[f64],
    hyper: &GpHyper,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if train.len() != values.len() {
        return Err(Error::InvalidArgument(
            "train points and values differ in length".into(),
        ));
    }
    let k_tt = DMatrix::from_fn(train.len(), train.len(), |i, j| {
        hyper.kernel(train[i], train[j]) + if i == j { hyper.nu } else { 0.0 }
    });
    let k_st = DMatrix::from_fn(train.len(), test.len(), |i, j| hyper.kernel(train[i], test[j]));
    let k_ss = DMatrix::from_fn(test.len(), test.len(), |i, j| hyper.kernel(test[i], test[j]));
    let chol = linalg::cholesky(k_tt, "GP training covariance")?;
    let alpha = chol.solve(&DVector::from_column_slice(values));
    let mean = k_st.tr_mul(&alpha);
    let v = chol
        .l_dirty()
        .solve_lower_triangular(&k_st)
        .expect("Cholesky factor has a nonzero diagonal");
    let mut cov = k_ss - v.tr_mul(&v);
    linalg::symmetrize(&mut cov);
    Ok((mean, cov))
}

fn sample_with_jitter<R: Rng + ?Sized>(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    scale: f64,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let n = mean.len();
    let mut jitter = 1e-10 * scale;
    loop {
        let m = cov + DMatrix::identity(n, n) * jitter;
        if let Ok(chol) = linalg::cholesky(m, "predictive covariance") {
            return Ok(mean + linalg::sample_from_cov_chol(&chol, rng));
        }
        jitter *= 10.0;
        if jitter > 1e-4 * scale {
            return Err(Error::NotPositiveDefinite("predictive covariance".into()));
        }
    }
}

/// For every retained draw, samples `f / τ` at `test_points` from the GP
/// conditional given that draw's `f / τ` at `train_points` (which must be the
/// grid points `t_0..t_n`). Points are in grid time; the kernel sees them on
/// the window rescaled to `[0, 1]`, where `φ` lives.
pub fn predict_trend<R: Rng + ?Sized>(
    samples: &PosteriorSamples,
    train_points: &[f64],
    test_points: &[f64],
    rng: &mut R,
) -> Result<TrendPrediction> {
    samples.validate()?;
    if train_points.len() != samples.intervals() + 1 {
        return Err(Error::InvalidArgument(format!(
            "expected {} train points, got {}",
            samples.intervals() + 1,
            train_points.len()
        )));
    }
    let (lo, hi) = (train_points[0], train_points[train_points.len() - 1]);
    if let Some(t) = test_points.iter().find(|&&t| !(lo..=hi).contains(&t)) {
        return Err(Error::InvalidArgument(format!(
            "test point {t} outside [{lo}, {hi}]"
        )));
    }
    let grid = samples.grid;
    let train: Vec<f64> = train_points.iter().map(|&t| grid.to_window(t)).collect();
    let test: Vec<f64> = test_points.iter().map(|&t| grid.to_window(t)).collect();
    let mut draws = Vec::with_capacity(samples.len());
    for l in 0..samples.len() {
        let hyper = samples.hyper(l);
        let (mean, cov) = gp_conditional(&train, &samples.f_over_tau(l), &test, &hyper)?;
        draws.push(
            sample_with_jitter(&mean, &cov, hyper.sigma.powi(2), rng)?
                .as_slice()
                .to_vec(),
        );
    }
    Ok(TrendPrediction {
        test_points: test_points.to_vec(),
        draws,
    })
}

/// One simulated replicate per retained draw: `W ~ N(g, τ² Σ_H)` thresholded
/// at zero.
pub fn posterior_predictive_panel<R: Rng + ?Sized>(
    samples: &PosteriorSamples,
    rng: &mut R,
) -> Result<Vec<Vec<u8>>> {
    samples.validate()?;
    let n = samples.intervals();
    let mut cov = fgn_cov_matrix(n, HurstCoeff::new(samples.hurst[0])?)?;
    let mut out = Vec::with_capacity(samples.len());
    for l in 0..samples.len() {
        if cov.hurst().value() != samples.hurst[l] {
            cov = fgn_cov_matrix(n, HurstCoeff::new(samples.hurst[l])?)?;
        }
        let eps = cov.sample(rng);
        out.push(
            samples.g[l]
                .iter()
                .zip(eps.iter())
                .map(|(g, e)| u8::from(g + samples.tau[l] * e > 0.0))
                .collect(),
        );
    }
    Ok(out)
}
