//! Gaussian restricted to the probability simplex.
//!
//! Writes `X = J Y + α` with `J = (I_{K-1}, -1)ᵀ` and `α = e_K`, so `Y` lives
//! in `{Y ≥ 0, 1ᵀY ≤ 1}`. The induced precision of `Y` is `Jᵀ P J` and its
//! linear term `Jᵀ P (μ - α)`; each coordinate of `Y` given the rest is a
//! univariate normal on a bounded interval.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::truncnorm::sample_truncnorm;
use crate::error::{Error, Result};
use crate::linalg;

const SIMPLEX_TOL: f64 = 1e-9;

pub fn sample_simplex_gaussian<R: Rng + ?Sized>(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    state: &DVector<f64>,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let chol = linalg::cholesky(cov.clone(), "simplex Gaussian covariance")?;
    let precision = linalg::inverse_from_chol(&chol);
    sample_simplex_gaussian_precision(mean, &precision, state, rng)
}

/// One Gibbs scan over the `K - 1` free coordinates, given the precision of
/// the untruncated Gaussian.
pub fn sample_simplex_gaussian_precision<R: Rng + ?Sized>(
    mean: &DVector<f64>,
    precision: &DMatrix<f64>,
    state: &DVector<f64>,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let k = mean.len();
    if precision.nrows() != k || precision.ncols() != k || state.len() != k {
        return Err(Error::InvalidArgument(
            "simplex sampler dimension mismatch".into(),
        ));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("simplex needs K >= 1".into()));
    }
    if state.iter().any(|&x| x < 0.0 || !x.is_finite()) || (state.sum() - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::InfeasibleState(format!(
            "membership {state:?} is not on the simplex"
        )));
    }
    if k == 1 {
        return Ok(DVector::from_element(1, 1.0));
    }
    let d = k - 1;
    // P_Y = Jᵀ P J, b = Jᵀ P (μ - α).
    let mut j = DMatrix::zeros(k, d);
    for i in 0..d {
        j[(i, i)] = 1.0;
        j[(d, i)] = -1.0;
    }
    let py = j.transpose() * precision * &j;
    let mut shifted = mean.clone();
    shifted[d] -= 1.0;
    let b = j.transpose() * (precision * shifted);

    let mut y: Vec<f64> = state.iter().take(d).copied().collect();
    for i in 0..d {
        let pii = py[(i, i)];
        if !(pii > 0.0) {
            return Err(Error::NotPositiveDefinite("reduced simplex precision".into()));
        }
        let mut lin = b[i];
        let mut others = 0.0;
        for (m, &ym) in y.iter().enumerate() {
            if m != i {
                lin -= py[(i, m)] * ym;
                others += ym;
            }
        }
        let upper = 1.0 - others;
        y[i] = if upper <= 0.0 {
            0.0
        } else {
            sample_truncnorm(lin / pii, pii.sqrt().recip(), 0.0, upper, rng)?
        };
    }
    let last = (1.0 - y.iter().sum::<f64>()).max(0.0);
    let mut out = DVector::from_vec(y);
    out = out.push(last);
    Ok(out)
}
