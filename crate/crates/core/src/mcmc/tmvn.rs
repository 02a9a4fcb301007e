use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::truncnorm::sample_truncnorm;
use crate::error::{Error, Result};
use crate::linalg::{self, Chol};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    /// Coordinate strictly positive.
    Positive,
    /// Coordinate at most zero.
    NonPositive,
}

impl Sign {
    pub fn admits(self, x: f64) -> bool {
        match self {
            Sign::Positive => x > 0.0,
            Sign::NonPositive => x <= 0.0,
        }
    }

    fn bounds(self) -> (f64, f64) {
        match self {
            Sign::Positive => (0.0, f64::INFINITY),
            Sign::NonPositive => (f64::NEG_INFINITY, 0.0),
        }
    }
}

/// Per-coordinate half-lines; the event set of a binary sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignConstraint {
    signs: Vec<Sign>,
}

impl SignConstraint {
    pub fn new(signs: Vec<Sign>) -> Self {
        SignConstraint { signs }
    }

    /// `1 -> Positive`, `0 -> NonPositive`.
    pub fn from_binary(z: &[u8]) -> Self {
        SignConstraint {
            signs: z
                .iter()
                .map(|&b| if b == 1 { Sign::Positive } else { Sign::NonPositive })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }

    pub fn signs(&self) -> &[Sign] {
        &self.signs
    }

    pub fn is_satisfied(&self, x: &[f64]) -> bool {
        x.len() == self.signs.len() && self.signs.iter().zip(x).all(|(s, &v)| s.admits(v))
    }

    /// A point inside the orthant with coordinates `±magnitude`.
    pub fn interior_point(&self, magnitude: f64) -> DVector<f64> {
        DVector::from_iterator(
            self.len(),
            self.signs.iter().map(|s| match s {
                Sign::Positive => magnitude,
                Sign::NonPositive => -magnitude,
            }),
        )
    }
}

/// Systematic-scan Gibbs sampler for a Gaussian restricted to an orthant,
/// parameterised by its precision matrix.
#[derive(Debug, Clone)]
pub struct TruncatedMvnGibbs {
    precision: DMatrix<f64>,
}

impl TruncatedMvnGibbs {
    pub fn from_precision(precision: DMatrix<f64>) -> Result<Self> {
        if !precision.is_square() {
            return Err(Error::InvalidArgument("precision must be square".into()));
        }
        if precision.diagonal().iter().any(|&d| !(d > 0.0) || !d.is_finite()) {
            return Err(Error::NotPositiveDefinite(
                "precision has a non-positive diagonal".into(),
            ));
        }
        Ok(TruncatedMvnGibbs { precision })
    }

    pub fn from_cov_chol(chol: &Chol) -> Result<Self> {
        Self::from_precision(linalg::inverse_from_chol(chol))
    }

    pub fn dim(&self) -> usize {
        self.precision.nrows()
    }

    /// Runs `sweeps` full coordinate scans in place. `state` must satisfy
    /// `constraint` on entry and does on exit.
    pub fn sweep<R: Rng + ?Sized>(
        &self,
        mean: &DVector<f64>,
        constraint: &SignConstraint,
        state: &mut DVector<f64>,
        sweeps: usize,
        rng: &mut R,
    ) -> Result<()> {
        let n = self.dim();
        if mean.len() != n || state.len() != n || constraint.len() != n {
            return Err(Error::InvalidArgument(format!(
                "dimension mismatch: precision {n}, mean {}, state {}, constraint {}",
                mean.len(),
                state.len(),
                constraint.len()
            )));
        }
        if !constraint.is_satisfied(state.as_slice()) {
            return Err(Error::InfeasibleState("initial state outside the orthant".into()));
        }
        let mut resid = &*state - mean;
        for _ in 0..sweeps {
            for i in 0..n {
                let col = self.precision.column(i);
                let qii = col[i];
                let s = col.dot(&resid) - qii * resid[i];
                let cond_mean = mean[i] - s / qii;
                let sd = qii.sqrt().recip();
                let sign = constraint.signs[i];
                let (lo, hi) = sign.bounds();
                let mut x = sample_truncnorm(cond_mean, sd, lo, hi, rng)?;
                if sign == Sign::Positive && x <= 0.0 {
                    x = f64::MIN_POSITIVE;
                }
                state[i] = x;
                resid[i] = x - mean[i];
            }
        }
        Ok(())
    }
}

/// Gibbs draws from `N(mean, L Lᵀ)` restricted to the orthant `constraint`.
pub fn gibbs_truncated_mvn<R: Rng + ?Sized>(
    mean: &DVector<f64>,
    cov_chol: &Chol,
    constraint: &SignConstraint,
    state: &DVector<f64>,
    sweeps: usize,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let sampler = TruncatedMvnGibbs::from_cov_chol(cov_chol)?;
    let mut out = state.clone();
    sampler.sweep(mean, constraint, &mut out, sweeps, rng)?;
    Ok(out)
}
