use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::longmem::{fgn_cov_matrix, HurstCoeff, TimeGrid};
use crate::special::norm_cdf;

/// `R` replicate binary sequences over a common grid of `n` intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryPanel {
    rows: Vec<Vec<u8>>,
    grid: TimeGrid,
}

impl BinaryPanel {
    pub fn new(rows: Vec<Vec<u8>>, grid: TimeGrid) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidArgument(
                "panel needs at least one replicate".into(),
            ));
        }
        let n = rows[0].len();
        if n < 2 {
            return Err(Error::InvalidArgument(
                "panel needs at least two intervals".into(),
            ));
        }
        if n != grid.n {
            return Err(Error::InvalidArgument(format!(
                "panel has {n} intervals but grid has {}",
                grid.n
            )));
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::RaggedPanel {
                    row: r + 1,
                    found: row.len(),
                    expected: n,
                });
            }
            if let Some(c) = row.iter().position(|&v| v > 1) {
                return Err(Error::PanelEntry {
                    row: r + 1,
                    col: c + 1,
                    msg: format!("entry {} is not binary", row[c]),
                });
            }
        }
        Ok(BinaryPanel { rows, grid })
    }

    /// Panel on the unit grid `0, 1, …, n`.
    pub fn on_unit_grid(rows: Vec<Vec<u8>>) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        BinaryPanel::new(rows, TimeGrid::unit(n.max(1)))
    }

    pub fn replicates(&self) -> usize {
        self.rows.len()
    }

    pub fn intervals(&self) -> usize {
        self.grid.n
    }

    pub fn rows(&self) -> &[Vec<u8>] {
        &self.rows
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn with_grid(mut self, grid: TimeGrid) -> Result<Self> {
        if grid.n != self.grid.n {
            return Err(Error::InvalidArgument("grid length does not match panel".into()));
        }
        self.grid = grid;
        Ok(self)
    }

    pub fn event_rate(&self) -> f64 {
        let total: usize = self.rows.iter().flatten().map(|&v| v as usize).sum();
        total as f64 / (self.replicates() * self.intervals()) as f64
    }
}

/// Squared-exponential kernel hyperparameters (unit-τ convention).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpHyper {
    pub sigma: f64,
    pub phi: f64,
    pub nu: f64,
}

impl GpHyper {
    pub const DEFAULT_NU: f64 = 0.001;

    pub fn new(sigma: f64, phi: f64, nu: f64) -> Result<Self> {
        if !(sigma > 0.0 && phi > 0.0 && nu >= 0.0) || !(sigma.is_finite() && phi.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "kernel needs sigma > 0, phi > 0, nu >= 0; got ({sigma}, {phi}, {nu})"
            )));
        }
        Ok(GpHyper { sigma, phi, nu })
    }

    pub fn from_log(log_sigma: f64, log_phi: f64, nu: f64) -> Self {
        GpHyper {
            sigma: log_sigma.exp(),
            phi: log_phi.exp(),
            nu,
        }
    }

    pub fn kernel(&self, s: f64, t: f64) -> f64 {
        let d = s - t;
        self.sigma * self.sigma * (-d * d / (2.0 * self.phi * self.phi)).exp()
    }
}

impl Default for GpHyper {
    fn default() -> Self {
        GpHyper {
            sigma: 1.0,
            phi: 1.0,
            nu: GpHyper::DEFAULT_NU,
        }
    }
}

/// Lower bidiagonal first-difference matrix with `A[0, 0] = 1`.
pub fn build_difference_matrix(n: usize) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        a[(i, i)] = 1.0;
        if i > 0 {
            a[(i, i - 1)] = -1.0;
        }
    }
    a
}

/// Kernel matrix with `ν` on the diagonal. Fails if it is not positive definite.
pub fn gp_kernel_matrix(points: &[f64], hyper: &GpHyper) -> Result<DMatrix<f64>> {
    let n = points.len();
    let mut k = DMatrix::from_fn(n, n, |i, j| hyper.kernel(points[i], points[j]));
    for i in 0..n {
        k[(i, i)] += hyper.nu;
    }
    linalg::cholesky(k.clone(), "GP kernel matrix")?;
    Ok(k)
}

/// Unit-τ prior covariance of the differenced trend, `A K Aᵀ + ν I`, with `K`
/// the jitter-free kernel on the interval end-points.
pub fn prior_cov_g(points: &[f64], hyper: &GpHyper) -> DMatrix<f64> {
    let n = points.len();
    let k = |i: usize, j: usize| hyper.kernel(points[i], points[j]);
    // Second differences of the kernel; row/column 0 are not differenced.
    DMatrix::from_fn(n, n, |i, j| {
        let mut v = k(i, j);
        if i > 0 {
            v -= k(i - 1, j);
        }
        if j > 0 {
            v -= k(i, j - 1);
        }
        if i > 0 && j > 0 {
            v += k(i - 1, j - 1);
        }
        if i == j {
            v += hyper.nu;
        }
        v
    })
}

/// The five benchmark trends on `[0, 90]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Trend {
    F1,
    F2,
    F3,
    F4,
    F5,
}

impl Trend {
    pub fn from_id(id: u8) -> Result<Self> {
        match id {
            1 => Ok(Trend::F1),
            2 => Ok(Trend::F2),
            3 => Ok(Trend::F3),
            4 => Ok(Trend::F4),
            5 => Ok(Trend::F5),
            _ => Err(Error::InvalidArgument(format!(
                "trend id must be 1..=5, got {id}"
            ))),
        }
    }

    pub fn eval(self, t: f64) -> f64 {
        use std::f64::consts::PI;
        match self {
            Trend::F1 => (4.0 * PI * t / 90.0).sin(),
            Trend::F2 => 5.0 / (1.0 + (-2.5 * (t - 45.0) / 15.0).exp()),
            Trend::F3 => -2.0 * ((t - 45.0) / 45.0).powi(2) + 2.0,
            Trend::F4 => -1.2 * ((t - 45.0) / 45.0) + 0.5 * (3.0 * PI * t / 90.0).cos() - 1.7,
            Trend::F5 => 0.1 * Trend::F1.eval(t) * Trend::F2.eval(t).ln(),
        }
    }

    pub fn on_grid(self, grid: &TimeGrid) -> Vec<f64> {
        grid.points().into_iter().map(|t| self.eval(t)).collect()
    }
}

impl std::str::FromStr for Trend {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let id = s
            .trim()
            .trim_start_matches(['f', 'F'])
            .parse::<u8>()
            .map_err(|_| Error::InvalidArgument(format!("unknown trend {s:?}")))?;
        Trend::from_id(id)
    }
}

/// Simulates `R` replicates with `Z[r, i] = 1{f(t_i) - f(t_{i-1}) + ε_i > 0}`
/// and `ε ~ N(0, τ² Σ_H)`. Only increments of `f_values` matter.
pub fn frap_simulate<R: Rng + ?Sized>(
    grid: &TimeGrid,
    f_values: &[f64],
    h: HurstCoeff,
    tau: f64,
    replicates: usize,
    rng: &mut R,
) -> Result<BinaryPanel> {
    if f_values.len() != grid.n + 1 {
        return Err(Error::InvalidArgument(format!(
            "trend needs {} values on the grid, got {}",
            grid.n + 1,
            f_values.len()
        )));
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("tau must be positive, got {tau}")));
    }
    if replicates == 0 {
        return Err(Error::InvalidArgument("need at least one replicate".into()));
    }
    let cov = fgn_cov_matrix(grid.n, h)?;
    let incs: Vec<f64> = f_values.windows(2).map(|w| w[1] - w[0]).collect();
    let rows = (0..replicates)
        .map(|_| {
            let eps = cov.sample(rng);
            incs.iter()
                .zip(eps.iter())
                .map(|(d, e)| u8::from(d + tau * e > 0.0))
                .collect()
        })
        .collect();
    BinaryPanel::new(rows, *grid)
}

/// `p_i = Φ(u(t_i) - u(t_{i-1}))` for `u = f / τ` given at `t_0..t_n`.
pub fn marginal_prob(f_over_tau: &[f64]) -> Vec<f64> {
    f_over_tau.windows(2).map(|w| norm_cdf(w[1] - w[0])).collect()
}

pub(crate) fn cumsum(g: &DVector<f64>) -> Vec<f64> {
    let mut acc = 0.0;
    g.iter()
        .map(|v| {
            acc += v;
            acc
        })
        .collect()
}
