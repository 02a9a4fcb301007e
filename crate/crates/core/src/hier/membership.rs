use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frap::{frap_simulate, BinaryPanel};
use crate::longmem::{HurstCoeff, TimeGrid};
use crate::rng;

const SIMPLEX_TOL: f64 = 1e-12;

/// `K × m` matrix whose columns are species memberships on the simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipMatrix {
    omega: DMatrix<f64>,
}

impl MembershipMatrix {
    pub fn new(omega: DMatrix<f64>) -> Result<Self> {
        if omega.nrows() == 0 || omega.ncols() == 0 {
            return Err(Error::InvalidArgument("membership matrix is empty".into()));
        }
        for (j, col) in omega.column_iter().enumerate() {
            if col.iter().any(|&v| !(v >= 0.0)) || (col.sum() - 1.0).abs() > SIMPLEX_TOL {
                return Err(Error::InvalidArgument(format!(
                    "membership column {} is not on the simplex",
                    j + 1
                )));
            }
        }
        Ok(MembershipMatrix { omega })
    }

    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let k = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != k) {
            return Err(Error::InvalidArgument(
                "membership columns differ in length".into(),
            ));
        }
        let flat: Vec<f64> = columns.iter().flatten().copied().collect();
        MembershipMatrix::new(DMatrix::from_column_slice(k, columns.len(), &flat))
    }

    pub fn classes(&self) -> usize {
        self.omega.nrows()
    }

    pub fn species(&self) -> usize {
        self.omega.ncols()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.omega.column(j).iter().copied().collect()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.omega
    }
}

/// Logistic-normal memberships for three classes: each species gets a uniform
/// label, `(X₁, X₂) ~ N(μ_label, I)` with means `(3,0)`, `(0,3)`, `(0,0)`, and
/// `ω = (e^{X₁}, e^{X₂}, 1) / (1 + e^{X₁} + e^{X₂})`.
pub fn simulate_membership(m: usize, k: usize, seed: u64) -> Result<MembershipMatrix> {
    if k != 3 {
        return Err(Error::InvalidArgument(format!(
            "the logistic-normal generator is defined for K = 3, got {k}"
        )));
    }
    if m == 0 {
        return Err(Error::InvalidArgument("need at least one species".into()));
    }
    let mut r = rng::seeded(seed);
    let columns: Vec<Vec<f64>> = (0..m)
        .map(|_| {
            let (m1, m2) = match r.random_range(0..3) {
                0 => (3.0, 0.0),
                1 => (0.0, 3.0),
                _ => (0.0, 0.0),
            };
            let x1: f64 = m1 + r.sample::<f64, _>(StandardNormal);
            let x2: f64 = m2 + r.sample::<f64, _>(StandardNormal);
            logistic_normal(x1, x2)
        })
        .collect();
    MembershipMatrix::from_columns(&columns)
}

pub(crate) fn logistic_normal(x1: f64, x2: f64) -> Vec<f64> {
    // Shift by the max for overflow safety; the ratios are unchanged.
    let top = x1.max(x2).max(0.0);
    let (a, b, c) = ((x1 - top).exp(), (x2 - top).exp(), (-top).exp());
    let s = a + b + c;
    vec![a / s, b / s, c / s]
}

/// `Σ_k ω_k h_k` evaluated pointwise.
pub fn combined_trend(profiles: &[Vec<f64>], omega: &[f64]) -> Result<Vec<f64>> {
    if profiles.len() != omega.len() || profiles.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "{} profiles for {} weights",
            profiles.len(),
            omega.len()
        )));
    }
    let n = profiles[0].len();
    if profiles.iter().any(|p| p.len() != n) {
        return Err(Error::InvalidArgument("profiles differ in length".into()));
    }
    Ok((0..n)
        .map(|i| profiles.iter().zip(omega).map(|(p, w)| w * p[i]).sum())
        .collect())
}

/// One panel per species, each simulated on its combined trend with shared
/// `H` and `τ`.
pub fn hier_simulate<R: Rng + ?Sized>(
    grid: &TimeGrid,
    profiles: &[Vec<f64>],
    omega: &MembershipMatrix,
    h: HurstCoeff,
    tau: f64,
    replicates: usize,
    rng: &mut R,
) -> Result<Vec<BinaryPanel>> {
    if profiles.len() != omega.classes() {
        return Err(Error::InvalidArgument(format!(
            "{} profiles for {} classes",
            profiles.len(),
            omega.classes()
        )));
    }
    (0..omega.species())
        .map(|j| {
            let f = combined_trend(profiles, &omega.column(j))?;
            frap_simulate(grid, &f, h, tau, replicates, rng)
        })
        .collect()
}

/// Class relabelling of an estimate against a reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMatch {
    /// Row `perm[k]` of the estimate corresponds to class `k` of the truth.
    pub perm: Vec<usize>,
    pub total_abs_error: f64,
    pub mean_abs_error: f64,
}

/// Exhaustive search over class permutations minimising total absolute error.
pub fn match_columns(estimate: &DMatrix<f64>, truth: &DMatrix<f64>) -> Result<ColumnMatch> {
    if estimate.shape() != truth.shape() {
        return Err(Error::InvalidArgument(
            "membership matrices differ in shape".into(),
        ));
    }
    let k = truth.nrows();
    if k > 6 {
        return Err(Error::InvalidArgument(format!(
            "exhaustive matching limited to K <= 6, got {k}"
        )));
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    for perm in permutations(k) {
        let err: f64 = (0..k)
            .map(|c| (estimate.row(perm[c]) - truth.row(c)).abs().sum())
            .sum();
        if best.as_ref().map_or(true, |(_, e)| err < *e) {
            best = Some((perm, err));
        }
    }
    let (perm, total) = best.expect("at least one permutation");
    Ok(ColumnMatch {
        perm,
        total_abs_error: total,
        mean_abs_error: total / truth.len() as f64,
    })
}

/// All permutations of `0..k` in lexicographic order.
fn permutations(k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        let Some(i) = (1..k).rev().find(|&i| cur[i - 1] < cur[i]) else {
            return out;
        };
        let j = (i..k).rev().find(|&j| cur[j] > cur[i - 1]).expect("pivot exists");
        cur.swap(i - 1, j);
        cur[i..].reverse();
    }
}
