use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sampler::HierSamples;
use crate::error::{Error, Result};
use crate::frap::BinaryPanel;
use crate::longmem::{fgn_cov_matrix, HurstCoeff};
use crate::mcmc::{orthant_log_prob_ghk, SignConstraint};
use crate::rng;

const PROB_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DicOptions {
    /// GHK draws per replicate and evaluation. 256 keeps the standard error of
    /// each log-probability well below one deviance unit at `n ≈ 100`.
    pub ghk_draws: usize,
    /// Evaluate the deviance on at most this many evenly spaced draws.
    pub max_samples: Option<usize>,
    /// Seed of the GHK streams, shared by every evaluation.
    pub seed: u64,
}

impl Default for DicOptions {
    fn default() -> Self {
        DicOptions {
            ghk_draws: 256,
            max_samples: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DicReport {
    pub dic: f64,
    pub mean_deviance: f64,
    pub deviance_at_mean: f64,
    pub effective_parameters: f64,
    pub samples_used: usize,
    /// Orthant probabilities floored at 1e-300 before the log.
    pub floored: usize,
}

/// `D = -2 Σ_j Σ_r log P(W ∈ E_{jr})` for `W ~ N(Ψ_j / τ, Σ_H)`, with
/// `psi_over_tau` holding one column per species.
pub fn deviance(
    psi_over_tau: &DMatrix<f64>,
    h: HurstCoeff,
    panels: &[BinaryPanel],
    ghk_draws: usize,
    seed: u64,
) -> Result<(f64, usize)> {
    if psi_over_tau.ncols() != panels.len() {
        return Err(Error::InvalidArgument(
            "one mean column per species required".into(),
        ));
    }
    let n = psi_over_tau.nrows();
    let cov = fgn_cov_matrix(n, h)?;
    let jobs: Vec<(usize, usize)> = panels
        .iter()
        .enumerate()
        .flat_map(|(j, p)| (0..p.replicates()).map(move |r| (j, r)))
        .collect();
    let logs: Vec<f64> = jobs
        .par_iter()
        .enumerate()
        .map(|(idx, &(j, r))| {
            let mean: DVector<f64> = psi_over_tau.column(j).into_owned();
            let c = SignConstraint::from_binary(&panels[j].rows()[r]);
            let mut stream = rng::stream(seed, idx as u64);
            orthant_log_prob_ghk(&mean, cov.cholesky(), &c, ghk_draws, &mut stream)
        })
        .collect();
    let floor = PROB_FLOOR.ln();
    let mut floored = 0;
    let mut total = 0.0;
    for lp in logs {
        if !(lp >= floor) {
            floored += 1;
            total += floor;
        } else {
            total += lp;
        }
    }
    Ok((-2.0 * total, floored))
}

/// `2 D̄ − D(θ̄)`, with `θ̄` the posterior means of `g / τ`, `Ω` and `H`.
/// Every evaluation reuses the same GHK random numbers.
pub fn dic(samples: &HierSamples, panels: &[BinaryPanel], options: &DicOptions) -> Result<DicReport> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no posterior samples".into()));
    }
    if options.ghk_draws == 0 {
        return Err(Error::InvalidArgument("ghk_draws must be positive".into()));
    }
    let len = samples.len();
    let picks: Vec<usize> = match options.max_samples {
        Some(k) if k > 0 && k < len => (0..k).map(|i| i * len / k).collect(),
        _ => (0..len).collect(),
    };
    let mut sum = 0.0;
    let mut floored = 0;
    for &l in &picks {
        let psi = samples.g_matrix(l) * samples.omega_matrix(l) / samples.tau[l];
        let (d, f) = deviance(
            &psi,
            HurstCoeff::new(samples.hurst[l])?,
            panels,
            options.ghk_draws,
            options.seed,
        )?;
        sum += d;
        floored += f;
    }
    let d_bar = sum / picks.len() as f64;
    let psi_bar = samples.mean_g_over_tau() * samples.mean_omega();
    let (d_hat, f) = deviance(
        &psi_bar,
        HurstCoeff::new(samples.mean_hurst())?,
        panels,
        options.ghk_draws,
        options.seed,
    )?;
    floored += f;
    if floored > 0 {
        log::warn!("dic: {floored} orthant probabilities floored at {PROB_FLOOR:e}");
    }
    Ok(DicReport {
        dic: 2.0 * d_bar - d_hat,
        mean_deviance: d_bar,
        deviance_at_mean: d_hat,
        effective_parameters: d_bar - d_hat,
        samples_used: picks.len(),
        floored,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frap::sampler::SamplerDiagnostics;
    use crate::longmem::{fgn_autocov, TimeGrid};

    fn point_mass(g: Vec<f64>, h: f64, copies: usize) -> HierSamples {
        let n = g.len();
        HierSamples {
            grid: TimeGrid::unit(n),
            classes: 1,
            species: 1,
            replicates: 1,
            nu: 0.001,
            hurst: vec![h; copies],
            tau: vec![1.0; copies],
            sigma: vec![vec![1.0]; copies],
            phi: vec![vec![1.0]; copies],
            g: vec![g; copies],
            omega: vec![vec![1.0]; copies],
            beta_acceptance: 0.0,
            eta_acceptance: vec![0.0],
            diagnostics: SamplerDiagnostics {
                iterations: copies,
                burn_in: 0,
                thin: 1,
                beta_acceptance: 0.0,
                eta_acceptance: 0.0,
                final_beta_scale: 0.5,
                final_eta_scale: 0.5,
            },
        }
    }

    #[test]
    fn point_mass_dic_equals_plugin_deviance() {
        let s = point_mass(vec![0.3, -0.2, 0.1], 0.7, 5);
        let p = vec![BinaryPanel::on_unit_grid(vec![vec![1, 0, 1]]).unwrap()];
        let r = dic(&s, &p, &DicOptions::default()).unwrap();
        assert!((r.dic - r.deviance_at_mean).abs() < 1e-9);
        assert_eq!(r.floored, 0);
    }

    #[test]
    fn bivariate_orthant_deviance() {
        // Zero mean: P(both positive) = 1/4 + asin(ρ)/(2π).
        let h = HurstCoeff::new(0.8).unwrap();
        let rho = fgn_autocov(1, h);
        let p_same = 0.25 + rho.asin() / (2.0 * std::f64::consts::PI);
        let exact = -2.0 * p_same.ln();
        let panel = vec![BinaryPanel::on_unit_grid(vec![vec![1, 1]]).unwrap()];
        let (d, _) = deviance(&DMatrix::zeros(2, 1), h, &panel, 20_000, 3).unwrap();
        assert!((d - exact).abs() < 0.01, "{d} vs {exact}");
    }
}
