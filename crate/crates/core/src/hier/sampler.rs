use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use super::membership::MembershipMatrix;
use crate::error::{Error, Result};
use crate::frap::sampler::{
    beta_log_target, equal_tailed, g_conditional, mean, sample_inv_gamma, tau2_conditional, update_latents,
    HurstCache, SamplerDiagnostics, TrendPrior,
};
use crate::frap::{BinaryPanel, FrapPriors, GpHyper, McmcConfig};
use crate::linalg;
use crate::longmem::TimeGrid;
use crate::mcmc::{
    adaptive_rw_step, sample_simplex_gaussian_precision, AdaptiveScale, SignConstraint, TruncatedMvnGibbs,
};
use crate::special::logistic;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HierPriors {
    pub frap: FrapPriors,
    /// Scale `λ` of the Gaussian prior on each membership vector.
    pub lambda: f64,
}

impl Default for HierPriors {
    fn default() -> Self {
        HierPriors {
            frap: FrapPriors::default(),
            lambda: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HierState {
    /// Indexed by `j * R + r`.
    pub w: Vec<DVector<f64>>,
    /// `n × K` differenced profiles.
    pub g: DMatrix<f64>,
    /// `K × m` memberships.
    pub omega: DMatrix<f64>,
    pub beta: f64,
    pub tau: f64,
    pub eta: Vec<[f64; 2]>,
    pub scale_beta: AdaptiveScale,
    pub scale_eta: Vec<AdaptiveScale>,
}

impl HierState {
    pub fn hurst(&self) -> f64 {
        logistic(self.beta)
    }
}

/// Retained draws of a hierarchical fit; `g[l]` is `n × K` and `omega[l]` is
/// `K × m`, both column-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierSamples {
    pub grid: TimeGrid,
    pub classes: usize,
    pub species: usize,
    pub replicates: usize,
    pub nu: f64,
    pub hurst: Vec<f64>,
    pub tau: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
    pub phi: Vec<Vec<f64>>,
    pub g: Vec<Vec<f64>>,
    pub omega: Vec<Vec<f64>>,
    pub beta_acceptance: f64,
    pub eta_acceptance: Vec<f64>,
    pub diagnostics: SamplerDiagnostics,
}

impl HierSamples {
    pub fn len(&self) -> usize {
        self.hurst.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hurst.is_empty()
    }

    pub fn g_matrix(&self, l: usize) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.grid.n, self.classes, &self.g[l])
    }

    pub fn omega_matrix(&self, l: usize) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.classes, self.species, &self.omega[l])
    }

    pub fn mean_omega(&self) -> DMatrix<f64> {
        let mut acc = DMatrix::zeros(self.classes, self.species);
        for l in 0..self.len() {
            acc += self.omega_matrix(l);
        }
        acc / self.len() as f64
    }

    /// Posterior mean of `g / τ`.
    pub fn mean_g_over_tau(&self) -> DMatrix<f64> {
        let mut acc = DMatrix::zeros(self.grid.n, self.classes);
        for l in 0..self.len() {
            acc += self.g_matrix(l) / self.tau[l];
        }
        acc / self.len() as f64
    }

    /// Posterior mean of profile `k` as `f / τ` on `t_0..t_n`.
    pub fn mean_profile_over_tau(&self, k: usize) -> Vec<f64> {
        let g = self.mean_g_over_tau();
        let mut out = vec![0.0];
        let mut acc = 0.0;
        for v in g.column(k).iter() {
            acc += v;
            out.push(acc);
        }
        out
    }

    pub fn mean_hurst(&self) -> f64 {
        mean(&self.hurst)
    }

    pub fn hurst_interval(&self, level: f64) -> (f64, f64) {
        equal_tailed(&self.hurst, level)
    }

    pub fn mean_membership(&self) -> Result<MembershipMatrix> {
        let mut m = self.mean_omega();
        for mut col in m.column_iter_mut() {
            let s = col.sum();
            col /= s;
        }
        MembershipMatrix::new(m)
    }
}

fn validate_panels(panels: &[BinaryPanel]) -> Result<(TimeGrid, usize)> {
    let first = panels.first().ok_or(Error::EmptyPanel)?;
    for (j, p) in panels.iter().enumerate() {
        if p.grid() != first.grid() {
            return Err(Error::InvalidArgument(format!(
                "species {} uses a different grid",
                j + 1
            )));
        }
        if p.replicates() != first.replicates() {
            return Err(Error::InvalidArgument(format!(
                "species {} has {} replicates, expected {}",
                j + 1,
                p.replicates(),
                first.replicates()
            )));
        }
    }
    Ok((*first.grid(), first.replicates()))
}

/// Gibbs sampler for the membership model, reusing the single-species blocks.
pub struct HierSampler {
    state: HierState,
    constraints: Vec<SignConstraint>,
    ends: Vec<f64>,
    grid: TimeGrid,
    species: usize,
    replicates: usize,
    nu: f64,
    priors: HierPriors,
    config: McmcConfig,
    hurst: HurstCache,
    trends: Vec<TrendPrior>,
    iteration: usize,
}

impl HierSampler {
    pub fn new<R: Rng + ?Sized>(
        panels: &[BinaryPanel],
        classes: usize,
        priors: HierPriors,
        hyper_init: GpHyper,
        config: McmcConfig,
        rng: &mut R,
    ) -> Result<Self> {
        priors.frap.validate()?;
        config.validate()?;
        if classes == 0 {
            return Err(Error::InvalidArgument("need at least one class".into()));
        }
        if !(priors.lambda > 0.0) {
            return Err(Error::InvalidArgument("lambda must be positive".into()));
        }
        let (grid, replicates) = validate_panels(panels)?;
        let species = panels.len();
        let constraints: Vec<SignConstraint> = panels
            .iter()
            .flat_map(|p| p.rows().iter().map(|z| SignConstraint::from_binary(z)))
            .collect();
        // Asymmetric start: identical columns would make the classes exchangeable.
        let mut omega = DMatrix::zeros(classes, species);
        for mut col in omega.column_iter_mut() {
            for v in col.iter_mut() {
                *v = Exp1.sample(rng);
            }
            let s: f64 = col.sum();
            col /= s;
        }
        let eta0 = [hyper_init.sigma.ln(), hyper_init.phi.ln()];
        let ends = grid.window_ends();
        let trends = (0..classes)
            .map(|_| TrendPrior::new(&ends, eta0, hyper_init.nu))
            .collect::<Result<Vec<_>>>()?;
        let tau = 1.0;
        let state = HierState {
            w: constraints.iter().map(|c| c.interior_point(tau)).collect(),
            g: DMatrix::zeros(grid.n, classes),
            omega,
            beta: 0.0,
            tau,
            eta: vec![eta0; classes],
            scale_beta: config.new_scale(),
            scale_eta: vec![config.new_scale(); classes],
        };
        Ok(HierSampler {
            hurst: HurstCache::new(grid.n, 0.0)?,
            state,
            constraints,
            ends,
            grid,
            species,
            replicates,
            nu: hyper_init.nu,
            priors,
            config,
            trends,
            iteration: 0,
        })
    }

    pub fn state(&self) -> &HierState {
        &self.state
    }

    /// One sweep: `W`, each `g_k`, each `ω_j`, `β`, each `η_k`, `τ`.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let it = self.iteration;
        self.update_w(rng).map_err(|e| e.at(it, "W"))?;
        self.update_g(rng).map_err(|e| e.at(it, "g"))?;
        self.update_omega(rng).map_err(|e| e.at(it, "omega"))?;
        let quad = self.update_beta(rng).map_err(|e| e.at(it, "beta"))?;
        self.update_eta(rng).map_err(|e| e.at(it, "eta"))?;
        self.update_tau(quad, rng).map_err(|e| e.at(it, "tau"))?;
        self.iteration += 1;
        Ok(())
    }

    fn psi(&self) -> DMatrix<f64> {
        &self.state.g * &self.state.omega
    }

    fn w_bar(&self) -> DMatrix<f64> {
        let r = self.replicates;
        let mut out = DMatrix::zeros(self.grid.n, self.species);
        for j in 0..self.species {
            let mut col = DVector::zeros(self.grid.n);
            for w in &self.state.w[j * r..(j + 1) * r] {
                col += w;
            }
            out.set_column(j, &(col / r as f64));
        }
        out
    }

    fn update_w<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let tau2 = self.state.tau.powi(2);
        let gibbs = TruncatedMvnGibbs::from_precision(&self.hurst.inv / tau2)?;
        let psi: Vec<DVector<f64>> = (0..self.species)
            .map(|j| self.psi().column(j).into_owned())
            .collect();
        let means: Vec<&DVector<f64>> = (0..self.state.w.len())
            .map(|i| &psi[i / self.replicates])
            .collect();
        update_latents(
            &mut self.state.w,
            &means,
            &self.constraints,
            &gibbs,
            self.config.latent_sweeps,
            rng.next_u64(),
        )
    }

    fn update_g<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let w_bar = self.w_bar();
        for k in 0..self.state.g.ncols() {
            let omega_k = self.state.omega.row(k).transpose();
            let delta = omega_k.norm_squared();
            // W̄ minus the other classes' contribution, weighted by ω_jk.
            let mut psi_minus = &self.state.g * &self.state.omega;
            psi_minus -= self.state.g.column(k) * self.state.omega.row(k);
            let b = (&w_bar - psi_minus) * &omega_k;
            let cond = g_conditional(
                &b,
                &self.hurst.inv,
                &self.trends[k].inv,
                delta,
                self.state.tau,
                self.replicates as f64,
            )?;
            let draw = cond.sample(rng);
            self.state.g.set_column(k, &draw);
        }
        Ok(())
    }

    fn update_omega<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let tau2 = self.state.tau.powi(2);
        let k = self.state.g.ncols();
        let r = self.replicates as f64;
        let sig_g = &self.hurst.inv * &self.state.g;
        let q = self.state.g.tr_mul(&sig_g) * (r / tau2);
        let prec = &q + DMatrix::identity(k, k) / self.priors.lambda.powi(2);
        let chol = linalg::cholesky(prec.clone(), "membership precision")?;
        let lin = sig_g.tr_mul(&self.w_bar()) * (r / tau2);
        for j in 0..self.species {
            let mu = chol.solve(&lin.column(j).into_owned());
            let current = self.state.omega.column(j).into_owned();
            let next = sample_simplex_gaussian_precision(&mu, &prec, &current, rng)?;
            self.state.omega.set_column(j, &next);
        }
        Ok(())
    }

    fn residuals(&self) -> DMatrix<f64> {
        let psi = self.psi();
        let r = self.replicates;
        let mut e = DMatrix::zeros(self.grid.n, self.state.w.len());
        for (i, w) in self.state.w.iter().enumerate() {
            e.set_column(i, &(w - psi.column(i / r)));
        }
        e
    }

    fn update_beta<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<f64> {
        let resid = self.residuals();
        let tau2 = self.state.tau.powi(2);
        let sd = self.priors.frap.beta_prior_sd;
        let (current_lp, current_q) = beta_log_target(&self.hurst, &resid, tau2, sd);
        let n = self.grid.n;
        let mut proposed: Option<(HurstCache, f64)> = None;
        let out = adaptive_rw_step(
            |b| match HurstCache::new(n, b[0]) {
                Ok(cache) => {
                    let (lp, q) = beta_log_target(&cache, &resid, tau2, sd);
                    proposed = Some((cache, q));
                    lp
                }
                Err(_) => f64::NEG_INFINITY,
            },
            &[self.state.beta],
            current_lp,
            &self.state.scale_beta,
            rng,
        );
        self.state.scale_beta.observe(out.accepted);
        if out.accepted {
            let (cache, q) = proposed.expect("accepted proposal was evaluated");
            self.state.beta = out.point[0];
            self.hurst = cache;
            Ok(q)
        } else {
            Ok(current_q)
        }
    }

    fn update_eta<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let tau2 = self.state.tau.powi(2);
        let sd = self.priors.frap.eta_prior_sd;
        for k in 0..self.trends.len() {
            let g = self.state.g.column(k).into_owned();
            let current_lp = self.trends[k].log_target(&g, tau2, sd);
            let mut proposed: Option<TrendPrior> = None;
            let (ends, nu) = (&self.ends, self.nu);
            let out = adaptive_rw_step(
                |e| match TrendPrior::new(ends, [e[0], e[1]], nu) {
                    Ok(tp) => {
                        let lp = tp.log_target(&g, tau2, sd);
                        proposed = Some(tp);
                        lp
                    }
                    Err(_) => f64::NEG_INFINITY,
                },
                &self.state.eta[k],
                current_lp,
                &self.state.scale_eta[k],
                rng,
            );
            self.state.scale_eta[k].observe(out.accepted);
            if out.accepted {
                self.trends[k] = proposed.expect("accepted proposal was evaluated");
                self.state.eta[k] = self.trends[k].eta;
            }
        }
        Ok(())
    }

    fn update_tau<R: Rng + ?Sized>(&mut self, quad: f64, rng: &mut R) -> Result<()> {
        let k = self.trends.len();
        let g_quad: f64 = (0..k)
            .map(|c| linalg::inv_quad_form(&self.trends[c].chol, &self.state.g.column(c).into_owned()))
            .sum();
        let vectors = self.state.w.len() + k;
        let (shape, rate) = tau2_conditional(quad + g_quad, vectors, self.grid.n, &self.priors.frap);
        self.state.tau = sample_inv_gamma(shape, rate, rng)?.sqrt();
        Ok(())
    }

    fn diagnostics(&self) -> SamplerDiagnostics {
        let eta_rates: Vec<f64> = self.state.scale_eta.iter().map(|s| s.acceptance_rate()).collect();
        SamplerDiagnostics {
            iterations: self.config.iterations,
            burn_in: self.config.burn_in(),
            thin: self.config.thin,
            beta_acceptance: self.state.scale_beta.acceptance_rate(),
            eta_acceptance: mean(&eta_rates),
            final_beta_scale: self.state.scale_beta.scale(),
            final_eta_scale: mean(&self.state.scale_eta.iter().map(|s| s.scale()).collect::<Vec<_>>()),
        }
    }
}

/// Runs the membership-model Gibbs sampler with `classes` extremal profiles.
pub fn hier_fit<R: RngCore + ?Sized>(
    panels: &[BinaryPanel],
    classes: usize,
    priors: &HierPriors,
    hyper_init: &GpHyper,
    mcmc: &McmcConfig,
    rng: &mut R,
) -> Result<HierSamples> {
    let mut sampler = HierSampler::new(panels, classes, *priors, *hyper_init, *mcmc, rng)?;
    let mut out = HierSamples {
        grid: sampler.grid,
        classes,
        species: sampler.species,
        replicates: sampler.replicates,
        nu: hyper_init.nu,
        hurst: Vec::new(),
        tau: Vec::new(),
        sigma: Vec::new(),
        phi: Vec::new(),
        g: Vec::new(),
        omega: Vec::new(),
        beta_acceptance: 0.0,
        eta_acceptance: Vec::new(),
        diagnostics: sampler.diagnostics(),
    };
    for it in 0..mcmc.iterations {
        sampler.step(rng)?;
        if mcmc.records(it) {
            let s = sampler.state();
            if !(s.tau.is_finite() && s.beta.is_finite()) {
                return Err(Error::NonFinite("tau or beta".into()).at(it, "record"));
            }
            out.hurst.push(s.hurst());
            out.tau.push(s.tau);
            out.sigma.push(s.eta.iter().map(|e| e[0].exp()).collect());
            out.phi.push(s.eta.iter().map(|e| e[1].exp()).collect());
            out.g.push(s.g.as_slice().to_vec());
            out.omega.push(s.omega.as_slice().to_vec());
        }
    }
    out.diagnostics = sampler.diagnostics();
    out.beta_acceptance = out.diagnostics.beta_acceptance;
    out.eta_acceptance = sampler
        .state
        .scale_eta
        .iter()
        .map(|s| s.acceptance_rate())
        .collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frap::frap_simulate;
    use crate::longmem::HurstCoeff;
    use crate::rng::seeded;

    fn panels(m: usize) -> Vec<BinaryPanel> {
        let grid = TimeGrid::unit(10);
        let h = HurstCoeff::new(0.7).unwrap();
        let mut r = seeded(11);
        (0..m)
            .map(|j| {
                let f: Vec<f64> = (0..=10).map(|i| (j as f64 - 0.5) * 0.3 * i as f64).collect();
                frap_simulate(&grid, &f, h, 1.0, 4, &mut r).unwrap()
            })
            .collect()
    }

    #[test]
    fn memberships_stay_on_simplex_and_signs_hold() {
        let p = panels(3);
        let cfg = McmcConfig::with_iterations(30);
        let mut r = seeded(1);
        let mut s = HierSampler::new(&p, 2, HierPriors::default(), GpHyper::default(), cfg, &mut r).unwrap();
        for _ in 0..30 {
            s.step(&mut r).unwrap();
            for col in s.state().omega.column_iter() {
                assert!(col.iter().all(|&v| v >= 0.0));
                assert!((col.sum() - 1.0).abs() < 1e-9);
            }
            for (i, w) in s.state().w.iter().enumerate() {
                let z = &p[i / 4].rows()[i % 4];
                for (x, &zi) in w.iter().zip(z) {
                    assert_eq!(*x > 0.0, zi == 1);
                }
            }
        }
    }

    #[test]
    fn fit_is_deterministic() {
        let p = panels(2);
        let cfg = McmcConfig::with_iterations(20);
        let run = |seed| {
            hier_fit(
                &p,
                2,
                &HierPriors::default(),
                &GpHyper::default(),
                &cfg,
                &mut seeded(seed),
            )
            .unwrap()
        };
        let a = run(4);
        assert_eq!(a, run(4));
        assert_eq!(a.len(), 10);
        assert_eq!(a.omega[0].len(), 4);
        assert!(a.mean_membership().is_ok());
    }

    #[test]
    fn single_class_forces_unit_membership() {
        let p = panels(2);
        let cfg = McmcConfig::with_iterations(10);
        let s = hier_fit(
            &p,
            1,
            &HierPriors::default(),
            &GpHyper::default(),
            &cfg,
            &mut seeded(2),
        )
        .unwrap();
        assert!(s.omega.iter().flatten().all(|&v| v == 1.0));
    }

    #[test]
    fn rejects_mismatched_panels() {
        let mut p = panels(2);
        let grid = TimeGrid::unit(10);
        p.push(BinaryPanel::new(vec![vec![0; 10]], grid).unwrap());
        let cfg = McmcConfig::with_iterations(10);
        assert!(hier_fit(
            &p,
            2,
            &HierPriors::default(),
            &GpHyper::default(),
            &cfg,
            &mut seeded(2)
        )
        .is_err());
    }
}
