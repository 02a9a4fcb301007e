use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{cumsum, prior_cov_g, BinaryPanel, GpHyper};
use crate::error::{Error, Result};
use crate::linalg::{self, Chol};
use crate::longmem::{fgn_cov_matrix, FgnCovMatrix, HurstCoeff, TimeGrid};
use crate::mcmc::{
    adaptive_rw_step, AdaptiveScale, SignConstraint, TruncatedMvnGibbs, DEFAULT_ADAPT_INTERVAL,
    DEFAULT_INITIAL_SCALE, DEFAULT_TARGET_ACCEPT,
};
use crate::rng;
use crate::special::logistic;

/// Inverse-gamma prior on `τ²` and Gaussian prior scales for `β` and `η`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrapPriors {
    pub a_tau: f64,
    pub b_tau: f64,
    pub beta_prior_sd: f64,
    pub eta_prior_sd: f64,
}

impl Default for FrapPriors {
    fn default() -> Self {
        FrapPriors {
            a_tau: 2.0,
            b_tau: 1.0,
            beta_prior_sd: 1.0,
            eta_prior_sd: 1.0,
        }
    }
}

impl FrapPriors {
    pub fn validate(&self) -> Result<()> {
        let ok = [self.a_tau, self.b_tau, self.beta_prior_sd, self.eta_prior_sd]
            .iter()
            .all(|v| *v > 0.0 && v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "priors must be positive: {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcConfig {
    pub iterations: usize,
    /// Defaults to half of `iterations`.
    pub burn_in: Option<usize>,
    pub thin: usize,
    pub adapt_interval: usize,
    pub target_accept: f64,
    pub initial_scale: f64,
    pub latent_sweeps: usize,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            iterations: 4000,
            burn_in: None,
            thin: 1,
            adapt_interval: DEFAULT_ADAPT_INTERVAL,
            target_accept: DEFAULT_TARGET_ACCEPT,
            initial_scale: DEFAULT_INITIAL_SCALE,
            latent_sweeps: 2,
        }
    }
}

impl McmcConfig {
    pub fn with_iterations(iterations: usize) -> Self {
        McmcConfig {
            iterations,
            ..McmcConfig::default()
        }
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in.unwrap_or(self.iterations / 2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations <= self.burn_in() {
            return Err(Error::InvalidArgument(format!(
                "iterations ({}) must exceed burn-in ({})",
                self.iterations,
                self.burn_in()
            )));
        }
        if self.thin == 0 || self.adapt_interval == 0 || self.latent_sweeps == 0 {
            return Err(Error::InvalidArgument(
                "thin, adapt_interval and latent_sweeps must be positive".into(),
            ));
        }
        if !(self.initial_scale > 0.0) || !(0.0 < self.target_accept && self.target_accept < 1.0) {
            return Err(Error::InvalidArgument(
                "initial_scale must be positive and target_accept in (0, 1)".into(),
            ));
        }
        Ok(())
    }

    pub(crate) fn new_scale(&self) -> AdaptiveScale {
        AdaptiveScale::new(self.initial_scale, self.adapt_interval, self.target_accept)
    }

    pub(crate) fn records(&self, iteration: usize) -> bool {
        iteration >= self.burn_in() && (iteration - self.burn_in()) % self.thin == 0
    }
}

/// Full state of the single-species sampler.
#[derive(Debug, Clone)]
pub struct FrapState {
    pub w: Vec<DVector<f64>>,
    pub g: DVector<f64>,
    pub beta: f64,
    pub tau: f64,
    /// `(log σ, log φ)`.
    pub eta: [f64; 2],
    pub scale_beta: AdaptiveScale,
    pub scale_eta: AdaptiveScale,
}

impl FrapState {
    pub fn hurst(&self) -> f64 {
        logistic(self.beta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerDiagnostics {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub beta_acceptance: f64,
    pub eta_acceptance: f64,
    pub final_beta_scale: f64,
    pub final_eta_scale: f64,
}

/// Retained draws of a single-species fit. `g[l]` is the differenced trend of
/// draw `l`; only `g / τ` and `H` are identified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSamples {
    pub grid: TimeGrid,
    pub replicates: usize,
    pub nu: f64,
    pub hurst: Vec<f64>,
    pub tau: Vec<f64>,
    pub sigma: Vec<f64>,
    pub phi: Vec<f64>,
    pub g: Vec<Vec<f64>>,
    pub diagnostics: SamplerDiagnostics,
}

impl PosteriorSamples {
    pub fn len(&self) -> usize {
        self.hurst.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hurst.is_empty()
    }

    pub fn intervals(&self) -> usize {
        self.grid.n
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.len();
        if l == 0 {
            return Err(Error::InvalidArgument("no posterior samples".into()));
        }
        if [self.tau.len(), self.sigma.len(), self.phi.len(), self.g.len()]
            .iter()
            .any(|&k| k != l)
        {
            return Err(Error::InvalidArgument("sample columns differ in length".into()));
        }
        if self.g.iter().any(|g| g.len() != self.grid.n) {
            return Err(Error::InvalidArgument(
                "trend draw length differs from grid".into(),
            ));
        }
        for i in 0..l {
            if !(self.hurst[i] > 0.0 && self.hurst[i] < 1.0) {
                return Err(Error::InvalidHurst(self.hurst[i]));
            }
            if !(self.tau[i] > 0.0 && self.sigma[i] > 0.0 && self.phi[i] > 0.0) {
                return Err(Error::InvalidArgument(format!("non-positive scale in draw {i}")));
            }
        }
        Ok(())
    }

    pub fn hyper(&self, l: usize) -> GpHyper {
        GpHyper {
            sigma: self.sigma[l],
            phi: self.phi[l],
            nu: self.nu,
        }
    }

    /// `f / τ` on `t_0..t_n` for draw `l`, with `f(t_0) = 0`.
    pub fn f_over_tau(&self, l: usize) -> Vec<f64> {
        let g = DVector::from_column_slice(&self.g[l]);
        let mut out = Vec::with_capacity(g.len() + 1);
        out.push(0.0);
        out.extend(cumsum(&g).into_iter().map(|v| v / self.tau[l]));
        out
    }

    pub fn mean_f_over_tau(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.grid.n + 1];
        for l in 0..self.len() {
            for (a, v) in acc.iter_mut().zip(self.f_over_tau(l)) {
                *a += v;
            }
        }
        acc.iter().map(|a| a / self.len() as f64).collect()
    }

    pub fn mean_hurst(&self) -> f64 {
        mean(&self.hurst)
    }

    /// Equal-tailed credible interval for `H`.
    pub fn hurst_interval(&self, level: f64) -> (f64, f64) {
        equal_tailed(&self.hurst, level)
    }

    /// Whether the equal-tailed interval at `level` contains `H = 1/2`.
    pub fn interval_contains_half(&self, level: f64) -> bool {
        let (lo, hi) = self.hurst_interval(level);
        lo <= 0.5 && 0.5 <= hi
    }
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Linear-interpolation quantile of unsorted data.
pub(crate) fn quantile(values: &[f64], p: f64) -> f64 {
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let pos = p.clamp(0.0, 1.0) * (s.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    s[lo] + (pos - lo as f64) * (s[hi] - s[lo])
}

pub(crate) fn equal_tailed(values: &[f64], level: f64) -> (f64, f64) {
    let a = (1.0 - level) / 2.0;
    (quantile(values, a), quantile(values, 1.0 - a))
}

/// Gaussian full conditional stored through its precision factor.
#[derive(Debug, Clone)]
pub struct GaussianConditional {
    pub mean: DVector<f64>,
    pub precision_chol: Chol,
}

impl GaussianConditional {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        &self.mean + linalg::sample_from_precision_chol(&self.precision_chol, rng)
    }

    pub fn log_density(&self, x: &DVector<f64>) -> f64 {
        let d = x - &self.mean;
        let z = self.precision_chol.l().tr_mul(&d);
        let n = x.len() as f64;
        -0.5 * z.norm_squared() + 0.5 * linalg::log_det(&self.precision_chol)
            - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        linalg::inverse_from_chol(&self.precision_chol)
    }
}

/// Conditional of `g` given the replicate mean `W̄`: precision
/// `(R Σ_H⁻¹ + C_g⁻¹) / τ²`, mean `(R Σ_H⁻¹ + C_g⁻¹)⁻¹ R Σ_H⁻¹ W̄`.
pub fn full_conditional_g(
    w_bar: &DVector<f64>,
    sigma_h: &DMatrix<f64>,
    c_g: &DMatrix<f64>,
    tau: f64,
    replicates: usize,
) -> Result<GaussianConditional> {
    let sigma_inv = linalg::inverse_from_chol(&linalg::cholesky(sigma_h.clone(), "Sigma_H")?);
    let cg_inv = linalg::inverse_from_chol(&linalg::cholesky(c_g.clone(), "C_g")?);
    g_conditional(w_bar, &sigma_inv, &cg_inv, 1.0, tau, replicates as f64)
}

/// Shared form for single- and multi-species updates: precision
/// `(weight · R · Σ⁻¹ + C⁻¹) / τ²` and linear term `R Σ⁻¹ b / τ²`.
pub(crate) fn g_conditional(
    b: &DVector<f64>,
    sigma_inv: &DMatrix<f64>,
    cg_inv: &DMatrix<f64>,
    weight: f64,
    tau: f64,
    replicates: f64,
) -> Result<GaussianConditional> {
    let tau2 = tau * tau;
    let mut prec = sigma_inv * (weight * replicates) + cg_inv;
    linalg::symmetrize(&mut prec);
    let rhs = sigma_inv * b * replicates;
    let unit = linalg::cholesky(prec.clone(), "g precision")?;
    let mean = unit.solve(&rhs);
    let precision_chol = linalg::cholesky(prec / tau2, "g precision")?;
    Ok(GaussianConditional { mean, precision_chol })
}

/// Inverse-gamma conditional `(shape, rate)` of `τ²` given the summed
/// quadratic forms of `vectors` independent `n`-dimensional Gaussian blocks.
pub fn tau2_conditional(quad_sum: f64, vectors: usize, n: usize, priors: &FrapPriors) -> (f64, f64) {
    (
        (n * vectors) as f64 / 2.0 + priors.a_tau,
        0.5 * quad_sum + priors.b_tau,
    )
}

pub(crate) fn sample_inv_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> Result<f64> {
    let gamma = Gamma::new(shape, 1.0).map_err(|e| Error::InvalidArgument(format!("gamma({shape}): {e}")))?;
    let x = rate / gamma.sample(rng);
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(Error::NonFinite(format!("inverse-gamma draw {x}")))
    }
}

/// `Σ_H`, its factor and inverse at one value of `β`.
#[derive(Debug, Clone)]
pub(crate) struct HurstCache {
    pub beta: f64,
    pub cov: FgnCovMatrix,
    pub inv: DMatrix<f64>,
}

impl HurstCache {
    pub fn new(n: usize, beta: f64) -> Result<Self> {
        let cov = fgn_cov_matrix(n, HurstCoeff::new(logistic(beta))?)?;
        Ok(Self::from_cov(beta, cov))
    }

    pub fn from_cov(beta: f64, cov: FgnCovMatrix) -> Self {
        let inv = cov.precision();
        HurstCache { beta, cov, inv }
    }

    /// `Σ_r e_rᵀ Σ_H⁻¹ e_r` for residual columns `e_r`.
    pub fn quad_sum(&self, resid: &DMatrix<f64>) -> f64 {
        self.cov
            .cholesky()
            .l_dirty()
            .solve_lower_triangular(resid)
            .expect("Cholesky factor has a nonzero diagonal")
            .norm_squared()
    }
}

/// Log target for `β`: Gaussian log-likelihood of `cols` residual vectors
/// scaled by `τ²`, plus the normal prior. Returns the quadratic sum too.
pub(crate) fn beta_log_target(
    cache: &HurstCache,
    resid: &DMatrix<f64>,
    tau2: f64,
    prior_sd: f64,
) -> (f64, f64) {
    let q = cache.quad_sum(resid);
    let lp = -0.5 * resid.ncols() as f64 * cache.cov.log_det()
        - 0.5 * q / tau2
        - 0.5 * (cache.beta / prior_sd).powi(2);
    (lp, q)
}

/// Unit-τ prior covariance factor and inverse for one `η`.
#[derive(Debug, Clone)]
pub(crate) struct TrendPrior {
    pub eta: [f64; 2],
    pub chol: Chol,
    pub inv: DMatrix<f64>,
}

impl TrendPrior {
    pub fn new(ends: &[f64], eta: [f64; 2], nu: f64) -> Result<Self> {
        let hyper = GpHyper::from_log(eta[0], eta[1], nu);
        let chol = linalg::cholesky(prior_cov_g(ends, &hyper), "trend prior covariance")?;
        let inv = linalg::inverse_from_chol(&chol);
        Ok(TrendPrior { eta, chol, inv })
    }

    /// `log N(g; 0, τ² C_g(η))` plus the `η` prior.
    pub fn log_target(&self, g: &DVector<f64>, tau2: f64, prior_sd: f64) -> f64 {
        let n = g.len() as f64;
        -0.5 * (linalg::log_det(&self.chol) + n * tau2.ln())
            - 0.5 * linalg::inv_quad_form(&self.chol, g) / tau2
            - 0.5 * (self.eta[0].powi(2) + self.eta[1].powi(2)) / prior_sd.powi(2)
    }
}

/// Draws each latent vector from its orthant-truncated conditional, one
/// ChaCha stream per vector derived from `base`.
pub(crate) fn update_latents(
    w: &mut [DVector<f64>],
    means: &[&DVector<f64>],
    constraints: &[SignConstraint],
    gibbs: &TruncatedMvnGibbs,
    sweeps: usize,
    base: u64,
) -> Result<()> {
    w.par_iter_mut().enumerate().try_for_each(|(i, wi)| {
        let mut stream = rng::stream(base, i as u64);
        gibbs.sweep(means[i], &constraints[i], wi, sweeps, &mut stream)
    })?;
    for (wi, c) in w.iter().zip(constraints) {
        if !c.is_satisfied(wi.as_slice()) {
            return Err(Error::InfeasibleState("latent sign constraint violated".into()));
        }
    }
    Ok(())
}

/// Algorithm-1 sampler with cached factorisations.
pub struct FrapSampler {
    state: FrapState,
    constraints: Vec<SignConstraint>,
    ends: Vec<f64>,
    grid: TimeGrid,
    nu: f64,
    priors: FrapPriors,
    config: McmcConfig,
    hurst: HurstCache,
    trend: TrendPrior,
    iteration: usize,
}

impl FrapSampler {
    pub fn new(
        panel: &BinaryPanel,
        priors: FrapPriors,
        hyper_init: GpHyper,
        config: McmcConfig,
    ) -> Result<Self> {
        priors.validate()?;
        config.validate()?;
        GpHyper::new(hyper_init.sigma, hyper_init.phi, hyper_init.nu)?;
        let n = panel.intervals();
        let constraints: Vec<SignConstraint> = panel
            .rows()
            .iter()
            .map(|z| SignConstraint::from_binary(z))
            .collect();
        let tau = 1.0;
        let state = FrapState {
            w: constraints.iter().map(|c| c.interior_point(tau)).collect(),
            g: DVector::zeros(n),
            beta: 0.0,
            tau,
            eta: [hyper_init.sigma.ln(), hyper_init.phi.ln()],
            scale_beta: config.new_scale(),
            scale_eta: config.new_scale(),
        };
        let ends = panel.grid().window_ends();
        let hurst = HurstCache::new(n, state.beta)?;
        let trend = TrendPrior::new(&ends, state.eta, hyper_init.nu)?;
        Ok(FrapSampler {
            state,
            constraints,
            ends,
            grid: *panel.grid(),
            nu: hyper_init.nu,
            priors,
            config,
            hurst,
            trend,
            iteration: 0,
        })
    }

    pub fn state(&self) -> &FrapState {
        &self.state
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// One full sweep: `W`, `g`, `β`, `τ`, `η`.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let it = self.iteration;
        self.update_w(rng).map_err(|e| e.at(it, "W"))?;
        self.update_g(rng).map_err(|e| e.at(it, "g"))?;
        let quad = self.update_beta(rng).map_err(|e| e.at(it, "beta"))?;
        self.update_tau(quad, rng).map_err(|e| e.at(it, "tau"))?;
        self.update_eta(rng).map_err(|e| e.at(it, "eta"))?;
        self.iteration += 1;
        Ok(())
    }

    fn update_w<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let tau2 = self.state.tau.powi(2);
        let gibbs = TruncatedMvnGibbs::from_precision(&self.hurst.inv / tau2)?;
        let means = vec![&self.state.g; self.state.w.len()];
        update_latents(
            &mut self.state.w,
            &means,
            &self.constraints,
            &gibbs,
            self.config.latent_sweeps,
            rng.next_u64(),
        )
    }

    fn w_bar(&self) -> DVector<f64> {
        let mut w_bar = DVector::zeros(self.grid.n);
        for w in &self.state.w {
            w_bar += w;
        }
        w_bar / self.state.w.len() as f64
    }

    fn update_g<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let cond = g_conditional(
            &self.w_bar(),
            &self.hurst.inv,
            &self.trend.inv,
            1.0,
            self.state.tau,
            self.state.w.len() as f64,
        )?;
        self.state.g = cond.sample(rng);
        Ok(())
    }

    fn residuals(&self) -> DMatrix<f64> {
        let mut e = DMatrix::zeros(self.grid.n, self.state.w.len());
        for (j, w) in self.state.w.iter().enumerate() {
            e.set_column(j, &(w - &self.state.g));
        }
        e
    }

    /// Returns the residual quadratic sum under the accepted `Σ_H`.
    fn update_beta<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<f64> {
        let resid = self.residuals();
        let tau2 = self.state.tau.powi(2);
        let sd = self.priors.beta_prior_sd;
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

    fn update_tau<R: Rng + ?Sized>(&mut self, quad: f64, rng: &mut R) -> Result<()> {
        let g_quad = linalg::inv_quad_form(&self.trend.chol, &self.state.g);
        let r = self.state.w.len();
        let (shape, rate) = tau2_conditional(quad + g_quad, r + 1, self.grid.n, &self.priors);
        self.state.tau = sample_inv_gamma(shape, rate, rng)?.sqrt();
        Ok(())
    }

    fn update_eta<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let tau2 = self.state.tau.powi(2);
        let sd = self.priors.eta_prior_sd;
        let g = &self.state.g;
        let current_lp = self.trend.log_target(g, tau2, sd);
        let mut proposed: Option<TrendPrior> = None;
        let (ends, nu) = (&self.ends, self.nu);
        let out = adaptive_rw_step(
            |e| match TrendPrior::new(ends, [e[0], e[1]], nu) {
                Ok(tp) => {
                    let lp = tp.log_target(g, tau2, sd);
                    proposed = Some(tp);
                    lp
                }
                Err(_) => f64::NEG_INFINITY,
            },
            &self.state.eta,
            current_lp,
            &self.state.scale_eta,
            rng,
        );
        self.state.scale_eta.observe(out.accepted);
        if out.accepted {
            self.trend = proposed.expect("accepted proposal was evaluated");
            self.state.eta = self.trend.eta;
        }
        Ok(())
    }

    fn diagnostics(&self) -> SamplerDiagnostics {
        SamplerDiagnostics {
            iterations: self.config.iterations,
            burn_in: self.config.burn_in(),
            thin: self.config.thin,
            beta_acceptance: self.state.scale_beta.acceptance_rate(),
            eta_acceptance: self.state.scale_eta.acceptance_rate(),
            final_beta_scale: self.state.scale_beta.scale(),
            final_eta_scale: self.state.scale_eta.scale(),
        }
    }
}

/// Runs the single-species Gibbs sampler and returns the post-burn-in draws.
///
/// Latent replicate updates run in parallel on per-replicate RNG streams, so
/// the output depends only on `rng`, never on the thread count.
pub fn frap_fit<R: RngCore + ?Sized>(
    panel: &BinaryPanel,
    priors: &FrapPriors,
    hyper_init: &GpHyper,
    mcmc: &McmcConfig,
    rng: &mut R,
) -> Result<PosteriorSamples> {
    let mut sampler = FrapSampler::new(panel, *priors, *hyper_init, *mcmc)?;
    let keep = (mcmc.iterations - mcmc.burn_in()).div_ceil(mcmc.thin);
    let mut out = PosteriorSamples {
        grid: *panel.grid(),
        replicates: panel.replicates(),
        nu: hyper_init.nu,
        hurst: Vec::with_capacity(keep),
        tau: Vec::with_capacity(keep),
        sigma: Vec::with_capacity(keep),
        phi: Vec::with_capacity(keep),
        g: Vec::with_capacity(keep),
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
            out.sigma.push(s.eta[0].exp());
            out.phi.push(s.eta[1].exp());
            out.g.push(s.g.as_slice().to_vec());
        }
    }
    out.diagnostics = sampler.diagnostics();
    log::debug!(
        "frap_fit: {} draws, beta acceptance {:.3}, eta acceptance {:.3}",
        out.len(),
        out.diagnostics.beta_acceptance,
        out.diagnostics.eta_acceptance
    );
    Ok(out)
}
