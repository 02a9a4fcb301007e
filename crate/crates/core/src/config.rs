//! Run configuration: TOML file sections with serde defaults.
//!
//! Callers layer command-line flags over a loaded file, which is itself layered
//! over [`RunConfig::default`].

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::frap::{FrapPriors, GpHyper, McmcConfig};
use crate::hier::{DicOptions, HierPriors};
use crate::mcmc::{DEFAULT_ADAPT_INTERVAL, DEFAULT_INITIAL_SCALE, DEFAULT_MAX_LAG, DEFAULT_TARGET_ACCEPT};
use crate::mmpp::MmppFitOptions;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McmcSection {
    pub iterations: usize,
    pub burn_in: Option<usize>,
    pub thin: usize,
    pub seed: u64,
    pub adapt_interval: usize,
    pub target_accept: f64,
    pub initial_scale: f64,
    pub latent_sweeps: usize,
    pub ess_max_lag: usize,
}

impl Default for McmcSection {
    fn default() -> Self {
        McmcSection {
            iterations: 4000,
            burn_in: None,
            thin: 1,
            seed: 1,
            adapt_interval: DEFAULT_ADAPT_INTERVAL,
            target_accept: DEFAULT_TARGET_ACCEPT,
            initial_scale: DEFAULT_INITIAL_SCALE,
            latent_sweeps: 2,
            ess_max_lag: DEFAULT_MAX_LAG,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorSection {
    pub a_tau: f64,
    pub b_tau: f64,
    pub lambda: f64,
    pub beta_prior_sd: f64,
    pub eta_prior_sd: f64,
}

impl Default for PriorSection {
    fn default() -> Self {
        let p = FrapPriors::default();
        PriorSection {
            a_tau: p.a_tau,
            b_tau: p.b_tau,
            lambda: 1.0,
            beta_prior_sd: p.beta_prior_sd,
            eta_prior_sd: p.eta_prior_sd,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    /// Number of extremal profiles for hierarchical fits.
    pub classes: usize,
    pub nu: f64,
    pub sigma_init: f64,
    pub phi_init: f64,
    pub delta: f64,
    pub ghk_draws: usize,
    pub dic_max_samples: Option<usize>,
    pub mmpp_states: usize,
    pub mmpp_starts: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            classes: 2,
            nu: GpHyper::DEFAULT_NU,
            sigma_init: 1.0,
            phi_init: 1.0,
            delta: 1.0,
            ghk_draws: 256,
            dic_max_samples: None,
            mmpp_states: 2,
            mmpp_starts: 8,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IoSection {
    pub input: Option<String>,
    pub output: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mcmc: McmcSection,
    pub priors: PriorSection,
    pub model: ModelSection,
    pub io: IoSection,
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        RunConfig::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serialises to TOML")
    }

    /// SHA-256 of the canonical TOML rendering.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        if self.mcmc.iterations <= self.mcmc.burn_in.unwrap_or(self.mcmc.iterations / 2) {
            return err("iterations must exceed burn_in".into());
        }
        self.mcmc_config()
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        self.frap_priors()
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        let m = &self.model;
        if !(self.priors.lambda > 0.0) || !(m.nu >= 0.0) || !(m.sigma_init > 0.0) || !(m.phi_init > 0.0) {
            return err("lambda, sigma_init, phi_init must be positive and nu >= 0".into());
        }
        if !(m.delta > 0.0) || m.ghk_draws == 0 || m.classes == 0 || m.mmpp_starts == 0 {
            return err("delta, ghk_draws, classes and mmpp_starts must be positive".into());
        }
        if self.mcmc.ess_max_lag == 0 {
            return err("ess_max_lag must be positive".into());
        }
        Ok(())
    }

    pub fn mcmc_config(&self) -> McmcConfig {
        McmcConfig {
            iterations: self.mcmc.iterations,
            burn_in: self.mcmc.burn_in,
            thin: self.mcmc.thin,
            adapt_interval: self.mcmc.adapt_interval,
            target_accept: self.mcmc.target_accept,
            initial_scale: self.mcmc.initial_scale,
            latent_sweeps: self.mcmc.latent_sweeps,
        }
    }

    pub fn frap_priors(&self) -> FrapPriors {
        FrapPriors {
            a_tau: self.priors.a_tau,
            b_tau: self.priors.b_tau,
            beta_prior_sd: self.priors.beta_prior_sd,
            eta_prior_sd: self.priors.eta_prior_sd,
        }
    }

    pub fn hier_priors(&self) -> HierPriors {
        HierPriors {
            frap: self.frap_priors(),
            lambda: self.priors.lambda,
        }
    }

    pub fn gp_hyper(&self) -> GpHyper {
        GpHyper {
            sigma: self.model.sigma_init,
            phi: self.model.phi_init,
            nu: self.model.nu,
        }
    }

    pub fn dic_options(&self) -> DicOptions {
        DicOptions {
            ghk_draws: self.model.ghk_draws,
            max_samples: self.model.dic_max_samples,
            seed: self.mcmc.seed,
        }
    }

    pub fn mmpp_options(&self) -> MmppFitOptions {
        MmppFitOptions {
            starts: self.model.mmpp_starts,
            seed: self.mcmc.seed,
            ..MmppFitOptions::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_table() {
        let c = RunConfig::default();
        assert_eq!(c.model.nu, 0.001);
        assert_eq!(c.mcmc.adapt_interval, 50);
        assert_eq!(c.mcmc.target_accept, 0.3);
        assert_eq!(c.mcmc.initial_scale, 0.5);
        assert_eq!(c.mcmc.ess_max_lag, 30);
        assert_eq!(c.mcmc.latent_sweeps, 2);
        assert_eq!(c.mcmc.thin, 1);
        assert_eq!(c.mcmc.burn_in, None);
        assert_eq!(c.priors.beta_prior_sd, 1.0);
        assert_eq!(c.priors.eta_prior_sd, 1.0);
        assert_eq!(c.priors.lambda, 1.0);
        assert_eq!(c.model.ghk_draws, 256);
        assert_eq!(c.model.mmpp_starts, 8);
        c.validate().unwrap();
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let c = RunConfig::from_toml_str("[mcmc]\niterations = 100\nseed = 7\n").unwrap();
        assert_eq!(c.mcmc.iterations, 100);
        assert_eq!(c.mcmc.seed, 7);
        assert_eq!(c.mcmc.adapt_interval, 50);
        assert_eq!(c.model, ModelSection::default());
    }

    #[test]
    fn rejects_bad_files() {
        assert!(RunConfig::from_toml_str("[mcmc]\niterations = 10\nburn_in = 10\n").is_err());
        assert!(RunConfig::from_toml_str("[mcmc]\nbogus = 1\n").is_err());
        assert!(RunConfig::from_toml_str("[priors]\na_tau = -1.0\n").is_err());
    }

    #[test]
    fn round_trip_and_hash() {
        let c = RunConfig::default();
        let back = RunConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(c, back);
        assert_eq!(c.hash(), back.hash());
        let mut d = c.clone();
        d.mcmc.seed = 2;
        assert_ne!(c.hash(), d.hash());
        assert_eq!(c.hash().len(), 64);
    }
}
