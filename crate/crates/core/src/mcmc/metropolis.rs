use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub const DEFAULT_INITIAL_SCALE: f64 = 0.5;
pub const DEFAULT_ADAPT_INTERVAL: usize = 50;
pub const DEFAULT_TARGET_ACCEPT: f64 = 0.3;

/// Random-walk proposal scale with windowed acceptance tracking.
///
/// Every `adapt_interval` iterations the scale is multiplied by `exp(l^-1/2)`
/// when the window acceptance rate exceeds `target_accept`, and divided by the
/// same factor otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveScale {
    pub log_scale: f64,
    pub accept_count: usize,
    pub iter: usize,
    pub adapt_interval: usize,
    pub target_accept: f64,
    /// Acceptances over the whole run, for diagnostics.
    pub total_accepted: usize,
}

impl Default for AdaptiveScale {
    fn default() -> Self {
        AdaptiveScale::new(
            DEFAULT_INITIAL_SCALE,
            DEFAULT_ADAPT_INTERVAL,
            DEFAULT_TARGET_ACCEPT,
        )
    }
}

impl AdaptiveScale {
    pub fn new(initial_scale: f64, adapt_interval: usize, target_accept: f64) -> Self {
        assert!(initial_scale > 0.0, "proposal scale must be positive");
        assert!(adapt_interval > 0, "adapt interval must be positive");
        AdaptiveScale {
            log_scale: initial_scale.ln(),
            accept_count: 0,
            iter: 0,
            adapt_interval,
            target_accept,
            total_accepted: 0,
        }
    }

    pub fn scale(&self) -> f64 {
        self.log_scale.exp()
    }

    /// Records the outcome of iteration `iter + 1`.
    pub fn record(&mut self, accepted: bool) {
        self.iter += 1;
        if accepted {
            self.accept_count += 1;
            self.total_accepted += 1;
        }
    }

    /// Records the outcome and applies the adaptation rule.
    pub fn observe(&mut self, accepted: bool) {
        self.record(accepted);
        *self = adapt_scale(*self);
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.iter == 0 {
            0.0
        } else {
            self.total_accepted as f64 / self.iter as f64
        }
    }
}

/// Applies the window rule at the current iteration count; a no-op unless the
/// count is a positive multiple of the adaptation interval.
pub fn adapt_scale(mut scale: AdaptiveScale) -> AdaptiveScale {
    if scale.iter == 0 || scale.iter % scale.adapt_interval != 0 {
        return scale;
    }
    let rate = scale.accept_count as f64 / scale.adapt_interval as f64;
    let step = (scale.iter as f64).powf(-0.5);
    if rate > scale.target_accept {
        scale.log_scale += step;
    } else {
        scale.log_scale -= step;
    }
    scale.accept_count = 0;
    scale
}

/// Independent Gaussian perturbation of every coordinate.
pub fn rw_propose<R: Rng + ?Sized>(current: &[f64], scale: f64, rng: &mut R) -> Vec<f64> {
    current
        .iter()
        .map(|&x| x + scale * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Metropolis acceptance for a symmetric proposal; non-finite proposals are
/// always rejected.
pub fn metropolis_accept<R: Rng + ?Sized>(proposed_lp: f64, current_lp: f64, rng: &mut R) -> bool {
    if !proposed_lp.is_finite() {
        return false;
    }
    let log_ratio = proposed_lp - current_lp;
    log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio
}

#[derive(Debug, Clone, PartialEq)]
pub struct RwOutcome {
    pub point: Vec<f64>,
    pub log_target: f64,
    pub accepted: bool,
}

/// One random-walk Metropolis step at the current proposal scale.
pub fn adaptive_rw_step<F, R>(
    mut log_target: F,
    current: &[f64],
    current_lp: f64,
    scale: &AdaptiveScale,
    rng: &mut R,
) -> RwOutcome
where
    F: FnMut(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    let proposal = rw_propose(current, scale.scale(), rng);
    let lp = log_target(&proposal);
    if metropolis_accept(lp, current_lp, rng) {
        RwOutcome {
            point: proposal,
            log_target: lp,
            accepted: true,
        }
    } else {
        RwOutcome {
            point: current.to_vec(),
            log_target: current_lp,
            accepted: false,
        }
    }
}
