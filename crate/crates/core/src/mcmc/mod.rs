//! Sampling primitives shared by the single-species and hierarchical samplers.

mod ess;
mod ghk;
mod metropolis;
mod simplex;
mod tmvn;
mod truncnorm;

pub use ess::{autocorrelation, ess, DEFAULT_MAX_LAG};
pub use ghk::{orthant_log_prob_ghk, orthant_prob_ghk};
pub use metropolis::{
    adapt_scale, adaptive_rw_step, metropolis_accept, rw_propose, AdaptiveScale, RwOutcome,
    DEFAULT_ADAPT_INTERVAL, DEFAULT_INITIAL_SCALE, DEFAULT_TARGET_ACCEPT,
};
pub use simplex::{sample_simplex_gaussian, sample_simplex_gaussian_precision};
pub use tmvn::{gibbs_truncated_mvn, Sign, SignConstraint, TruncatedMvnGibbs};
pub use truncnorm::{sample_truncnorm, standard_truncnorm};
