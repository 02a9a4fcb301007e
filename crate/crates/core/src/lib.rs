//! Long-memory probit models for discretized binary event series.
//!
//! The crate is organised around the fractional probit (FRAP) model, in which
//! a binary indicator marks each positive increment of a latent process made of
//! a smooth trend plus fractional Brownian motion:
//!
//! - [`longmem`]: fBM / fGN covariances, exact simulation and the analytic laws
//!   of the thresholded binary process.
//! - [`hurst`]: rescaled-range and detrended-fluctuation Hurst estimators.
//! - [`mcmc`]: truncated-normal, orthant and simplex samplers, adaptive
//!   Metropolis, effective sample size and the GHK orthant estimator.
//! - [`frap`]: the single-species model, its Gibbs sampler, trend prediction and
//!   posterior predictive checks.
//! - [`hier`]: the grade-of-membership extension sharing extremal profiles
//!   across species, plus DIC model selection.
//! - [`mmpp`]: the Markov-modulated Poisson process baseline.
//! - [`io`] and [`config`]: file formats, run manifests and configuration.

// `!(x > 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod frap;
pub mod hier;
pub mod hurst;
pub mod io;
pub mod linalg;
pub mod longmem;
pub mod mcmc;
pub mod mmpp;
pub mod rng;
pub mod special;

pub use error::{Error, Result};
pub use frap::{BinaryPanel, FrapPriors, GpHyper, McmcConfig, PosteriorSamples};
pub use hier::{HierSamples, MembershipMatrix};
pub use longmem::{FgnCovMatrix, HurstCoeff, TimeGrid};
pub use mmpp::MmppParams;
