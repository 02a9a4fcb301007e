//! Single-species fractional probit model.
//!
//! Binary indicators `Z[r, i]` mark positive increments of `f(t) + B_H(t)`.
//! Inference augments each replicate with a latent Gaussian vector
//! `W_r ~ N(g, τ² Σ_H)` restricted to the sign pattern of `Z_r`, where
//! `g = A f` is the differenced trend and `A` the first-difference matrix.
//!
//! Throughout, the Gaussian-process prior on `g` is written as `τ² C_g` with
//! the unit-τ covariance `C_g = A K Aᵀ + ν I` (see [`prior_cov_g`]), so only
//! `f / τ` is identified. The samplers evaluate `K` on the observation
//! window rescaled to `[0, 1]`, so `φ` is a fraction of the window length.

mod model;
mod predict;
pub(crate) mod sampler;
mod stats;

pub use model::{
    build_difference_matrix, frap_simulate, gp_kernel_matrix, marginal_prob, prior_cov_g, BinaryPanel,
    GpHyper, Trend,
};
pub use predict::{gp_conditional, posterior_predictive_panel, predict_trend, TrendPrediction};
pub use sampler::{
    frap_fit, full_conditional_g, tau2_conditional, FrapPriors, FrapSampler, FrapState, GaussianConditional,
    McmcConfig, PosteriorSamples, SamplerDiagnostics,
};
pub use stats::{
    mean_series_conditional, remse, scale_statistics, scale_statistics_panel, smooth_curve, ScaleStat,
};
