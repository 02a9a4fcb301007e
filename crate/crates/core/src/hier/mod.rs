//! Grade-of-membership extension: `m` species share `K` extremal trend
//! profiles, species `j` following the convex combination `g ω_j`, with one
//! Hurst coefficient and one `τ` across species.

mod dic;
mod membership;
mod sampler;

pub use dic::{dic, DicOptions, DicReport};
pub use membership::{
    combined_trend, hier_simulate, match_columns, simulate_membership, ColumnMatch, MembershipMatrix,
};
pub use sampler::{hier_fit, HierPriors, HierSampler, HierSamples, HierState};
