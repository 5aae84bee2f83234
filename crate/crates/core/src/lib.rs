//! Bayesian model-averaged parametric survival analysis.
//!
//! Five accelerated-failure-time families are fitted by adaptive Metropolis, their
//! marginal likelihoods estimated by bridge sampling, and combined into model-averaged
//! estimates, inclusion Bayes factors and sequential monitoring. Design analysis
//! simulates trials to calibrate Bayes factor thresholds.

pub mod bridge;
pub mod cli;
pub mod design;
pub mod ensemble;
pub mod error;
pub mod families;
pub mod map_priors;
pub mod mle;
pub mod priors;
pub mod sampler;
pub mod seeding;
pub mod sequential;
pub mod special;
pub mod target;

pub use error::{Error, Result};
