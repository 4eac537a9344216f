//! Bayesian hierarchical modelling of biathlon shooting performance.
//!
//! The crate covers the whole pipeline for bout-level hit counts:
//!
//! * [`data`]: the sessions CSV format, validation reports and synthetic seasons;
//! * [`explore`]: accuracy tables, favorite formats, stage deviations,
//!   Spearman correlations and complete-linkage clustering;
//! * [`model`]: the binomial-logit model with random-walk stage effects and
//!   sum-to-zero athlete effects, its log density and analytic gradient;
//! * [`sampler`]: adaptive Metropolis-within-Gibbs chains, convergence
//!   diagnostics and the draws file format;
//! * [`predict`]: posterior summaries on the odds-ratio scale and posterior
//!   predictive checks;
//! * [`validate`]: quadrature, finite-difference and simulation-based
//!   calibration oracles;
//! * [`cli`]: the `biathlon-bayes` command line.

pub mod cli;
pub mod data;
pub mod error;
pub mod explore;
pub mod model;
pub mod predict;
pub mod sampler;
pub mod stats;
pub mod validate;

pub use error::{Error, Result};
