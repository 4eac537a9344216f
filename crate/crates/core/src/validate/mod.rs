//! Correctness oracles: quadrature for one-parameter models, finite
//! differences for the gradient, and simulation-based calibration.

mod gradcheck;
mod quadrature;
mod sbc;
mod synthetic;

pub use self::gradcheck::{finite_difference_check, gradient_check, random_dataset, relative_error, step, GradCheckReport};
pub use self::quadrature::{
    quadrature_posterior, quadrature_posterior_with, QuadratureOptions, QuadratureResult, QUANTILE_LEVELS,
};
pub use self::sbc::{
    sbc, sbc_with, Fitter, ReplicationFailure, ReplicationSeeds, SamplerFitter, SbcConfig, SbcParameter, SbcReport,
};
pub use self::synthetic::{mean_shift_fixture, oracle_problem, paper_season, realistic_truth, season_design};
