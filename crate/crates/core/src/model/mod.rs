//! Hierarchical binomial-logit model of bout hit counts.
//!
//! For bout `i` shot by athlete `s` at stage `t` in position `x` during a race
//! of format `z`:
//!
//! ```text
//! hits_i ~ Binomial(5, p_i)
//! logit(p_i) = mu[t] + beta[s, t] + gamma[s, x] + omega[s, z]
//! ```
//!
//! `mu` and each athlete's `beta` trajectory follow Gaussian random walks
//! started at zero; `gamma` and `omega` are iid Gaussian. The second argument
//! of every normal is a standard deviation. Each of the four standard
//! deviations has a half-normal(0, c) prior and is sampled on the log scale.
//!
//! Identifiability constraints are imposed by hard reparameterization:
//!
//! * `sum_s beta[s, t] = 0`: athletes `1..S-1` are free, the last athlete's
//!   effect is the negative column sum. The random-walk prior is placed on
//!   the `S-1` free trajectories only.
//! * `gamma[s, prone] = -gamma[s, standing]`: one free scalar per athlete.
//! * `sum_z omega[s, z] = 0`: the first `Z-1` race formats are free.

pub(crate) mod density;
mod state;

pub use self::density::{
    grad_log_posterior, half_normal_log_sigma, linear_predictor, log_likelihood, log_posterior, log_prior,
    normal_logpdf, random_walk_logpdf, Observations, Posterior,
};
pub use self::state::{Clamp, Effects, Layout, ModelSpec, ParameterState, SigmaKind};

/// Numerically stable `ln(1 + e^x)`.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Logistic function.
pub fn inv_logit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}
