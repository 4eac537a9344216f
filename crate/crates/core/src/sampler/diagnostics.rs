//! Split-R̂ and effective sample size.

use serde::{Deserialize, Serialize};

use super::PosteriorSamples;
use crate::error::{Error, Result};
use crate::stats::{mean, quantile_sorted, variance};

/// Split-R̂ over per-chain series: each chain is cut in half (dropping the
/// middle draw when odd) and the between/within variance ratio is taken over
/// the halves.
pub fn split_rhat_of(chains: &[Vec<f64>]) -> Result<f64> {
    let n_min = chains.iter().map(Vec::len).min().unwrap_or(0);
    let half = n_min / 2;
    if chains.is_empty() || half < 2 {
        return Err(Error::InsufficientDraws { needed: 4, got: n_min });
    }
    let mut splits: Vec<&[f64]> = Vec::with_capacity(2 * chains.len());
    for c in chains {
        let c = &c[..n_min];
        splits.push(&c[..half]);
        splits.push(&c[n_min - half..]);
    }
    let n = half as f64;
    let means: Vec<f64> = splits.iter().map(|s| mean(s)).collect();
    let w = splits.iter().map(|s| variance(s)).sum::<f64>() / splits.len() as f64;
    if !(w > 0.0) {
        return Err(Error::Undefined("split-R-hat with zero within-chain variance".into()));
    }
    let b = n * variance(&means);
    let var_plus = (n - 1.0) / n * w + b / n;
    Ok((var_plus / w).sqrt())
}

/// Effective sample size of one chain: `N / tau` with the integrated
/// autocorrelation time truncated at the first non-positive pair sum.
fn chain_ess(x: &[f64]) -> Result<f64> {
    let n = x.len();
    let m = mean(x);
    let centered: Vec<f64> = x.iter().map(|v| v - m).collect();
    let autocov = |k: usize| -> f64 { (0..n - k).map(|t| centered[t] * centered[t + k]).sum::<f64>() / n as f64 };
    let c0 = autocov(0);
    if !(c0 > 0.0) {
        return Err(Error::Undefined("effective sample size of a constant series".into()));
    }
    let mut tau = -1.0;
    let mut k = 0;
    while k + 1 < n {
        let pair = (autocov(k) + autocov(k + 1)) / c0;
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        k += 2;
    }
    Ok(n as f64 / tau)
}

/// ESS summed over chains.
pub fn ess_of(chains: &[Vec<f64>]) -> Result<f64> {
    let total: usize = chains.iter().map(Vec::len).sum();
    if total < 10 || chains.iter().any(|c| c.len() < 4) {
        return Err(Error::InsufficientDraws { needed: 10, got: total });
    }
    chains.iter().map(|c| chain_ess(c)).sum()
}

pub fn split_rhat(samples: &PosteriorSamples, param: usize) -> Result<f64> {
    check_param(samples, param)?;
    split_rhat_of(&samples.chains_of(param))
}

pub fn ess(samples: &PosteriorSamples, param: usize) -> Result<f64> {
    check_param(samples, param)?;
    ess_of(&samples.chains_of(param))
}

fn check_param(samples: &PosteriorSamples, param: usize) -> Result<()> {
    if param >= samples.dim() {
        return Err(Error::OutOfRange(format!("parameter {param} of {}", samples.dim())));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub q975: f64,
    /// `None` for clamped coordinates.
    pub rhat: Option<f64>,
    pub ess: Option<f64>,
}

/// Per-parameter summary over free coordinates that are not clamped.
pub fn summarize(samples: &PosteriorSamples) -> Result<Vec<ParamSummary>> {
    (0..samples.dim())
        .map(|j| {
            let chains = samples.chains_of(j);
            let mut pooled = chains.concat();
            let m = mean(&pooled);
            let sd = if pooled.len() > 1 { variance(&pooled).sqrt() } else { 0.0 };
            pooled.sort_by(f64::total_cmp);
            let (rhat, ess) = if samples.spec.is_clamped(j) {
                (None, None)
            } else {
                (Some(split_rhat_of(&chains)?), Some(ess_of(&chains)?))
            };
            Ok(ParamSummary {
                name: samples.param_names[j].clone(),
                mean: m,
                sd,
                q025: quantile_sorted(&pooled, 0.025),
                q975: quantile_sorted(&pooled, 0.975),
                rhat,
                ess,
            })
        })
        .collect()
}
