//! Grid quadrature for models with a single free coordinate.
//!
//! Written against the data only: the linear predictor, likelihood and prior
//! are recomputed here rather than taken from the model module.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SHOTS_PER_BOUT};
use crate::error::{Error, Result};
use crate::model::ModelSpec;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureOptions {
    pub lower: f64,
    pub upper: f64,
    /// Simpson nodes; must be odd.
    pub nodes: usize,
    /// Largest accepted change in the mean when the grid is doubled.
    pub tolerance: f64,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions {
            lower: -10.0,
            upper: 10.0,
            nodes: 20_001,
            tolerance: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureResult {
    pub parameter: String,
    pub mean: f64,
    pub sd: f64,
    /// `(probability, value)` pairs.
    pub quantiles: Vec<(f64, f64)>,
    pub nodes: usize,
    /// `|mean(2n - 1 nodes) - mean(n nodes)|`.
    pub refinement_change: f64,
}

pub const QUANTILE_LEVELS: [f64; 5] = [0.025, 0.25, 0.5, 0.75, 0.975];

fn log1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Free coordinate and its coefficient in each record's predictor.
fn single_free(spec: &ModelSpec, d: &Dataset) -> Result<(String, Vec<f64>)> {
    let (s, t, z) = (spec.n_athletes, spec.n_stages, spec.n_race_types);
    let c = spec.clamp;
    let count = |clamped: bool, n: usize| if clamped { 0 } else { n };
    let free = count(c.mu, t) + count(c.beta, (s - 1) * t) + count(c.gamma, s) + count(c.omega, s * (z - 1)) + count(c.log_sigma, 4);
    if free != 1 {
        return Err(Error::Config(format!("quadrature needs exactly one free coordinate, spec has {free}")));
    }
    if d.n_athletes() != s || d.n_stages() != t {
        return Err(Error::Dimension(format!(
            "spec has {s} athletes x {t} stages, data {} x {}",
            d.n_athletes(),
            d.n_stages()
        )));
    }
    if !c.mu {
        Ok(("mu[1]".into(), vec![1.0; d.len()]))
    } else {
        // two athletes, one stage: the second athlete carries minus the first
        let coef = (0..d.len()).map(|i| if d.athlete_index(i) == 0 { 1.0 } else { -1.0 }).collect();
        Ok(("beta_free[1,1]".into(), coef))
    }
}

/// Unnormalized log posterior of the free coordinate; all standard deviations
/// are 1 because the scales are clamped.
fn log_kernel(theta: f64, coef: &[f64], hits: &[f64]) -> f64 {
    let n = SHOTS_PER_BOUT as f64;
    let ll: f64 = coef.iter().zip(hits).map(|(&a, &h)| h * a * theta - n * log1p_exp(a * theta)).sum();
    ll - 0.5 * theta * theta
}

struct Moments {
    mean: f64,
    sd: f64,
    grid: Vec<f64>,
    density: Vec<f64>,
}

fn simpson(opts: &QuadratureOptions, nodes: usize, coef: &[f64], hits: &[f64]) -> Moments {
    let h = (opts.upper - opts.lower) / (nodes - 1) as f64;
    let grid: Vec<f64> = (0..nodes).map(|k| opts.lower + k as f64 * h).collect();
    let logs: Vec<f64> = grid.iter().map(|&x| log_kernel(x, coef, hits)).collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let f: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let w = |k: usize| {
        if k == 0 || k == nodes - 1 {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        }
    };
    let (mut z, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for k in 0..nodes {
        let v = w(k) * f[k];
        z += v;
        m1 += v * grid[k];
        m2 += v * grid[k] * grid[k];
    }
    let mean = m1 / z;
    let var = (m2 / z - mean * mean).max(0.0);
    let density = f.iter().map(|v| v / (z * h / 3.0)).collect();
    Moments {
        mean,
        sd: var.sqrt(),
        grid,
        density,
    }
}

/// Trapezoid CDF on the grid, inverted by linear interpolation.
fn quantiles(m: &Moments, levels: &[f64]) -> Vec<(f64, f64)> {
    let mut cdf = vec![0.0; m.grid.len()];
    for k in 1..m.grid.len() {
        cdf[k] = cdf[k - 1] + 0.5 * (m.density[k] + m.density[k - 1]) * (m.grid[k] - m.grid[k - 1]);
    }
    let total = *cdf.last().expect("non-empty grid");
    levels
        .iter()
        .map(|&q| {
            let target = q * total;
            let k = cdf.partition_point(|&c| c < target).clamp(1, cdf.len() - 1);
            let (c0, c1) = (cdf[k - 1], cdf[k]);
            let frac = if c1 > c0 { (target - c0) / (c1 - c0) } else { 0.0 };
            (q, m.grid[k - 1] + frac * (m.grid[k] - m.grid[k - 1]))
        })
        .collect()
}

pub fn quadrature_posterior(spec: &ModelSpec, d: &Dataset) -> Result<QuadratureResult> {
    quadrature_posterior_with(spec, d, &QuadratureOptions::default())
}

/// Posterior mean, sd and quantiles of the one free coordinate of `spec`.
/// Fails if doubling the grid moves the mean by `tolerance` or more.
pub fn quadrature_posterior_with(spec: &ModelSpec, d: &Dataset, opts: &QuadratureOptions) -> Result<QuadratureResult> {
    if opts.nodes < 10_000 || opts.nodes % 2 == 0 {
        return Err(Error::Config(format!("quadrature needs an odd node count >= 10000, got {}", opts.nodes)));
    }
    if !(opts.lower < opts.upper) {
        return Err(Error::Config("quadrature interval is empty".into()));
    }
    let (parameter, coef) = single_free(spec, d)?;
    let hits: Vec<f64> = d.records().iter().map(|r| r.hits as f64).collect();
    let coarse = simpson(opts, opts.nodes, &coef, &hits);
    let fine = simpson(opts, 2 * opts.nodes - 1, &coef, &hits);
    let refinement_change = (fine.mean - coarse.mean).abs();
    if !(refinement_change < opts.tolerance) {
        return Err(Error::Numerical(format!(
            "quadrature mean moved by {refinement_change:e} under grid doubling"
        )));
    }
    Ok(QuadratureResult {
        parameter,
        mean: coarse.mean,
        sd: coarse.sd,
        quantiles: quantiles(&coarse, &QUANTILE_LEVELS),
        nodes: opts.nodes,
        refinement_change,
    })
}
