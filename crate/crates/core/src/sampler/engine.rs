//! Adaptive Metropolis-within-Gibbs over coordinate blocks.
//!
//! Each sweep visits the blocks in their fixed order. During the adaptation
//! window each block learns a proposal shape (the inverse local curvature
//! when the target supplies it, otherwise the empirical covariance of the
//! block's own history) and a Robbins-Monro scale driving its acceptance rate
//! toward a target. Both are frozen when the window closes, so the post-adaptation
//! kernel is a fixed Metropolis-Hastings kernel.

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{ProposalMode, SamplerConfig};

/// Coordinates updated jointly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub name: String,
    pub coords: Vec<usize>,
}

/// A target density that can be evaluated one block at a time.
///
/// `current` and `propose` return the block's full conditional log density
/// up to an additive constant that depends only on coordinates outside the
/// block; the constant must be the same for both calls.
pub trait BlockTarget: Sync {
    type Cache: Clone + Send;

    fn dim(&self) -> usize;

    fn blocks(&self) -> &[Block];

    /// Joint log density (up to a constant).
    fn log_density(&self, state: &[f64]) -> f64;

    fn init_cache(&self, state: &[f64]) -> Self::Cache;

    /// Conditional log density at the values currently in `state`. When
    /// `grad` is given it receives the gradient with respect to the block.
    fn current(&self, cache: &Self::Cache, state: &[f64], block: usize, grad: Option<&mut [f64]>) -> f64;

    /// Conditional log density with the block set to `values`; may stage
    /// intermediate results in the cache for [`BlockTarget::accept`].
    fn propose(
        &self,
        cache: &mut Self::Cache,
        state: &[f64],
        block: usize,
        values: &[f64],
        grad: Option<&mut [f64]>,
    ) -> f64;

    /// The last proposal for `block` was accepted and written into the state.
    fn accept(&self, cache: &mut Self::Cache, block: usize);

    /// Negative Hessian of block `b`'s conditional at the current state
    /// (row-major). When given, it shapes the proposal during adaptation in
    /// place of the empirical covariance.
    fn curvature(&self, _cache: &Self::Cache, _state: &[f64], _block: usize) -> Option<Vec<f64>> {
        None
    }

    /// Joint rescaling moves run after the block sweep.
    fn scale_groups(&self) -> &[ScaleGroup] {
        &[]
    }

    /// Rebuilds the cache after a move outside the block structure.
    fn refresh(&self, cache: &mut Self::Cache, state: &[f64]) {
        *cache = self.init_cache(state);
    }
}

/// A log-scale coordinate together with the coordinates it scales.
///
/// The move shifts `state[log_scale]` by `e ~ N(0, h)` and multiplies every
/// member by `exp(e)`, which travels along the ridge between a hierarchical
/// scale and its effects. The Jacobian of the member rescaling enters the
/// acceptance ratio.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleGroup {
    pub name: String,
    pub log_scale: usize,
    pub members: Vec<usize>,
}

/// Output of one chain.
#[derive(Clone, Debug)]
pub struct ChainRun {
    /// Retained states, `kept_iterations / thin` rows of `dim`.
    pub draws: Vec<f64>,
    /// Post-adaptation acceptance rate per block, then per scale group.
    pub acceptance: Vec<f64>,
    /// Proposal scale per block and scale group when adaptation stopped.
    pub scales_at_freeze: Vec<f64>,
    /// Proposal scale per block at the end of the run.
    pub scales_final: Vec<f64>,
}

#[derive(Clone, Debug)]
struct Adapt {
    dim: usize,
    log_scale: f64,
    target: f64,
    /// Lower Cholesky factor of the proposal shape (row-major `dim x dim`).
    chol: Vec<f64>,
    n: usize,
    mean: Vec<f64>,
    scatter: Vec<f64>,
    learned: bool,
}

impl Adapt {
    fn new(dim: usize, mode: ProposalMode) -> Self {
        let mut chol = vec![0.0; dim * dim];
        for i in 0..dim {
            chol[i * dim + i] = 1.0;
        }
        let target = match mode {
            ProposalMode::RandomWalk if dim == 1 => 0.44,
            ProposalMode::RandomWalk => 0.35,
            ProposalMode::GradientAssisted => 0.57,
        };
        Adapt {
            dim,
            log_scale: (0.1f64).ln(),
            target,
            chol,
            n: 0,
            mean: vec![0.0; dim],
            scatter: vec![0.0; dim * dim],
            learned: false,
        }
    }

    fn scale(&self) -> f64 {
        self.log_scale.exp()
    }

    fn observe(&mut self, values: &[f64]) {
        self.n += 1;
        let n = self.n as f64;
        let d = self.dim;
        let delta: Vec<f64> = values.iter().zip(&self.mean).map(|(v, m)| v - m).collect();
        for i in 0..d {
            self.mean[i] += delta[i] / n;
        }
        for i in 0..d {
            let di = values[i] - self.mean[i];
            for j in 0..d {
                self.scatter[i * d + j] += delta[j] * di;
            }
        }
    }

    /// Replaces the proposal shape with the regularized empirical covariance.
    fn refresh(&mut self, mode: ProposalMode) {
        if self.n < 2 * self.dim + 10 {
            return;
        }
        let d = self.dim;
        let denom = (self.n - 1) as f64;
        let mut cov: Vec<f64> = self.scatter.iter().map(|v| v / denom).collect();
        let mean_diag = (0..d).map(|i| cov[i * d + i]).sum::<f64>() / d as f64;
        if !(mean_diag > 0.0 && mean_diag.is_finite()) {
            return;
        }
        for i in 0..d {
            cov[i * d + i] += 1e-6 * mean_diag + 1e-12;
        }
        self.set_shape(&cov, mode);
    }

    /// Uses the inverse of a local precision matrix as the proposal shape.
    fn set_precision(&mut self, precision: &[f64], mode: ProposalMode) {
        let d = self.dim;
        let Some(lp) = cholesky(precision, d) else {
            return;
        };
        // columns of P^-1 by two triangular solves
        let mut cov = vec![0.0; d * d];
        for col in 0..d {
            let mut y = vec![0.0; d];
            for i in 0..d {
                let rhs = if i == col { 1.0 } else { 0.0 };
                let s: f64 = (0..i).map(|j| lp[i * d + j] * y[j]).sum();
                y[i] = (rhs - s) / lp[i * d + i];
            }
            for i in (0..d).rev() {
                let s: f64 = (i + 1..d).map(|j| lp[j * d + i] * cov[j * d + col]).sum();
                cov[i * d + col] = (y[i] - s) / lp[i * d + i];
            }
        }
        self.set_shape(&cov, mode);
    }

    fn set_shape(&mut self, cov: &[f64], mode: ProposalMode) {
        let d = self.dim;
        if let Some(l) = cholesky(cov, d) {
            self.chol = l;
            if !self.learned {
                self.learned = true;
                let dd = d as f64;
                self.log_scale = match mode {
                    ProposalMode::RandomWalk => (2.38 / dd.sqrt()).ln(),
                    ProposalMode::GradientAssisted => (1.65 * dd.powf(-1.0 / 6.0)).ln(),
                };
            }
        }
    }

    fn robbins_monro(&mut self, accept_prob: f64, iter: usize) {
        let step = 1.0 / ((iter + 1) as f64).powf(0.6);
        self.log_scale = (self.log_scale + step * (accept_prob - self.target)).clamp(-20.0, 5.0);
    }

    /// `L x`
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        for i in 0..d {
            out[i] = (0..=i).map(|j| self.chol[i * d + j] * x[j]).sum();
        }
    }

    /// `L L^T g`
    fn precondition(&self, g: &[f64], out: &mut [f64]) {
        let d = self.dim;
        let mut lt_g = vec![0.0; d];
        for j in 0..d {
            lt_g[j] = (j..d).map(|i| self.chol[i * d + j] * g[i]).sum();
        }
        self.apply(&lt_g, out);
    }

    /// Solves `L y = x`.
    fn solve(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut y = vec![0.0; d];
        for i in 0..d {
            let s: f64 = (0..i).map(|j| self.chol[i * d + j] * y[j]).sum();
            y[i] = (x[i] - s) / self.chol[i * d + i];
        }
        y
    }
}

fn cholesky(a: &[f64], d: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i * d + k] * l[j * d + k]).sum();
            if i == j {
                let v = a[i * d + i] - s;
                if !(v > 0.0) {
                    return None;
                }
                l[i * d + i] = v.sqrt();
            } else {
                l[i * d + j] = (a[i * d + j] - s) / l[j * d + j];
            }
        }
    }
    Some(l)
}

/// Runs one chain from `init`. All randomness comes from `rng`.
pub fn run_chain<T: BlockTarget>(target: &T, init: Vec<f64>, cfg: &SamplerConfig, rng: &mut ChaCha20Rng) -> ChainRun {
    let blocks = target.blocks();
    let groups = target.scale_groups();
    let nb = blocks.len();
    let mode = cfg.proposal_mode;
    let mut state = init;
    let mut cache = target.init_cache(&state);
    let mut adapt: Vec<Adapt> = blocks.iter().map(|b| Adapt::new(b.coords.len(), mode)).collect();
    adapt.extend(groups.iter().map(|_| Adapt::new(1, ProposalMode::RandomWalk)));

    let adapt_window = cfg.adapt_window();
    let learn_from = adapt_window / 4;
    let first_refresh = adapt_window / 2;
    let total = cfg.burn_in + cfg.kept_iterations;
    let kept_rows = cfg.kept_iterations / cfg.thin;

    let mut draws = Vec::with_capacity(kept_rows * state.len());
    let mut accepted = vec![0usize; adapt.len()];
    let mut proposed = vec![0usize; adapt.len()];
    let mut scales_at_freeze = adapt.iter().map(Adapt::scale).collect::<Vec<_>>();

    let max_dim = blocks.iter().map(|b| b.coords.len()).max().unwrap_or(0);
    let mut current = vec![0.0; max_dim];
    let mut proposal = vec![0.0; max_dim];
    let mut noise = vec![0.0; max_dim];
    let mut step = vec![0.0; max_dim];
    let mut g_cur = vec![0.0; max_dim];
    let mut g_prop = vec![0.0; max_dim];
    let mut drift = vec![0.0; max_dim];

    for iter in 0..total {
        let adapting = iter < adapt_window;
        if iter == adapt_window {
            scales_at_freeze = adapt.iter().map(Adapt::scale).collect();
        }
        for (b, block) in blocks.iter().enumerate() {
            let d = block.coords.len();
            let a = &adapt[b];
            let h = a.scale();
            for (k, &j) in block.coords.iter().enumerate() {
                current[k] = state[j];
            }
            for z in noise[..d].iter_mut() {
                *z = rng.sample(StandardNormal);
            }
            a.apply(&noise[..d], &mut step[..d]);

            let log_alpha = match mode {
                ProposalMode::RandomWalk => {
                    let lp_cur = target.current(&cache, &state, b, None);
                    for k in 0..d {
                        proposal[k] = current[k] + h * step[k];
                    }
                    let lp_prop = target.propose(&mut cache, &state, b, &proposal[..d], None);
                    lp_prop - lp_cur
                }
                ProposalMode::GradientAssisted => {
                    let lp_cur = target.current(&cache, &state, b, Some(&mut g_cur[..d]));
                    a.precondition(&g_cur[..d], &mut drift[..d]);
                    for k in 0..d {
                        proposal[k] = current[k] + 0.5 * h * h * drift[k] + h * step[k];
                    }
                    let lp_prop = target.propose(&mut cache, &state, b, &proposal[..d], Some(&mut g_prop[..d]));
                    a.precondition(&g_prop[..d], &mut drift[..d]);
                    let back: Vec<f64> = (0..d)
                        .map(|k| (current[k] - proposal[k] - 0.5 * h * h * drift[k]) / h)
                        .collect();
                    let back = a.solve(&back);
                    let log_q_back = -0.5 * back.iter().map(|v| v * v).sum::<f64>();
                    let log_q_fwd = -0.5 * noise[..d].iter().map(|v| v * v).sum::<f64>();
                    lp_prop - lp_cur + log_q_back - log_q_fwd
                }
            };

            let accept_prob = if log_alpha.is_nan() { 0.0 } else { log_alpha.min(0.0).exp() };
            let u: f64 = rng.random();
            let accept = log_alpha.is_finite() && u.ln() < log_alpha || log_alpha == f64::INFINITY;
            if accept {
                for (k, &j) in block.coords.iter().enumerate() {
                    state[j] = proposal[k];
                }
                target.accept(&mut cache, b);
            }

            if adapting {
                let a = &mut adapt[b];
                a.robbins_monro(accept_prob, iter);
                if iter >= learn_from {
                    let vals: Vec<f64> = block.coords.iter().map(|&j| state[j]).collect();
                    a.observe(&vals);
                }
                if iter % 50 == 0 {
                    if let Some(p) = target.curvature(&cache, &state, b) {
                        a.set_precision(&p, mode);
                    } else if iter >= first_refresh {
                        a.refresh(mode);
                    }
                }
            } else if iter >= cfg.burn_in {
                proposed[b] += 1;
                accepted[b] += accept as usize;
            }
        }

        for (k, g) in groups.iter().enumerate() {
            let a = &mut adapt[nb + k];
            let z: f64 = rng.sample(StandardNormal);
            let e = a.scale() * z;
            let lp_old = target.log_density(&state);
            let mut moved = state.clone();
            moved[g.log_scale] += e;
            let r = e.exp();
            for &j in &g.members {
                moved[j] *= r;
            }
            let log_alpha = target.log_density(&moved) - lp_old + g.members.len() as f64 * e;
            let accept_prob = if log_alpha.is_nan() { 0.0 } else { log_alpha.min(0.0).exp() };
            let u: f64 = rng.random();
            let accept = log_alpha.is_finite() && u.ln() < log_alpha;
            if accept {
                state = moved;
                target.refresh(&mut cache, &state);
            }
            if adapting {
                a.robbins_monro(accept_prob, iter);
            } else if iter >= cfg.burn_in {
                proposed[nb + k] += 1;
                accepted[nb + k] += accept as usize;
            }
        }
        if adapt_window >= total && iter + 1 == total {
            scales_at_freeze = adapt.iter().map(Adapt::scale).collect();
        }

        if iter >= cfg.burn_in {
            let kept_iter = iter - cfg.burn_in + 1;
            if kept_iter % cfg.thin == 0 {
                draws.extend_from_slice(&state);
            }
        }
    }

    ChainRun {
        draws,
        acceptance: accepted
            .iter()
            .zip(&proposed)
            .map(|(&a, &p)| if p == 0 { f64::NAN } else { a as f64 / p as f64 })
            .collect(),
        scales_at_freeze,
        scales_final: adapt.iter().map(Adapt::scale).collect(),
    }
}
