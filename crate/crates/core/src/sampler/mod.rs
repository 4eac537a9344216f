//! Posterior sampling: chains, blocking, adaptation and diagnostics.
//!
//! Chain `c` draws all of its randomness from a ChaCha20 stream keyed by
//! `(seed, c)`. Chains are independent, so the output depends only on the
//! inputs and the seed, whatever the thread count.

pub mod diagnostics;
pub mod engine;
mod io;
mod target;

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use self::diagnostics::{ess, ess_of, split_rhat, split_rhat_of, summarize, ParamSummary};
pub use self::engine::{run_chain, Block, BlockTarget, ChainRun, ScaleGroup};
pub use self::io::{export_draws, export_draws_csv, import_draws, import_draws_csv, DrawsManifest, SIGMA_NOTE};
use self::target::ModelTarget;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{ModelSpec, ParameterState, Posterior};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "BIATHLON_BAYES_THREADS";

const INIT_ATTEMPTS: usize = 100;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposalMode {
    #[default]
    RandomWalk,
    GradientAssisted,
}

impl std::str::FromStr for ProposalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random_walk" => Ok(ProposalMode::RandomWalk),
            "gradient_assisted" => Ok(ProposalMode::GradientAssisted),
            _ => Err(Error::Config(format!("unknown proposal mode {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub n_chains: usize,
    pub burn_in: usize,
    pub kept_iterations: usize,
    pub thin: usize,
    pub seed: u64,
    /// Adaptation stops after this many iterations; defaults to `burn_in`.
    #[serde(default)]
    pub adapt_window: Option<usize>,
    #[serde(default)]
    pub proposal_mode: ProposalMode,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            n_chains: 4,
            burn_in: 1000,
            kept_iterations: 5000,
            thin: 5,
            seed: 1,
            adapt_window: None,
            proposal_mode: ProposalMode::RandomWalk,
        }
    }
}

impl SamplerConfig {
    pub fn adapt_window(&self) -> usize {
        self.adapt_window.unwrap_or(self.burn_in).min(self.burn_in)
    }

    pub fn draws_per_chain(&self) -> usize {
        self.kept_iterations / self.thin
    }

    pub fn check(&self) -> Result<()> {
        if self.n_chains < 1 {
            return Err(Error::Config("n_chains must be at least 1".into()));
        }
        if self.thin < 1 || self.kept_iterations % self.thin != 0 {
            return Err(Error::Config(format!(
                "kept_iterations {} not divisible by thin {}",
                self.kept_iterations, self.thin
            )));
        }
        if self.kept_iterations == 0 {
            return Err(Error::Config("kept_iterations must be positive".into()));
        }
        Ok(())
    }
}

/// Acceptance statistics for one block or joint rescaling move across chains.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockStats {
    pub name: String,
    pub size: usize,
    /// Post-adaptation acceptance rate per chain.
    pub acceptance: Vec<f64>,
    /// Frozen proposal scale per chain.
    pub scale: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total_seconds: f64,
    pub threads: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorSamples {
    pub spec: ModelSpec,
    pub config: SamplerConfig,
    pub param_names: Vec<String>,
    pub source_digest: String,
    pub blocks: Vec<BlockStats>,
    /// Not part of the draws file.
    pub timing: Option<Timing>,
    n_chains: usize,
    n_draws: usize,
    dim: usize,
    /// `[chain][iteration][parameter]`, row-major.
    draws: Vec<f64>,
}

impl PosteriorSamples {
    pub fn new(
        spec: ModelSpec,
        config: SamplerConfig,
        source_digest: String,
        blocks: Vec<BlockStats>,
        n_chains: usize,
        draws: Vec<f64>,
    ) -> Result<Self> {
        let dim = spec.dim();
        if n_chains == 0 || draws.len() % (n_chains * dim) != 0 {
            return Err(Error::Dimension(format!(
                "{} values do not split into {n_chains} chains of dimension {dim}",
                draws.len()
            )));
        }
        let n_draws = draws.len() / (n_chains * dim);
        Ok(PosteriorSamples {
            param_names: spec.param_names(),
            spec,
            config,
            source_digest,
            blocks,
            timing: None,
            n_chains,
            n_draws,
            dim,
            draws,
        })
    }

    pub fn n_chains(&self) -> usize {
        self.n_chains
    }

    /// Retained draws per chain.
    pub fn n_draws(&self) -> usize {
        self.n_draws
    }

    pub fn n_total(&self) -> usize {
        self.n_chains * self.n_draws
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn raw(&self) -> &[f64] {
        &self.draws
    }

    pub fn get(&self, chain: usize, iter: usize, param: usize) -> f64 {
        self.draws[(chain * self.n_draws + iter) * self.dim + param]
    }

    /// Free coordinates of one draw.
    pub fn row(&self, chain: usize, iter: usize) -> &[f64] {
        let start = (chain * self.n_draws + iter) * self.dim;
        &self.draws[start..start + self.dim]
    }

    /// Draw `k` of the pooled sample (chains concatenated).
    pub fn pooled_row(&self, k: usize) -> &[f64] {
        &self.draws[k * self.dim..(k + 1) * self.dim]
    }

    pub fn state(&self, chain: usize, iter: usize) -> ParameterState {
        ParameterState::from_coords(&self.spec, self.row(chain, iter).to_vec()).expect("dimension checked at construction")
    }

    /// One series per chain for parameter `param`.
    pub fn chains_of(&self, param: usize) -> Vec<Vec<f64>> {
        (0..self.n_chains)
            .map(|c| (0..self.n_draws).map(|i| self.get(c, i, param)).collect())
            .collect()
    }

    /// All draws of `param`, chains concatenated.
    pub fn pooled(&self, param: usize) -> Vec<f64> {
        self.chains_of(param).concat()
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.param_names.iter().position(|n| n == name)
    }
}

fn thread_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

/// RNG stream for chain `chain`.
pub fn chain_rng(seed: u64, chain: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

/// Runs `cfg.n_chains` chains on a generic target. `init` draws a starting
/// state from the chain's own stream.
pub fn run_target<T, F>(target: &T, cfg: &SamplerConfig, threads: usize, init: F) -> Result<Vec<ChainRun>>
where
    T: BlockTarget,
    F: Fn(&mut ChaCha20Rng) -> Vec<f64> + Sync,
{
    cfg.check()?;
    let one = |c: usize| -> Result<ChainRun> {
        let mut rng = chain_rng(cfg.seed, c);
        let start = (0..INIT_ATTEMPTS)
            .map(|_| init(&mut rng))
            .find(|s| target.log_density(s).is_finite())
            .ok_or_else(|| {
                Error::Numerical(format!(
                    "chain {c}: log posterior non-finite at {INIT_ATTEMPTS} initial draws"
                ))
            })?;
        if start.len() != target.dim() {
            return Err(Error::Dimension(format!("initial state has {} coordinates, target {}", start.len(), target.dim())));
        }
        Ok(run_chain(target, start, cfg, &mut rng))
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| (0..cfg.n_chains).into_par_iter().map(one).collect())
}

/// Overdispersed start: free coordinates ~ N(0, 0.5), log-scales ~ N(0, 0.25),
/// clamped coordinates at zero.
pub fn overdispersed_init<R: Rng + ?Sized>(spec: &ModelSpec, rng: &mut R) -> Vec<f64> {
    let l = spec.layout();
    let coord = Normal::new(0.0, 0.5).expect("valid sd");
    let scale = Normal::new(0.0, 0.25).expect("valid sd");
    (0..spec.dim())
        .map(|j| {
            if spec.is_clamped(j) {
                0.0
            } else if l.log_sigma_range().contains(&j) {
                scale.sample(rng)
            } else {
                coord.sample(rng)
            }
        })
        .collect()
}

/// Fits the model to `d`. Worker threads are capped by
/// `BIATHLON_BAYES_THREADS`.
pub fn run_chains(spec: &ModelSpec, d: &Dataset, cfg: &SamplerConfig) -> Result<PosteriorSamples> {
    run_chains_with_threads(spec, d, cfg, thread_count())
}

pub fn run_chains_with_threads(
    spec: &ModelSpec,
    d: &Dataset,
    cfg: &SamplerConfig,
    threads: usize,
) -> Result<PosteriorSamples> {
    spec.check()?;
    cfg.check()?;
    if spec.n_athletes != d.n_athletes() || spec.n_stages != d.n_stages() {
        return Err(Error::Dimension(format!(
            "spec has {} athletes and {} stages, data has {} and {}",
            spec.n_athletes,
            spec.n_stages,
            d.n_athletes(),
            d.n_stages()
        )));
    }
    let started = Instant::now();
    let target = ModelTarget::new(Posterior::new(spec.clone(), d)?);
    let runs = run_target(&target, cfg, threads, |rng| overdispersed_init(spec, rng))?;

    let moves = target
        .blocks()
        .iter()
        .map(|b| (b.name.clone(), b.coords.len()))
        .chain(target.scale_groups().iter().map(|g| (g.name.clone(), g.members.len() + 1)));
    let blocks = moves
        .enumerate()
        .map(|(b, (name, size))| BlockStats {
            name,
            size,
            acceptance: runs.iter().map(|r| r.acceptance[b]).collect(),
            scale: runs.iter().map(|r| r.scales_at_freeze[b]).collect(),
        })
        .collect();
    let draws: Vec<f64> = runs.into_iter().flat_map(|r| r.draws).collect();
    let mut samples = PosteriorSamples::new(
        spec.clone(),
        cfg.clone(),
        d.source_digest().to_string(),
        blocks,
        cfg.n_chains,
        draws,
    )?;
    samples.timing = Some(Timing {
        total_seconds: started.elapsed().as_secs_f64(),
        threads,
    });
    Ok(samples)
}
