//! Simulation-based calibration of prior, simulator and sampler together.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::data::{generate_synthetic, Dataset, SynthConfig};
use crate::error::{Error, Result};
use crate::model::{ModelSpec, ParameterState};
use crate::predict::subsample_indices;
use crate::sampler::{ess, run_chains_with_threads, PosteriorSamples, SamplerConfig};
use crate::stats::quantile_sorted;

/// Anything that turns a dataset into posterior draws.
pub trait Fitter: Sync {
    fn fit(&self, spec: &ModelSpec, d: &Dataset, seed: u64) -> Result<PosteriorSamples>;
}

/// The production sampler, one thread per fit (replications run in parallel).
#[derive(Clone, Debug)]
pub struct SamplerFitter {
    pub config: SamplerConfig,
}

impl Fitter for SamplerFitter {
    fn fit(&self, spec: &ModelSpec, d: &Dataset, seed: u64) -> Result<PosteriorSamples> {
        let cfg = SamplerConfig {
            seed,
            ..self.config.clone()
        };
        run_chains_with_threads(spec, d, &cfg, 1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SbcConfig {
    pub replications: usize,
    /// Draws the truth is ranked among; ranks lie in `0..=rank_draws`.
    pub rank_draws: usize,
    pub bins: usize,
    /// Family-wise level of the uniformity tests.
    pub alpha: f64,
    pub max_failure_rate: f64,
    pub seed: u64,
}

impl Default for SbcConfig {
    fn default() -> Self {
        SbcConfig {
            replications: 100,
            rank_draws: 99,
            bins: 20,
            alpha: 0.01,
            max_failure_rate: 0.1,
            seed: 1,
        }
    }
}

impl SbcConfig {
    pub fn check(&self) -> Result<()> {
        if self.replications < 20 {
            return Err(Error::Config(format!("SBC needs >= 20 replications, got {}", self.replications)));
        }
        if self.bins < 2 || (self.rank_draws + 1) % self.bins != 0 {
            return Err(Error::Config(format!(
                "{} rank values do not split into {} bins",
                self.rank_draws + 1,
                self.bins
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplicationSeeds {
    pub truth: u64,
    pub data: u64,
    pub fit: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationFailure {
    pub replication: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SbcParameter {
    pub name: String,
    /// Rank of the truth per successful replication.
    pub ranks: Vec<usize>,
    pub histogram: Vec<usize>,
    pub coverage_50: f64,
    pub coverage_90: f64,
    pub chi_square: f64,
    pub p_value: f64,
    pub rejected: bool,
    /// Smallest ESS seen across replications, when computable.
    pub min_ess: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SbcReport {
    pub replications: usize,
    pub succeeded: usize,
    pub rank_draws: usize,
    pub bins: usize,
    pub alpha: f64,
    /// Per-parameter level after the Bonferroni correction.
    pub bonferroni_alpha: f64,
    pub seeds: Vec<ReplicationSeeds>,
    pub failures: Vec<ReplicationFailure>,
    pub parameters: Vec<SbcParameter>,
}

impl SbcReport {
    /// Share of parameters whose 90% coverage lies in `[lo, hi]`.
    pub fn coverage_90_fraction(&self, lo: f64, hi: f64) -> f64 {
        let ok = self.parameters.iter().filter(|p| (lo..=hi).contains(&p.coverage_90)).count();
        ok as f64 / self.parameters.len().max(1) as f64
    }

    pub fn any_rejected(&self) -> bool {
        self.parameters.iter().any(|p| p.rejected)
    }
}

struct Replicate {
    ranks: Vec<usize>,
    in_50: Vec<bool>,
    in_90: Vec<bool>,
    ess: Vec<Option<f64>>,
}

fn replicate_seeds(seed: u64, r: usize) -> ReplicationSeeds {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(r as u64);
    ReplicationSeeds {
        truth: rng.next_u64(),
        data: rng.next_u64(),
        fit: rng.next_u64(),
    }
}

fn one_replication<F: Fitter>(
    spec: &ModelSpec,
    synth: &SynthConfig,
    cfg: &SbcConfig,
    fitter: &F,
    coords: &[usize],
    seeds: ReplicationSeeds,
) -> Result<Replicate> {
    let truth: ParameterState = spec.sample_prior(&mut ChaCha20Rng::seed_from_u64(seeds.truth));
    let (d, _) = generate_synthetic(&SynthConfig {
        true_params: Some(truth.clone()),
        seed: seeds.data,
        ..synth.clone()
    })?;
    let samples = fitter.fit(spec, &d, seeds.fit)?;
    if samples.dim() != spec.dim() {
        return Err(Error::Dimension(format!("fit returned dimension {}", samples.dim())));
    }
    let keep = subsample_indices(samples.n_total(), cfg.rank_draws);
    let mut out = Replicate {
        ranks: Vec::new(),
        in_50: Vec::new(),
        in_90: Vec::new(),
        ess: Vec::new(),
    };
    for &j in coords {
        let x = truth.coords()[j];
        let all = samples.pooled(j);
        out.ranks.push(keep.iter().filter(|&&k| all[k] < x).count());
        let mut sorted = all;
        sorted.sort_by(f64::total_cmp);
        let q = |p: f64| quantile_sorted(&sorted, p);
        out.in_50.push(q(0.25) <= x && x <= q(0.75));
        out.in_90.push(q(0.05) <= x && x <= q(0.95));
        out.ess.push(ess(&samples, j).ok());
    }
    Ok(out)
}

/// SBC with the production sampler.
pub fn sbc(spec: &ModelSpec, synth: &SynthConfig, replications: usize, sampler: &SamplerConfig) -> Result<SbcReport> {
    let cfg = SbcConfig {
        replications,
        seed: sampler.seed,
        ..SbcConfig::default()
    };
    sbc_with(spec, synth, &cfg, &SamplerFitter { config: sampler.clone() })
}

/// Per replication: truth from the prior of `spec`, data on the design of
/// `synth`, a fit, and the truth's rank among `rank_draws` evenly spaced
/// posterior draws for every free coordinate. Failed fits are recorded; the
/// call fails if more than `max_failure_rate` of them fail.
pub fn sbc_with<F: Fitter>(spec: &ModelSpec, synth: &SynthConfig, cfg: &SbcConfig, fitter: &F) -> Result<SbcReport> {
    cfg.check()?;
    spec.check()?;
    let model = synth.model_spec();
    if (model.n_athletes, model.n_stages, model.n_race_types) != (spec.n_athletes, spec.n_stages, spec.n_race_types) {
        return Err(Error::Dimension("synthetic design and model spec disagree on shape".into()));
    }
    let coords = spec.free_coordinates();
    let names = spec.param_names();
    let seeds: Vec<ReplicationSeeds> = (0..cfg.replications).map(|r| replicate_seeds(cfg.seed, r)).collect();
    let results: Vec<Result<Replicate>> = seeds
        .par_iter()
        .map(|&s| one_replication(spec, synth, cfg, fitter, &coords, s))
        .collect();

    let mut failures = Vec::new();
    let mut ok = Vec::new();
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok(rep) => ok.push(rep),
            Err(e) => failures.push(ReplicationFailure {
                replication: r,
                message: e.to_string(),
            }),
        }
    }
    if failures.len() as f64 > cfg.max_failure_rate * cfg.replications as f64 {
        return Err(Error::Numerical(format!(
            "{} of {} SBC replications failed; first: {}",
            failures.len(),
            cfg.replications,
            failures[0].message
        )));
    }

    let n = ok.len();
    let bonferroni_alpha = cfg.alpha / coords.len().max(1) as f64;
    let chi = ChiSquared::new((cfg.bins - 1) as f64).map_err(|e| Error::Numerical(e.to_string()))?;
    let per_bin = (cfg.rank_draws + 1) / cfg.bins;
    let parameters = coords
        .iter()
        .enumerate()
        .map(|(k, &j)| {
            let ranks: Vec<usize> = ok.iter().map(|r| r.ranks[k]).collect();
            let mut histogram = vec![0; cfg.bins];
            for &r in &ranks {
                histogram[r / per_bin] += 1;
            }
            let expected = n as f64 / cfg.bins as f64;
            let chi_square: f64 = histogram.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
            let p_value = chi.sf(chi_square);
            let share = |flags: fn(&Replicate) -> &Vec<bool>| {
                ok.iter().filter(|r| flags(r)[k]).count() as f64 / n as f64
            };
            SbcParameter {
                name: names[j].clone(),
                coverage_50: share(|r| &r.in_50),
                coverage_90: share(|r| &r.in_90),
                histogram,
                ranks,
                chi_square,
                p_value,
                rejected: p_value < bonferroni_alpha,
                min_ess: ok.iter().filter_map(|r| r.ess[k]).reduce(f64::min),
            }
        })
        .collect();
    Ok(SbcReport {
        replications: cfg.replications,
        succeeded: n,
        rank_draws: cfg.rank_draws,
        bins: cfg.bins,
        alpha: cfg.alpha,
        bonferroni_alpha,
        seeds,
        failures,
        parameters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Ignores the data and returns prior draws, optionally shifted.
    struct PriorFitter {
        shift: f64,
        fail_every: Option<u64>,
    }

    impl Fitter for PriorFitter {
        fn fit(&self, spec: &ModelSpec, _d: &Dataset, seed: u64) -> Result<PosteriorSamples> {
            if self.fail_every.is_some_and(|k| seed % k == 0) {
                return Err(Error::Numerical("stub failure".into()));
            }
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let mut draws = Vec::new();
            for _ in 0..400 {
                let mut p = spec.sample_prior(&mut rng).into_coords();
                for (j, v) in p.iter_mut().enumerate() {
                    if !spec.is_clamped(j) {
                        *v += self.shift;
                    }
                }
                draws.extend(p);
            }
            PosteriorSamples::new(spec.clone(), SamplerConfig::default(), String::new(), vec![], 4, draws)
        }
    }

    fn setup() -> (ModelSpec, SynthConfig) {
        let synth = SynthConfig::new(3, 2, 0);
        (synth.model_spec(), synth)
    }

    #[test]
    fn calibrated_stub_passes() {
        let (spec, synth) = setup();
        let cfg = SbcConfig {
            replications: 200,
            ..SbcConfig::default()
        };
        let r = sbc_with(&spec, &synth, &cfg, &PriorFitter { shift: 0.0, fail_every: None }).unwrap();
        assert_eq!(r.succeeded, 200);
        assert!(!r.any_rejected(), "{:?}", r.parameters.iter().map(|p| p.p_value).collect::<Vec<_>>());
        for p in &r.parameters {
            assert_eq!(p.histogram.iter().sum::<usize>(), 200);
            assert!(p.ranks.iter().all(|&k| k <= 99));
        }
        assert!(r.coverage_90_fraction(0.84, 0.96) > 0.8);
    }

    #[test]
    fn biased_stub_is_rejected() {
        let (spec, synth) = setup();
        let cfg = SbcConfig::default();
        let r = sbc_with(&spec, &synth, &cfg, &PriorFitter { shift: 0.5, fail_every: None }).unwrap();
        assert!(r.any_rejected());
    }

    #[test]
    fn failures_are_recorded_or_fatal() {
        let (spec, synth) = setup();
        let cfg = SbcConfig {
            replications: 40,
            ..SbcConfig::default()
        };
        let few = sbc_with(&spec, &synth, &cfg, &PriorFitter { shift: 0.0, fail_every: Some(1000) }).unwrap();
        assert_eq!(few.succeeded + few.failures.len(), 40);
        assert!(sbc_with(&spec, &synth, &cfg, &PriorFitter { shift: 0.0, fail_every: Some(2) }).is_err());
    }

    #[test]
    fn config_checks() {
        let (spec, synth) = setup();
        let fitter = PriorFitter { shift: 0.0, fail_every: None };
        let small = SbcConfig {
            replications: 10,
            ..SbcConfig::default()
        };
        assert!(sbc_with(&spec, &synth, &small, &fitter).is_err());
        let other = SynthConfig::new(4, 2, 0);
        assert!(sbc_with(&spec, &other, &SbcConfig::default(), &fitter).is_err());
    }

    #[test]
    fn seeds_are_stable() {
        assert_eq!(replicate_seeds(3, 7), replicate_seeds(3, 7));
        assert_ne!(replicate_seeds(3, 7), replicate_seeds(3, 8));
    }
}
