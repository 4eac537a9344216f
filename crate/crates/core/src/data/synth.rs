use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::{Dataset, Schedule, SessionRecord, SHOTS_PER_BOUT};
use crate::error::{Error, Result};
use crate::model::{inv_logit, Clamp, ModelSpec, ParameterState};

/// Forward simulation settings for a synthetic season.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_athletes: usize,
    pub n_stages: usize,
    /// Races per stage. Defaults to the 2021/22 calendar, cycled to `n_stages`.
    #[serde(default)]
    pub schedule: Option<Schedule>,
    /// Probability that an athlete starts a given race.
    pub participation_rate: f64,
    /// Generating parameters; drawn from the model prior when absent.
    #[serde(default)]
    pub true_params: Option<ParameterState>,
    #[serde(default = "one")]
    pub sigma_prior_scale: f64,
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}

impl SynthConfig {
    pub fn new(n_athletes: usize, n_stages: usize, seed: u64) -> Self {
        SynthConfig {
            n_athletes,
            n_stages,
            schedule: None,
            participation_rate: 1.0,
            true_params: None,
            sigma_prior_scale: 1.0,
            seed,
        }
    }

    /// 30 athletes, 11 stages, full participation.
    pub fn paper_scale(seed: u64) -> Self {
        Self::new(30, 11, seed)
    }

    pub fn schedule(&self) -> Schedule {
        self.schedule.clone().unwrap_or_else(|| Schedule::paper_cycled(self.n_stages))
    }

    pub fn model_spec(&self) -> ModelSpec {
        ModelSpec {
            n_athletes: self.n_athletes,
            n_stages: self.n_stages,
            n_race_types: 4,
            sigma_prior_scale: self.sigma_prior_scale,
            clamp: Clamp::default(),
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.n_athletes < 1 || self.n_stages < 1 {
            return Err(Error::Config("need at least one athlete and one stage".into()));
        }
        if !(0.0..=1.0).contains(&self.participation_rate) {
            return Err(Error::Config(format!(
                "participation rate {} outside [0, 1]",
                self.participation_rate
            )));
        }
        if self.schedule().n_stages() != self.n_stages {
            return Err(Error::Config(format!(
                "schedule has {} stages, config has {}",
                self.schedule().n_stages(),
                self.n_stages
            )));
        }
        if let Some(p) = &self.true_params {
            self.model_spec().check_state(p)?;
        }
        Ok(())
    }

    pub fn athlete_ids(&self) -> Vec<String> {
        let width = self.n_athletes.to_string().len().max(2);
        (1..=self.n_athletes).map(|s| format!("athlete_{s:0width$}")).collect()
    }
}

/// Simulates a season from the generative model. Deterministic in `cfg.seed`.
///
/// The returned dataset lists every configured athlete, including any who
/// happened to start no race.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<(Dataset, ParameterState)> {
    cfg.check()?;
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let params = match &cfg.true_params {
        Some(p) => p.clone(),
        None => cfg.model_spec().sample_prior(&mut rng),
    };
    let effects = params.expand();
    let ids = cfg.athlete_ids();
    let schedule = cfg.schedule();

    let mut records = Vec::new();
    for stage in 1..=cfg.n_stages as u32 {
        for slot in schedule.races(stage) {
            for (s, id) in ids.iter().enumerate() {
                if rng.random::<f64>() >= cfg.participation_rate {
                    continue;
                }
                for (b, &pos) in slot.race_type.bout_positions().iter().enumerate() {
                    let eta = effects.eta(s, stage as usize - 1, pos.index(), slot.race_type.index());
                    records.push(SessionRecord {
                        athlete_id: id.clone(),
                        stage,
                        race_type: slot.race_type,
                        position: pos,
                        race_seq: slot.race_seq,
                        bout_seq: b as u32 + 1,
                        hits: draw_hits(&mut rng, inv_logit(eta)),
                    });
                }
            }
        }
    }
    let d = Dataset::with_athletes(records, ids, Some(cfg.n_stages))?;
    Ok((d, params))
}

/// New hit counts for an existing design, drawn at `params`.
pub fn resimulate(d: &Dataset, params: &ParameterState, seed: u64) -> Result<Dataset> {
    let spec = ModelSpec {
        n_athletes: params.n_athletes,
        n_stages: params.n_stages,
        n_race_types: params.n_race_types,
        sigma_prior_scale: 1.0,
        clamp: Clamp::default(),
    };
    let etas = crate::model::Posterior::new(spec, d)?.etas(params.coords());
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let hits: Vec<u8> = etas.iter().map(|&eta| draw_hits(&mut rng, inv_logit(eta))).collect();
    d.with_hits(&hits)
}

/// Five Bernoulli trials.
pub(crate) fn draw_hits<R: RngCore + ?Sized>(rng: &mut R, p: f64) -> u8 {
    (0..SHOTS_PER_BOUT).filter(|_| rng.random::<f64>() < p).count() as u8
}
