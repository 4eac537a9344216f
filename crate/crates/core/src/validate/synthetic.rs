//! Synthetic seasons and fixtures used by the end-to-end checks.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{parse_sessions, resimulate, Dataset, Position, RaceType, SessionRecord};
use crate::error::Result;
use crate::model::{Clamp, ModelSpec, ParameterState};
use crate::sampler::{PosteriorSamples, SamplerConfig};

const SEASON_DESIGN: &str = include_str!("../../fixtures/season_2021_22_reconstructed.csv");

/// The 2088-bout design of the 2021/22 season (30 athletes, 11 stages).
pub fn season_design() -> Result<Dataset> {
    parse_sessions(SEASON_DESIGN.as_bytes())
}

/// Reduced model with only the baseline free (`S = 2, T = 1, Z = 2`) and
/// three sprint bouts by one athlete with 5, 4 and 3 hits.
pub fn oracle_problem() -> Result<(ModelSpec, Dataset)> {
    let spec = ModelSpec::new(2, 1, 2)?.with_clamp(Clamp::all_but_mu());
    let records = [5, 4, 3]
        .iter()
        .enumerate()
        .map(|(k, &hits)| SessionRecord {
            athlete_id: "athlete_01".into(),
            stage: 1,
            race_type: RaceType::Sprint,
            position: if k == 1 { Position::Standing } else { Position::Prone },
            race_seq: 1,
            bout_seq: k as u32 + 1,
            hits,
        })
        .collect();
    let d = Dataset::with_athletes(records, vec!["athlete_01".into(), "athlete_02".into()], Some(1))?;
    Ok((spec, d))
}

/// Effects of realistic size: baseline near 84% drifting by 0.1 per stage,
/// athlete offsets N(0, 0.4) drifting by 0.1, position N(0, 0.2), race type
/// N(0, 0.15).
pub fn realistic_truth(spec: &ModelSpec, seed: u64) -> ParameterState {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut p = ParameterState::zeros(spec);
    let mut n = |sd: f64| Normal::new(0.0, sd).expect("valid sd").sample(&mut rng);
    let mut prev = 1.67;
    for t in 0..spec.n_stages {
        prev += n(0.1);
        p.mu_mut()[t] = prev;
    }
    for s in 0..spec.n_athletes - 1 {
        let mut b = n(0.4);
        for t in 0..spec.n_stages {
            b += n(0.1);
            p.beta_free_mut(s)[t] = b;
        }
    }
    for s in 0..spec.n_athletes {
        p.gamma_free_mut()[s] = n(0.2);
    }
    for s in 0..spec.n_athletes {
        for k in 0..spec.n_race_types - 1 {
            p.omega_free_mut(s)[k] = n(0.15);
        }
    }
    p
}

/// Season design with hit counts redrawn at [`realistic_truth`].
pub fn paper_season(truth_seed: u64, data_seed: u64) -> Result<(Dataset, ParameterState)> {
    let design = season_design()?;
    let spec = ModelSpec::for_dataset(&design)?;
    let truth = realistic_truth(&spec, truth_seed);
    Ok((resimulate(&design, &truth, data_seed)?, truth))
}

/// Two chains on a small model whose draws are N(0, 1) around means 0 and
/// `shift`: an unconverged fit by construction.
pub fn mean_shift_fixture(n_draws: usize, shift: f64, seed: u64) -> Result<PosteriorSamples> {
    let spec = ModelSpec::new(2, 1, 2)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let z = Normal::new(0.0, 1.0).expect("valid sd");
    let mut draws = Vec::with_capacity(2 * n_draws * spec.dim());
    for c in 0..2 {
        for _ in 0..n_draws {
            draws.extend((0..spec.dim()).map(|_| z.sample(&mut rng) + c as f64 * shift));
        }
    }
    let cfg = SamplerConfig {
        n_chains: 2,
        ..SamplerConfig::default()
    };
    PosteriorSamples::new(spec, cfg, String::new(), vec![], 2, draws)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::split_rhat;

    #[test]
    fn design_and_truth() {
        let (d, truth) = paper_season(3, 5).unwrap();
        assert_eq!(d.len(), 2088);
        assert_eq!(truth.coords().len(), 454);
        let acc = d.total_hits() as f64 / d.total_shots() as f64;
        assert!((0.75..0.92).contains(&acc), "{acc}");
        assert_eq!(paper_season(3, 5).unwrap().0, d);
    }

    #[test]
    fn shifted_chains_do_not_mix() {
        let s = mean_shift_fixture(1000, 5.0, 1).unwrap();
        assert!(split_rhat(&s, 0).unwrap() > 2.0);
    }
}
