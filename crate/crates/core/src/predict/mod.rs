//! Posterior summaries and posterior predictive checks.
//!
//! Intervals are central 95% empirical quantiles (type 7). Predictive checks
//! replicate the observed schedule: one set of joint replicates is drawn per
//! report and every aggregate (stage totals, race/position percentages,
//! cumulative paths) is computed from it.

mod output;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{Dataset, Position, RaceType, SessionRecord, SHOTS_PER_BOUT};
use crate::error::{Error, Result};
use crate::model::{inv_logit, Effects, ParameterState};
use crate::sampler::PosteriorSamples;
use crate::stats::quantile_sorted;

pub use self::output::{
    write_cumulative_csv, write_mu_csv, write_odds_ratio_csv, write_race_position_csv, write_stage_totals_csv,
};

pub const LOWER_Q: f64 = 0.025;
pub const UPPER_Q: f64 = 0.975;

/// Distribution summary of one target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictiveSummary {
    #[serde(skip)]
    pub draws: Vec<f64>,
    pub n_draws: usize,
    pub mean: f64,
    pub median: f64,
    pub lower: f64,
    pub upper: f64,
    pub observed: Option<f64>,
    /// Mid-p upper tail `P(rep > obs) + P(rep = obs) / 2`.
    pub tail_probability: Option<f64>,
}

impl PredictiveSummary {
    pub fn from_draws(draws: Vec<f64>, observed: Option<f64>) -> Result<Self> {
        if draws.is_empty() {
            return Err(Error::InsufficientDraws { needed: 1, got: 0 });
        }
        if draws.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical("non-finite draw in summary".into()));
        }
        let mut sorted = draws.clone();
        sorted.sort_by(f64::total_cmp);
        let n = draws.len() as f64;
        let tail_probability = observed.map(|o| {
            let above = draws.iter().filter(|&&x| x > o).count() as f64;
            let equal = draws.iter().filter(|&&x| x == o).count() as f64;
            (above + 0.5 * equal) / n
        });
        Ok(PredictiveSummary {
            n_draws: draws.len(),
            mean: draws.iter().sum::<f64>() / n,
            median: quantile_sorted(&sorted, 0.5),
            lower: quantile_sorted(&sorted, LOWER_Q),
            upper: quantile_sorted(&sorted, UPPER_Q),
            draws,
            observed,
            tail_probability,
        })
    }

    pub fn covers(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    /// Whether the observed value lies inside the interval.
    pub fn covers_observed(&self) -> Option<bool> {
        self.observed.map(|o| self.covers(o))
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// An effect reported on both the log-odds and the odds-ratio scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OddsRatioSummary {
    pub log: PredictiveSummary,
    pub odds_ratio: PredictiveSummary,
}

impl OddsRatioSummary {
    fn from_log_draws(log: Vec<f64>) -> Result<Self> {
        let or = log.iter().map(|x| x.exp()).collect();
        Ok(OddsRatioSummary {
            log: PredictiveSummary::from_draws(log, None)?,
            odds_ratio: PredictiveSummary::from_draws(or, None)?,
        })
    }

    /// `exp(E[log OR])`.
    pub fn geometric_mean(&self) -> f64 {
        self.log.mean.exp()
    }
}

fn effects_of(samples: &PosteriorSamples) -> Result<Vec<Effects>> {
    if samples.n_total() == 0 {
        return Err(Error::InsufficientDraws { needed: 1, got: 0 });
    }
    (0..samples.n_total())
        .into_par_iter()
        .map(|k| Ok(ParameterState::from_coords(&samples.spec, samples.pooled_row(k).to_vec())?.expand()))
        .collect()
}

fn stage_accuracy(d: &Dataset, t: usize) -> Option<f64> {
    let (mut hits, mut shots) = (0u64, 0u64);
    for r in d.records().iter().filter(|r| r.stage as usize == t + 1) {
        hits += r.hits as u64;
        shots += SHOTS_PER_BOUT as u64;
    }
    (shots > 0).then(|| hits as f64 / shots as f64)
}

/// Baseline accuracy `inv_logit(mu_t)` per stage, with the observed stage
/// accuracy as overlay when a dataset is given.
pub fn mu_summary(samples: &PosteriorSamples, d: Option<&Dataset>) -> Result<Vec<PredictiveSummary>> {
    let layout = samples.spec.layout();
    if let Some(d) = d {
        check_dataset(samples, d)?;
    }
    layout
        .mu_range()
        .enumerate()
        .map(|(t, j)| {
            let draws = samples.pooled(j).into_iter().map(inv_logit).collect();
            PredictiveSummary::from_draws(draws, d.and_then(|d| stage_accuracy(d, t)))
        })
        .collect()
}

/// `exp(beta_{s,t})` on the `S x T` grid, athlete-major; the last athlete's
/// row comes from the sum-to-zero expansion.
pub fn beta_trajectories(samples: &PosteriorSamples) -> Result<Vec<Vec<OddsRatioSummary>>> {
    let fx = effects_of(samples)?;
    let (s_n, t_n) = (samples.spec.n_athletes, samples.spec.n_stages);
    (0..s_n)
        .map(|s| {
            (0..t_n)
                .map(|t| OddsRatioSummary::from_log_draws(fx.iter().map(|e| e.beta(s, t)).collect()))
                .collect()
        })
        .collect()
}

/// `[prone, standing]` odds ratios per athlete.
pub fn position_effects(samples: &PosteriorSamples) -> Result<Vec<[OddsRatioSummary; 2]>> {
    let fx = effects_of(samples)?;
    (0..samples.spec.n_athletes)
        .map(|s| {
            Ok([
                OddsRatioSummary::from_log_draws(fx.iter().map(|e| e.gamma[s][0]).collect())?,
                OddsRatioSummary::from_log_draws(fx.iter().map(|e| e.gamma[s][1]).collect())?,
            ])
        })
        .collect()
}

/// Odds ratio per athlete and race type (`RaceType::ALL` order).
pub fn race_effects(samples: &PosteriorSamples) -> Result<Vec<Vec<OddsRatioSummary>>> {
    let fx = effects_of(samples)?;
    (0..samples.spec.n_athletes)
        .map(|s| {
            (0..samples.spec.n_race_types)
                .map(|z| OddsRatioSummary::from_log_draws(fx.iter().map(|e| e.omega(s, z)).collect()))
                .collect()
        })
        .collect()
}

/// Replicated hit counts, one row of `n_rep` per template.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictiveDraws {
    n_templates: usize,
    n_rep: usize,
    /// Pooled posterior draw used by each replicate.
    pub draw_index: Vec<usize>,
    hits: Vec<u8>,
}

impl PredictiveDraws {
    pub fn n_templates(&self) -> usize {
        self.n_templates
    }

    pub fn n_rep(&self) -> usize {
        self.n_rep
    }

    /// Replicates of template `j`.
    pub fn template(&self, j: usize) -> &[u8] {
        &self.hits[j * self.n_rep..(j + 1) * self.n_rep]
    }

    /// Per-replicate sum of hits over `members`.
    pub fn sum_over(&self, members: &[usize]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_rep];
        for &j in members {
            for (o, &h) in out.iter_mut().zip(self.template(j)) {
                *o += h as f64;
            }
        }
        out
    }
}

/// `n_rep` pooled draws spread evenly over the sample; draws repeat when
/// `n_rep` exceeds the sample size.
pub fn subsample_indices(n_total: usize, n_rep: usize) -> Vec<usize> {
    (0..n_rep).map(|k| ((k as u128 * n_total as u128) / n_rep as u128) as usize).collect()
}

fn template_seed(seed: u64, r: &SessionRecord) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(r.athlete_id.as_bytes());
    h.update([0]);
    for v in [r.stage, r.race_type.index() as u32, r.position.index() as u32, r.race_seq, r.bout_seq] {
        h.update(v.to_le_bytes());
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// Simulates `Binomial(5, p)` hits for each template under `n_rep` posterior
/// draws. Every template sees the same posterior draw in a given replicate;
/// its random stream is derived from `seed` and the template's content, so
/// permuting templates permutes the output rows. Hits in templates are
/// ignored. `athletes` maps template ids to model indices.
pub fn predictive_draws(
    samples: &PosteriorSamples,
    templates: &[SessionRecord],
    athletes: &[String],
    n_rep: usize,
    seed: u64,
) -> Result<PredictiveDraws> {
    if n_rep == 0 {
        return Err(Error::Config("n_rep must be at least 1".into()));
    }
    if samples.n_total() == 0 {
        return Err(Error::InsufficientDraws { needed: 1, got: 0 });
    }
    let spec = &samples.spec;
    let index: Vec<(usize, usize, usize, usize)> = templates
        .iter()
        .enumerate()
        .map(|(j, r)| {
            let s = athletes
                .iter()
                .position(|a| *a == r.athlete_id)
                .filter(|&s| s < spec.n_athletes)
                .ok_or_else(|| Error::OutOfRange(format!("template {j}: athlete {:?} not in the model", r.athlete_id)))?;
            let t = r.stage as usize;
            if t == 0 || t > spec.n_stages {
                return Err(Error::OutOfRange(format!("template {j}: stage {t} outside 1..={}", spec.n_stages)));
            }
            let z = r.race_type.index();
            if z >= spec.n_race_types {
                return Err(Error::OutOfRange(format!("template {j}: race type {}", r.race_type.as_str())));
            }
            Ok((s, t - 1, r.position.index(), z))
        })
        .collect::<Result<_>>()?;

    let draw_index = subsample_indices(samples.n_total(), n_rep);
    let mut unique = draw_index.clone();
    unique.dedup();
    let fx: Vec<Effects> = unique
        .par_iter()
        .map(|&k| Ok(ParameterState::from_coords(spec, samples.pooled_row(k).to_vec())?.expand()))
        .collect::<Result<_>>()?;
    // subsample indices are non-decreasing, so dedup leaves them sorted
    let slot: Vec<usize> = draw_index.iter().map(|k| unique.binary_search(k).expect("present")).collect();

    let rows: Vec<Vec<u8>> = templates
        .par_iter()
        .zip(&index)
        .map(|(r, &(s, t, x, z))| {
            let mut rng = ChaCha20Rng::seed_from_u64(template_seed(seed, r));
            slot.iter()
                .map(|&u| {
                    let p = inv_logit(fx[u].eta(s, t, x, z));
                    Binomial::new(SHOTS_PER_BOUT as u64, p)
                        .map(|b| b.sample(&mut rng) as u8)
                        .map_err(|e| Error::Numerical(format!("binomial with p = {p}: {e}")))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(PredictiveDraws {
        n_templates: templates.len(),
        n_rep,
        draw_index,
        hits: rows.concat(),
    })
}

/// Settings shared by the predictive checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PpcOptions {
    /// Replicates; `None` uses every retained draw.
    pub n_rep: Option<usize>,
    pub seed: u64,
}

impl Default for PpcOptions {
    fn default() -> Self {
        PpcOptions { n_rep: None, seed: 1 }
    }
}

fn check_dataset(samples: &PosteriorSamples, d: &Dataset) -> Result<()> {
    let spec = &samples.spec;
    if d.n_athletes() != spec.n_athletes || d.n_stages() != spec.n_stages {
        return Err(Error::Dimension(format!(
            "draws have {} athletes x {} stages, dataset {} x {}",
            spec.n_athletes,
            spec.n_stages,
            d.n_athletes(),
            d.n_stages()
        )));
    }
    Ok(())
}

/// Joint replicates of the observed schedule (template `j` is record `j`).
pub fn replicate_dataset(samples: &PosteriorSamples, d: &Dataset, opts: &PpcOptions) -> Result<PredictiveDraws> {
    check_dataset(samples, d)?;
    let n_rep = opts.n_rep.unwrap_or(samples.n_total());
    predictive_draws(samples, d.records(), d.athletes(), n_rep, opts.seed)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageTotal {
    /// 1-based.
    pub stage: usize,
    pub sessions: usize,
    pub summary: PredictiveSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellPercentage {
    pub race_type: RaceType,
    pub position: Position,
    pub shots: u64,
    /// Shooting percentage (0 to 100).
    pub summary: PredictiveSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CumulativePoint {
    pub stage: u32,
    pub race_seq: u32,
    pub race_type: RaceType,
    pub shots: u64,
    pub summary: PredictiveSummary,
}

fn check_replicates(reps: &PredictiveDraws, d: &Dataset) -> Result<()> {
    if reps.n_templates != d.len() {
        return Err(Error::Dimension(format!(
            "{} replicated templates for {} records",
            reps.n_templates,
            d.len()
        )));
    }
    Ok(())
}

/// Total hits per stage over the sessions actually held there.
pub fn stage_totals(reps: &PredictiveDraws, d: &Dataset) -> Result<Vec<StageTotal>> {
    check_replicates(reps, d)?;
    (1..=d.n_stages())
        .map(|t| {
            let members: Vec<usize> = (0..d.len()).filter(|&i| d.records()[i].stage as usize == t).collect();
            let observed: u64 = members.iter().map(|&i| d.records()[i].hits as u64).sum();
            Ok(StageTotal {
                stage: t,
                sessions: members.len(),
                summary: PredictiveSummary::from_draws(reps.sum_over(&members), Some(observed as f64))?,
            })
        })
        .collect()
}

/// Aggregate shooting percentage per (race type, position) cell with shots.
pub fn race_position(reps: &PredictiveDraws, d: &Dataset) -> Result<Vec<CellPercentage>> {
    check_replicates(reps, d)?;
    let mut out = Vec::new();
    for z in RaceType::ALL {
        for x in Position::ALL {
            let members: Vec<usize> = (0..d.len())
                .filter(|&i| d.records()[i].race_type == z && d.records()[i].position == x)
                .collect();
            if members.is_empty() {
                continue;
            }
            let shots = members.len() as u64 * SHOTS_PER_BOUT as u64;
            let observed: u64 = members.iter().map(|&i| d.records()[i].hits as u64).sum();
            let pct = |h: f64| 100.0 * h / shots as f64;
            let draws = reps.sum_over(&members).into_iter().map(pct).collect();
            out.push(CellPercentage {
                race_type: z,
                position: x,
                shots,
                summary: PredictiveSummary::from_draws(draws, Some(pct(observed as f64)))?,
            });
        }
    }
    Ok(out)
}

/// Cumulative hits over the athlete's races in chronological order. Each
/// interval is a quantile of the cumulative sum of joint replicates.
pub fn cumulative(reps: &PredictiveDraws, d: &Dataset, athlete: &str) -> Result<Vec<CumulativePoint>> {
    check_replicates(reps, d)?;
    if d.athletes().iter().all(|a| a != athlete) {
        return Err(Error::OutOfRange(format!("unknown athlete {athlete:?}")));
    }
    let mut races: Vec<(u32, u32, RaceType)> = d
        .records()
        .iter()
        .filter(|r| r.athlete_id == athlete)
        .map(|r| (r.stage, r.race_seq, r.race_type))
        .collect();
    races.sort_by_key(|&(t, q, _)| (t, q));
    races.dedup();
    if races.is_empty() {
        return Err(Error::Empty(format!("{athlete:?} has no races")));
    }
    let mut running = vec![0.0; reps.n_rep];
    let (mut observed, mut shots) = (0u64, 0u64);
    races
        .into_iter()
        .map(|(stage, race_seq, race_type)| {
            let members: Vec<usize> = (0..d.len())
                .filter(|&i| {
                    let r = &d.records()[i];
                    r.athlete_id == athlete && r.stage == stage && r.race_seq == race_seq
                })
                .collect();
            for (acc, h) in running.iter_mut().zip(reps.sum_over(&members)) {
                *acc += h;
            }
            observed += members.iter().map(|&i| d.records()[i].hits as u64).sum::<u64>();
            shots += members.len() as u64 * SHOTS_PER_BOUT as u64;
            Ok(CumulativePoint {
                stage,
                race_seq,
                race_type,
                shots,
                summary: PredictiveSummary::from_draws(running.clone(), Some(observed as f64))?,
            })
        })
        .collect()
}

pub fn stage_totals_ppc(samples: &PosteriorSamples, d: &Dataset, opts: &PpcOptions) -> Result<Vec<StageTotal>> {
    stage_totals(&replicate_dataset(samples, d, opts)?, d)
}

pub fn race_position_ppc(samples: &PosteriorSamples, d: &Dataset, opts: &PpcOptions) -> Result<Vec<CellPercentage>> {
    race_position(&replicate_dataset(samples, d, opts)?, d)
}

pub fn cumulative_hits(
    samples: &PosteriorSamples,
    d: &Dataset,
    athlete: &str,
    opts: &PpcOptions,
) -> Result<Vec<CumulativePoint>> {
    cumulative(&replicate_dataset(samples, d, opts)?, d, athlete)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelSpec;
    use crate::sampler::SamplerConfig;

    fn record(athlete: &str, stage: u32, race_seq: u32, bout_seq: u32, position: Position) -> SessionRecord {
        SessionRecord {
            athlete_id: athlete.into(),
            stage,
            race_type: RaceType::Sprint,
            position,
            race_seq,
            bout_seq,
            hits: 3,
        }
    }

    fn two_athletes() -> Dataset {
        let mut recs = Vec::new();
        for (a, t) in [("a", 1), ("b", 1), ("a", 2), ("b", 2)] {
            recs.push(record(a, t, 1, 1, Position::Prone));
            recs.push(record(a, t, 1, 2, Position::Standing));
        }
        Dataset::from_records(recs, Some(2)).unwrap()
    }

    /// `n` identical draws of `coords`.
    fn constant_samples(spec: &ModelSpec, coords: &[f64], n: usize) -> PosteriorSamples {
        let draws = coords.repeat(n);
        PosteriorSamples::new(spec.clone(), SamplerConfig::default(), "test".into(), vec![], 1, draws).unwrap()
    }

    fn spec() -> ModelSpec {
        ModelSpec::new(2, 2, 4).unwrap()
    }

    #[test]
    fn zero_draws_give_half_and_unit_odds() {
        let s = constant_samples(&spec(), &vec![0.0; spec().dim()], 10);
        for m in mu_summary(&s, None).unwrap() {
            assert_eq!((m.mean, m.lower, m.upper), (0.5, 0.5, 0.5));
        }
        for row in beta_trajectories(&s).unwrap() {
            assert!(row.iter().all(|c| c.odds_ratio.mean == 1.0 && c.odds_ratio.width() == 0.0));
        }
        for row in race_effects(&s).unwrap() {
            assert!(row.iter().all(|c| c.odds_ratio.mean == 1.0));
        }
    }

    #[test]
    fn position_expansion_identity() {
        let spec = spec();
        let mut p = ParameterState::zeros(&spec);
        p.gamma_free_mut().fill(0.3);
        let s = constant_samples(&spec, p.coords(), 5);
        for [prone, standing] in position_effects(&s).unwrap() {
            assert!((prone.odds_ratio.mean - 0.3f64.exp()).abs() < 1e-12);
            assert!((standing.odds_ratio.mean - (-0.3f64).exp()).abs() < 1e-12);
            assert!((prone.geometric_mean() * standing.geometric_mean() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn geometric_means_multiply_to_one_per_stage() {
        let spec = spec();
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let draws: Vec<f64> = (0..50).flat_map(|_| spec.sample_prior(&mut rng).into_coords()).collect();
        let s = PosteriorSamples::new(spec.clone(), SamplerConfig::default(), "t".into(), vec![], 1, draws).unwrap();
        let b = beta_trajectories(&s).unwrap();
        for t in 0..spec.n_stages {
            let prod: f64 = b.iter().map(|row| row[t].geometric_mean()).product();
            assert!((prod - 1.0).abs() < 1e-9);
        }
        for row in race_effects(&s).unwrap() {
            assert!(row.iter().map(|c| c.log.mean).sum::<f64>().abs() < 1e-9);
        }
    }

    #[test]
    fn saturated_predictor_hits_everything() {
        let spec = spec();
        let mut p = ParameterState::zeros(&spec);
        p.mu_mut().fill(20.0);
        let s = constant_samples(&spec, p.coords(), 20);
        let d = two_athletes();
        let reps = replicate_dataset(&s, &d, &PpcOptions::default()).unwrap();
        assert!((0..reps.n_templates()).all(|j| reps.template(j).iter().all(|&h| h == 5)));
        let totals = stage_totals(&reps, &d).unwrap();
        assert_eq!(totals[0].summary.mean, 20.0);
        assert_eq!(totals[0].summary.width(), 0.0);
        assert_eq!(totals[0].sessions, 4);
        let path = cumulative(&reps, &d, "a").unwrap();
        assert_eq!(path.len(), 2);
        assert_eq!((path[0].summary.mean, path[1].summary.mean), (10.0, 20.0));
        assert_eq!(path[1].shots, 20);
    }

    #[test]
    fn even_odds_average_two_and_a_half() {
        let spec = spec();
        let s = constant_samples(&spec, &vec![0.0; spec.dim()], 1);
        let t = [record("a", 1, 1, 1, Position::Prone)];
        let reps = predictive_draws(&s, &t, &["a".into(), "b".into()], 10_000, 3).unwrap();
        let m = reps.template(0).iter().map(|&h| h as f64).sum::<f64>() / 1e4;
        assert!((m - 2.5).abs() < 0.05, "{m}");
        assert_eq!(reps, predictive_draws(&s, &t, &["a".into(), "b".into()], 10_000, 3).unwrap());
    }

    #[test]
    fn templates_outside_the_model_are_rejected() {
        let s = constant_samples(&spec(), &vec![0.0; spec().dim()], 1);
        let ids = ["a".to_string(), "b".to_string()];
        assert!(matches!(
            predictive_draws(&s, &[record("c", 1, 1, 1, Position::Prone)], &ids, 1, 0),
            Err(Error::OutOfRange(_))
        ));
        assert!(predictive_draws(&s, &[record("a", 3, 1, 1, Position::Prone)], &ids, 1, 0).is_err());
        assert!(predictive_draws(&s, &[record("a", 1, 1, 1, Position::Prone)], &ids, 0, 0).is_err());
    }

    #[test]
    fn subsampling_is_even() {
        assert_eq!(subsample_indices(10, 5), vec![0, 2, 4, 6, 8]);
        assert_eq!(subsample_indices(2, 4), vec![0, 0, 1, 1]);
        assert_eq!(subsample_indices(4, 4), vec![0, 1, 2, 3]);
    }

    #[test]
    fn summary_quantiles_and_mid_p() {
        let s = PredictiveSummary::from_draws((1..=5).map(f64::from).collect(), Some(3.0)).unwrap();
        assert_eq!(s.median, 3.0);
        assert!((s.lower - 1.1).abs() < 1e-12);
        assert!((s.upper - 4.9).abs() < 1e-12);
        assert_eq!(s.tail_probability, Some(0.5));
        assert_eq!(s.covers_observed(), Some(true));
        assert!(PredictiveSummary::from_draws(vec![], None).is_err());
    }

    #[test]
    fn race_position_cells_and_participation() {
        let spec = spec();
        let s = constant_samples(&spec, &vec![0.0; spec.dim()], 200);
        let d = two_athletes();
        let reps = replicate_dataset(&s, &d, &PpcOptions::default()).unwrap();
        let cells = race_position(&reps, &d).unwrap();
        assert_eq!(cells.len(), 2);
        assert_eq!(cells[0].shots, 20);
        assert_eq!(cells[0].summary.observed, Some(60.0));
        assert!(cells.iter().all(|c| (c.summary.mean - 50.0).abs() < 5.0));
        assert!(matches!(cumulative(&reps, &d, "zz"), Err(Error::OutOfRange(_))));
    }
}
