//! Central finite-difference check of the analytic gradient.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, RaceType, SessionRecord, SHOTS_PER_BOUT};
use crate::error::{Error, Result};
use crate::model::{ModelSpec, Posterior};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub n_points: usize,
    pub max_rel_error: f64,
    pub argmax_point: usize,
    pub argmax_coord: usize,
    pub argmax_name: Option<String>,
}

/// Step for coordinate value `x`.
pub fn step(x: f64) -> f64 {
    1e-5 * (1.0 + x.abs())
}

/// `|a - b| / max(1, |a|, |b|)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1f64.max(a.abs()).max(b.abs())
}

/// Compares `grad` against central differences of `f` on the coordinates in
/// `coords` at every point.
pub fn finite_difference_check<F, G>(f: F, grad: G, points: &[Vec<f64>], coords: &[usize]) -> Result<GradCheckReport>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
    G: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    if points.is_empty() {
        return Err(Error::Empty("no points to check".into()));
    }
    let worst: Vec<(f64, usize)> = points
        .par_iter()
        .map(|x| {
            let g = grad(x)?;
            let mut worst = (0.0, coords.first().copied().unwrap_or(0));
            let mut y = x.clone();
            for &j in coords {
                let h = step(x[j]);
                y[j] = x[j] + h;
                let up = f(&y)?;
                y[j] = x[j] - h;
                let down = f(&y)?;
                y[j] = x[j];
                let e = relative_error(g[j], (up - down) / (2.0 * h));
                if !e.is_finite() {
                    return Err(Error::Numerical(format!("non-finite gradient comparison at coordinate {j}")));
                }
                if e > worst.0 {
                    worst = (e, j);
                }
            }
            Ok(worst)
        })
        .collect::<Result<_>>()?;
    let (argmax_point, &(max_rel_error, argmax_coord)) = worst
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
        .expect("non-empty");
    Ok(GradCheckReport {
        n_points: points.len(),
        max_rel_error,
        argmax_point,
        argmax_coord,
        argmax_name: None,
    })
}

/// Random check point: effects N(0, 0.5), log-scales N(0, 0.3), clamped
/// coordinates at zero.
fn random_point(spec: &ModelSpec, rng: &mut ChaCha20Rng) -> Vec<f64> {
    let l = spec.layout();
    let effect = Normal::new(0.0, 0.5).expect("valid sd");
    let scale = Normal::new(0.0, 0.3).expect("valid sd");
    (0..spec.dim())
        .map(|j| {
            if spec.is_clamped(j) {
                0.0
            } else if l.log_sigma_range().contains(&j) {
                scale.sample(rng)
            } else {
                effect.sample(rng)
            }
        })
        .collect()
}

/// Checks `Posterior::gradient` at `n_points` seeded random points.
pub fn gradient_check(spec: &ModelSpec, d: &Dataset, n_points: usize, seed: u64) -> Result<GradCheckReport> {
    let post = Posterior::new(spec.clone(), d)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let points: Vec<Vec<f64>> = (0..n_points).map(|_| random_point(spec, &mut rng)).collect();
    let coords = spec.free_coordinates();
    let mut report = finite_difference_check(|x| post.log_density(x), |x| post.gradient(x), &points, &coords)?;
    report.argmax_name = spec.param_names().get(report.argmax_coord).cloned();
    Ok(report)
}

/// Random season for shape `(S, T, Z)`: every athlete starts each of the first
/// `Z` formats at every stage with probability 0.8; hits are uniform on 0..=5.
pub fn random_dataset(n_athletes: usize, n_stages: usize, n_race_types: usize, seed: u64) -> Result<Dataset> {
    if n_race_types > RaceType::ALL.len() {
        return Err(Error::Config(format!("at most {} race types", RaceType::ALL.len())));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let ids: Vec<String> = (1..=n_athletes).map(|s| format!("athlete_{s:02}")).collect();
    let mut records = Vec::new();
    for stage in 1..=n_stages as u32 {
        for (q, &race_type) in RaceType::ALL[..n_race_types].iter().enumerate() {
            for id in &ids {
                if rng.random::<f64>() >= 0.8 {
                    continue;
                }
                for (b, &position) in race_type.bout_positions().iter().enumerate() {
                    records.push(SessionRecord {
                        athlete_id: id.clone(),
                        stage,
                        race_type,
                        position,
                        race_seq: q as u32 + 1,
                        bout_seq: b as u32 + 1,
                        hits: rng.random_range(0..=SHOTS_PER_BOUT as u8),
                    });
                }
            }
        }
    }
    Dataset::with_athletes(records, ids, Some(n_stages))
}
