//! Property tests for the invariants of each module.

use biathlon_bayes::data::{generate_synthetic, parse_sessions, write_sessions, Dataset, SessionRecord, SynthConfig};
use biathlon_bayes::explore::{
    accuracy_summary, cluster_athletes, cluster_athletes_with, favorite_race_counts, spearman, ClusterOptions,
};
use biathlon_bayes::model::{log_likelihood, ModelSpec, ParameterState};
use biathlon_bayes::predict::{predictive_draws, PredictiveSummary};
use biathlon_bayes::sampler::{PosteriorSamples, SamplerConfig};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn season(athletes: usize, stages: usize, participation: f64, seed: u64) -> Dataset {
    let mut cfg = SynthConfig::new(athletes, stages, seed);
    cfg.participation_rate = participation;
    generate_synthetic(&cfg).unwrap().0
}

fn shuffled(d: &Dataset, seed: u64) -> Dataset {
    let mut records = d.records().to_vec();
    records.shuffle(&mut ChaCha20Rng::seed_from_u64(seed));
    Dataset::with_athletes(records, d.athletes().to_vec(), Some(d.n_stages())).unwrap()
}

/// Samples with arbitrary draws around zero; enough for predictive properties.
fn fake_samples(spec: &ModelSpec, n_draws: usize, seed: u64) -> PosteriorSamples {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let draws = (0..n_draws * spec.dim()).map(|_| rng.random_range(-1.5..1.5)).collect();
    PosteriorSamples::new(spec.clone(), SamplerConfig::default(), String::new(), Vec::new(), 1, draws).unwrap()
}

/// Type-7 quantile, written out from the definition.
fn type7(draws: &[f64], p: f64) -> f64 {
    let mut v = draws.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = (v.len() - 1) as f64 * p;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    v[lo] + (h - h.floor()) * (v[hi] - v[lo])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn csv_round_trip(athletes in 1usize..6, stages in 1usize..5, part in 0.3f64..1.0, seed in any::<u64>()) {
        let d = season(athletes, stages, part, seed);
        prop_assume!(!d.is_empty());
        let mut bytes = Vec::new();
        write_sessions(&d, &mut bytes).unwrap();
        let back = parse_sessions(bytes.as_slice()).unwrap();
        prop_assert_eq!(back.records(), d.records());
        let mut again = Vec::new();
        write_sessions(&back, &mut again).unwrap();
        prop_assert_eq!(again, bytes);
    }

    #[test]
    fn full_participation_bout_counts(athletes in 1usize..8, stages in 1usize..12, seed in any::<u64>()) {
        let cfg = SynthConfig::new(athletes, stages, seed);
        let (d, _) = generate_synthetic(&cfg).unwrap();
        let per_athlete: usize = cfg.schedule().totals().iter().zip([4, 2, 4, 4]).map(|(n, b)| n * b).sum();
        prop_assert_eq!(d.len(), athletes * per_athlete);
        prop_assert!(d.total_hits() <= d.total_shots());
        prop_assert_eq!(d.total_shots(), 5 * d.len() as u64);
    }

    #[test]
    fn summary_ignores_record_order(athletes in 2usize..6, stages in 1usize..5, seed in any::<u64>(), perm in any::<u64>()) {
        let d = season(athletes, stages, 0.8, seed);
        prop_assume!(!d.is_empty());
        let a = accuracy_summary(&d).unwrap();
        let b = accuracy_summary(&shuffled(&d, perm)).unwrap();
        prop_assert_eq!(&a.overall, &b.overall);
        for row in &a.rows {
            prop_assert_eq!(Some(row), b.row(&row.athlete));
        }
    }

    #[test]
    fn favorite_counts_cover_every_eligible_athlete(athletes in 2usize..10, stages in 1usize..5, seed in any::<u64>()) {
        let d = season(athletes, stages, 0.7, seed);
        prop_assume!(!d.is_empty());
        let c = favorite_race_counts(&accuracy_summary(&d).unwrap());
        prop_assert_eq!(c.favorite.iter().sum::<usize>(), c.eligible());
        prop_assert_eq!(c.least.iter().sum::<usize>(), c.eligible());
    }

    #[test]
    fn likelihood_ignores_record_order(athletes in 2usize..5, stages in 1usize..4, seed in any::<u64>(), perm in any::<u64>()) {
        let d = season(athletes, stages, 0.8, seed);
        let spec = ModelSpec::for_dataset(&d).unwrap();
        let p = spec.sample_prior(&mut ChaCha20Rng::seed_from_u64(seed ^ 1));
        let a = log_likelihood(&p, &d).unwrap();
        let b = log_likelihood(&p, &shuffled(&d, perm)).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
    }

    #[test]
    fn extreme_mu_keeps_likelihood_finite(sign in prop::bool::ANY, seed in any::<u64>()) {
        let d = season(3, 2, 1.0, seed);
        let spec = ModelSpec::for_dataset(&d).unwrap();
        let mut p = ParameterState::zeros(&spec);
        p.mu_mut().fill(if sign { 20.0 } else { -20.0 });
        prop_assert!(log_likelihood(&p, &d).unwrap().is_finite());
    }

    #[test]
    fn spearman_ignores_monotone_transforms(
        pairs in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 3..40),
        scale in 0.1f64..10.0,
    ) {
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let rho = match spearman(&a, &b) { Ok(r) => r, Err(_) => return Ok(()) };
        let ta: Vec<f64> = a.iter().map(|x| (x / 20.0).exp() * scale).collect();
        let tb: Vec<f64> = b.iter().map(|x| x * x * x - 7.0).collect();
        prop_assert!((spearman(&ta, &tb).unwrap() - rho).abs() < 1e-12);
        let flipped: Vec<f64> = b.iter().map(|x| -x).collect();
        prop_assert!((spearman(&a, &flipped).unwrap() + rho).abs() < 1e-12);
    }

    #[test]
    fn merge_heights_never_decrease(athletes in 3usize..12, seed in any::<u64>(), standardize in prop::bool::ANY) {
        let d = season(athletes, 4, 1.0, seed);
        let t = accuracy_summary(&d).unwrap();
        let a = cluster_athletes_with(&t, 2, ClusterOptions { standardize }).unwrap();
        for w in a.merges.windows(2) {
            prop_assert!(w[0].height <= w[1].height);
        }
        let mut labels = a.labels.clone();
        labels.sort();
        labels.dedup();
        prop_assert_eq!(labels, vec![1, 2]);
        let again = cluster_athletes(&t, 2).unwrap();
        prop_assert_eq!(again.athletes.len(), a.athletes.len());
    }

    #[test]
    fn predictive_draws_follow_template_permutation(seed in any::<u64>(), perm in any::<u64>()) {
        let d = season(3, 2, 1.0, seed);
        let spec = ModelSpec::for_dataset(&d).unwrap();
        let samples = fake_samples(&spec, 30, seed);
        let templates: Vec<SessionRecord> = d.records().to_vec();
        let mut order: Vec<usize> = (0..templates.len()).collect();
        order.shuffle(&mut ChaCha20Rng::seed_from_u64(perm));
        let permuted: Vec<SessionRecord> = order.iter().map(|&j| templates[j].clone()).collect();
        let a = predictive_draws(&samples, &templates, d.athletes(), 30, 9).unwrap();
        let b = predictive_draws(&samples, &permuted, d.athletes(), 30, 9).unwrap();
        for (k, &j) in order.iter().enumerate() {
            prop_assert_eq!(b.template(k), a.template(j));
        }
    }

    #[test]
    fn aggregate_means_are_sums_of_member_means(seed in any::<u64>(), n_members in 1usize..20) {
        let d = season(3, 2, 1.0, seed);
        let spec = ModelSpec::for_dataset(&d).unwrap();
        let samples = fake_samples(&spec, 40, seed);
        let reps = predictive_draws(&samples, d.records(), d.athletes(), 40, seed).unwrap();
        let members: Vec<usize> = (0..n_members.min(reps.n_templates())).collect();
        let total = PredictiveSummary::from_draws(reps.sum_over(&members), None).unwrap();
        let parts: f64 = members
            .iter()
            .map(|&j| reps.template(j).iter().map(|&h| h as f64).sum::<f64>() / reps.n_rep() as f64)
            .sum();
        prop_assert!((total.mean - parts).abs() <= 1e-9 * parts.abs().max(1.0));
    }

    #[test]
    fn intervals_are_recomputable_by_sorting(draws in prop::collection::vec(-100.0f64..100.0, 1..500)) {
        let s = PredictiveSummary::from_draws(draws.clone(), None).unwrap();
        prop_assert_eq!(s.lower, type7(&draws, 0.025));
        prop_assert_eq!(s.median, type7(&draws, 0.5));
        prop_assert_eq!(s.upper, type7(&draws, 0.975));
        prop_assert!(s.lower <= s.median && s.median <= s.upper);
    }

    #[test]
    fn tail_probability_is_mid_p(draws in prop::collection::vec(0u8..=5, 1..200), obs in 0u8..=5) {
        let xs: Vec<f64> = draws.iter().map(|&h| h as f64).collect();
        let s = PredictiveSummary::from_draws(xs, Some(obs as f64)).unwrap();
        let above = draws.iter().filter(|&&h| h > obs).count() as f64;
        let equal = draws.iter().filter(|&&h| h == obs).count() as f64;
        prop_assert_eq!(s.tail_probability.unwrap(), (above + equal / 2.0) / draws.len() as f64);
    }
}
