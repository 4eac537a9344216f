//! Checks against the bundled 2021/22 women's World Cup fixtures.

use std::fs::File;
use std::path::PathBuf;

use biathlon_bayes::data::{parse_sessions, validate, Dataset, RaceType};
use biathlon_bayes::explore::{
    accuracy_summary, favorite_race_counts, load_published_table, load_ranks, rank_correlations, spearman,
    stage_deviation_matrix, write_summary_csv, Feature, SummaryTable,
};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn season() -> Dataset {
    parse_sessions(File::open(fixture("season_2021_22_reconstructed.csv")).unwrap()).unwrap()
}

fn published() -> SummaryTable {
    load_published_table(File::open(fixture("published_accuracy_table.csv")).unwrap()).unwrap()
}

#[test]
fn season_fixture_shape() {
    let d = season();
    assert_eq!(d.len(), 2088);
    assert_eq!(d.n_athletes(), 30);
    assert_eq!(d.n_stages(), 11);
    assert_eq!(d.total_shots(), 10440);
    assert_eq!(d.total_hits(), 8788);
    let report = validate(&d);
    assert!(report.anomalies.is_empty());
    assert_eq!(report.totals_for("M. Olsbu Roiseland").unwrap().shots, 380);
}

#[test]
fn season_summary_matches_published_table_cell_for_cell() {
    let t = accuracy_summary(&season()).unwrap();
    let mut ours = Vec::new();
    write_summary_csv(&t, &mut ours).unwrap();
    let ours = String::from_utf8(ours).unwrap();
    let theirs = std::fs::read_to_string(fixture("published_accuracy_table.csv")).unwrap();
    let ours: Vec<&str> = ours.lines().collect();
    let theirs: Vec<&str> = theirs.lines().collect();
    assert_eq!(&ours[..theirs.len()], &theirs[..]);
    let o = &t.overall;
    assert_eq!((o.total_hits, o.total_shots), (8788, 10440));
    assert_eq!(o.overall.unwrap().percent(), "84.2");
    assert_eq!(o.position[0].unwrap().percent(), "86.5");
    assert_eq!(o.position[1].unwrap().percent(), "81.9");
    let voigt = t.row("V. Voigt").unwrap();
    assert_eq!((voigt.total_hits, voigt.total_shots), (366, 400));
    assert_eq!(voigt.overall.unwrap().percent(), "91.5");
}

#[test]
fn favorite_counts_from_published_rows() {
    let c = favorite_race_counts(&published());
    let idx = |r: RaceType| r.index();
    assert_eq!(c.favorite[idx(RaceType::Individual)], 8);
    assert_eq!(c.least[idx(RaceType::Individual)], 8);
    assert_eq!(c.favorite[idx(RaceType::MassStart)], 5);
    assert_eq!(c.least[idx(RaceType::MassStart)], 6);
    assert_eq!(c.favorite[idx(RaceType::Pursuit)], 12);
    assert_eq!(c.least[idx(RaceType::Pursuit)], 7);
    assert_eq!(c.favorite[idx(RaceType::Sprint)], 5);
    assert_eq!(c.least[idx(RaceType::Sprint)], 9);
    assert_eq!(c.eligible(), 30);
    assert_eq!(c.least.iter().sum::<usize>(), 30);
    assert_eq!(c.ties.len(), 2, "{:?}", c.ties);
}

#[test]
fn nilsson_mostly_below_stage_average() {
    let m = stage_deviation_matrix(&season()).unwrap();
    let row = m.row("S. Nilsson").unwrap();
    let present: Vec<f64> = row.iter().flatten().copied().collect();
    let negative = present.iter().filter(|&&v| v < 0.0).count();
    assert!(negative * 2 > present.len(), "{negative} of {}", present.len());
}

#[test]
fn deviation_columns_weight_to_zero() {
    let m = stage_deviation_matrix(&season()).unwrap();
    for t in 0..m.n_stages() {
        let mut num = 0.0;
        for s in 0..m.athletes.len() {
            if let (Some(dev), Some(c)) = (m.deviation[s][t], m.athlete_stage[s][t]) {
                num += dev * c.shots as f64;
            }
        }
        assert!(num.abs() < 1e-9, "stage {t}: {num}");
    }
}

#[test]
fn overall_accuracy_against_final_rank() {
    let ranks = load_ranks(File::open(fixture("season_2021_22_ranks.csv")).unwrap()).unwrap();
    let c = rank_correlations(&published(), &ranks).unwrap();
    let get = |f: Feature| c.iter().find(|x| x.feature == f).unwrap().rho;
    assert!((get(Feature::Overall) - -0.148).abs() <= 0.001, "{}", get(Feature::Overall));
    assert!((get(Feature::Race(RaceType::Individual)) - -0.0371).abs() <= 0.001);
    assert!((get(Feature::Race(RaceType::Sprint)) - -0.137).abs() <= 0.001);
    assert!(c.iter().all(|x| x.n == 30));
}

#[test]
fn spearman_invariant_under_monotone_transform() {
    let t = published();
    let ranks: Vec<f64> = (1..=30).map(f64::from).collect();
    let acc: Vec<f64> = t.rows.iter().map(|r| r.overall.unwrap().value()).collect();
    let logit: Vec<f64> = acc.iter().map(|p| (p / (1.0 - p)).ln()).collect();
    let a = spearman(&ranks, &acc).unwrap();
    let b = spearman(&ranks.iter().map(|r| r.powi(3)).collect::<Vec<_>>(), &logit).unwrap();
    assert!((a - b).abs() < 1e-12);
}
