//! Exploratory summaries of a season.
//!
//! Accuracies are exact `hits / shots` ratios until they are rendered.

mod cluster;
mod spearman;
mod tables;

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use self::cluster::{cluster_athletes, cluster_athletes_with, ClusterAssignment, ClusterOptions, Merge};
pub use self::spearman::{average_ranks, rank_correlations, spearman, Correlation, Feature};
pub use self::tables::{
    load_published_table, load_ranks, write_correlations_csv, write_deviation_csv, write_favorites_csv,
    write_labels_csv, write_merges_csv, write_summary_csv,
};
use crate::data::{Dataset, Position, RaceType, SHOTS_PER_BOUT};
use crate::error::{Error, Result};

/// An exact accuracy. Equality is structural (`1/2 != 2/4`); use
/// [`Ratio::cmp_value`] to compare values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    pub hits: u64,
    pub shots: u64,
}

impl Ratio {
    pub fn new(hits: u64, shots: u64) -> Option<Self> {
        (shots > 0 && hits <= shots).then_some(Ratio { hits, shots })
    }

    pub fn value(&self) -> f64 {
        self.hits as f64 / self.shots as f64
    }

    /// Percentage in tenths, exact halves rounded to even (76.25 prints as
    /// 76.2, 88.75 as 88.8), which is how the published table was rendered.
    pub fn tenths(&self) -> u64 {
        let (q, r) = (1000 * self.hits / self.shots, 1000 * self.hits % self.shots);
        match (2 * r).cmp(&self.shots) {
            Ordering::Greater => q + 1,
            Ordering::Equal if q % 2 == 1 => q + 1,
            _ => q,
        }
    }

    /// `"84.2"` style percentage.
    pub fn percent(&self) -> String {
        let t = self.tenths();
        format!("{}.{}", t / 10, t % 10)
    }

    /// Compares values exactly.
    pub fn cmp_value(&self, other: &Ratio) -> Ordering {
        (self.hits as u128 * other.shots as u128).cmp(&(other.hits as u128 * self.shots as u128))
    }

    /// `self - other` as a float, computed from the exact difference.
    pub fn minus(&self, other: &Ratio) -> f64 {
        let num = self.hits as i128 * other.shots as i128 - other.hits as i128 * self.shots as i128;
        num as f64 / (self.shots as f64 * other.shots as f64)
    }
}


impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.hits, self.shots)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
struct Tally {
    hits: u64,
    shots: u64,
}

impl Tally {
    fn add(&mut self, hits: u8) {
        self.hits += hits as u64;
        self.shots += SHOTS_PER_BOUT as u64;
    }

    fn ratio(&self) -> Option<Ratio> {
        Ratio::new(self.hits, self.shots)
    }
}

/// One athlete's row, or the overall row. Absent cells had no shots.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub athlete: String,
    /// Prone, standing.
    pub position: [Option<Ratio>; 2],
    /// Individual, sprint, pursuit, mass start.
    pub race: [Option<Ratio>; 4],
    pub total_shots: u64,
    pub total_hits: u64,
    pub overall: Option<Ratio>,
}

impl SummaryRow {
    pub fn by_position(&self, p: Position) -> Option<Ratio> {
        self.position[p.index()]
    }

    pub fn by_race(&self, r: RaceType) -> Option<Ratio> {
        self.race[r.index()]
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryTable {
    pub rows: Vec<SummaryRow>,
    pub overall: SummaryRow,
}

impl SummaryTable {
    pub fn row(&self, athlete: &str) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.athlete == athlete)
    }
}

fn row_from(athlete: String, pos: &[Tally; 2], race: &[Tally; 4], total: &Tally) -> SummaryRow {
    SummaryRow {
        athlete,
        position: [pos[0].ratio(), pos[1].ratio()],
        race: [race[0].ratio(), race[1].ratio(), race[2].ratio(), race[3].ratio()],
        total_shots: total.shots,
        total_hits: total.hits,
        overall: total.ratio(),
    }
}

/// Per-athlete accuracy by position and race format, plus the overall row.
/// Athletes appear in dataset order.
pub fn accuracy_summary(d: &Dataset) -> Result<SummaryTable> {
    if d.is_empty() {
        return Err(Error::Empty("accuracy summary of an empty dataset".into()));
    }
    let n = d.n_athletes();
    let mut pos = vec![<[Tally; 2]>::default(); n];
    let mut race = vec![<[Tally; 4]>::default(); n];
    let mut total = vec![Tally::default(); n];
    let mut all_pos = <[Tally; 2]>::default();
    let mut all_race = <[Tally; 4]>::default();
    let mut all = Tally::default();
    for (i, r) in d.records().iter().enumerate() {
        let s = d.athlete_index(i);
        pos[s][r.position.index()].add(r.hits);
        race[s][r.race_type.index()].add(r.hits);
        total[s].add(r.hits);
        all_pos[r.position.index()].add(r.hits);
        all_race[r.race_type.index()].add(r.hits);
        all.add(r.hits);
    }
    let rows = d
        .athletes()
        .iter()
        .enumerate()
        .map(|(s, a)| row_from(a.clone(), &pos[s], &race[s], &total[s]))
        .collect();
    Ok(SummaryTable {
        rows,
        overall: row_from("Overall".into(), &all_pos, &all_race, &all),
    })
}

/// Favorite and least favorite race format counts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FavoriteCounts {
    /// Indexed by [`RaceType::index`].
    pub favorite: [usize; 4],
    pub least: [usize; 4],
    /// Athletes with fewer than two formats.
    pub excluded: Vec<String>,
    /// Human-readable notes on every tie that had to be broken.
    pub ties: Vec<String>,
}

impl FavoriteCounts {
    pub fn eligible(&self) -> usize {
        self.favorite.iter().sum()
    }
}

/// Per athlete, the formats with the highest and lowest accuracy. Ties go to
/// the format with more shots, then to the earlier format in
/// individual, sprint, pursuit, mass start order.
pub fn favorite_race_counts(t: &SummaryTable) -> FavoriteCounts {
    let mut out = FavoriteCounts {
        favorite: [0; 4],
        least: [0; 4],
        excluded: Vec::new(),
        ties: Vec::new(),
    };
    for row in &t.rows {
        let cells: Vec<(RaceType, Ratio)> = RaceType::ALL
            .iter()
            .filter_map(|&r| row.by_race(r).map(|c| (r, c)))
            .collect();
        if cells.len() < 2 {
            out.excluded.push(row.athlete.clone());
            continue;
        }
        for (want_max, label) in [(true, "favorite"), (false, "least favorite")] {
            let best = if want_max {
                cells.iter().map(|c| c.1).max_by(Ratio::cmp_value)
            } else {
                cells.iter().map(|c| c.1).min_by(Ratio::cmp_value)
            }
            .expect("at least two cells");
            let tied: Vec<&(RaceType, Ratio)> = cells.iter().filter(|c| c.1.cmp_value(&best).is_eq()).collect();
            let pick = tied
                .iter()
                .min_by(|a, b| b.1.shots.cmp(&a.1.shots).then(a.0.index().cmp(&b.0.index())))
                .expect("non-empty")
                .0;
            if tied.len() > 1 {
                let names: Vec<&str> = tied.iter().map(|c| c.0.as_str()).collect();
                out.ties.push(format!(
                    "{}: {label} tie at {}% between {}, chose {}",
                    row.athlete,
                    best.percent(),
                    names.join(", "),
                    pick.as_str()
                ));
            }
            let slot = if want_max { &mut out.favorite } else { &mut out.least };
            slot[pick.index()] += 1;
        }
    }
    out
}

/// Athlete-by-stage accuracy minus the pooled stage accuracy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationMatrix {
    pub athletes: Vec<String>,
    /// Pooled stage accuracy; absent for stages without records.
    pub stage_mean: Vec<Option<Ratio>>,
    pub athlete_stage: Vec<Vec<Option<Ratio>>>,
    /// `[athlete][stage]`; absent where the athlete did not shoot.
    pub deviation: Vec<Vec<Option<f64>>>,
}

impl DeviationMatrix {
    pub fn n_stages(&self) -> usize {
        self.stage_mean.len()
    }

    pub fn row(&self, athlete: &str) -> Option<&[Option<f64>]> {
        self.athletes.iter().position(|a| a == athlete).map(|s| &self.deviation[s][..])
    }
}

pub fn stage_deviation_matrix(d: &Dataset) -> Result<DeviationMatrix> {
    if d.is_empty() {
        return Err(Error::Empty("deviation matrix of an empty dataset".into()));
    }
    let (n, t_n) = (d.n_athletes(), d.n_stages());
    let mut cell = vec![vec![Tally::default(); t_n]; n];
    let mut stage = vec![Tally::default(); t_n];
    for (i, r) in d.records().iter().enumerate() {
        let t = r.stage as usize - 1;
        cell[d.athlete_index(i)][t].add(r.hits);
        stage[t].add(r.hits);
    }
    let stage_mean: Vec<Option<Ratio>> = stage.iter().map(Tally::ratio).collect();
    let athlete_stage: Vec<Vec<Option<Ratio>>> = cell.iter().map(|row| row.iter().map(Tally::ratio).collect()).collect();
    let deviation = athlete_stage
        .iter()
        .map(|row| {
            row.iter()
                .zip(&stage_mean)
                .map(|(a, m)| match (a, m) {
                    (Some(a), Some(m)) => Some(a.minus(m)),
                    _ => None,
                })
                .collect()
        })
        .collect();
    Ok(DeviationMatrix {
        athletes: d.athletes().to_vec(),
        stage_mean,
        athlete_stage,
        deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SessionRecord;

    fn rec(a: &str, stage: u32, race_type: RaceType, position: Position, race_seq: u32, bout_seq: u32, hits: u8) -> SessionRecord {
        SessionRecord {
            athlete_id: a.into(),
            stage,
            race_type,
            position,
            race_seq,
            bout_seq,
            hits,
        }
    }

    #[test]
    fn ratio_rendering_rounds_half_to_even() {
        assert_eq!(Ratio::new(8788, 10440).unwrap().percent(), "84.2");
        assert_eq!(Ratio::new(366, 400).unwrap().percent(), "91.5");
        assert_eq!(Ratio::new(1, 2000).unwrap().percent(), "0.0");
        assert_eq!(Ratio::new(3, 2000).unwrap().percent(), "0.2");
        assert_eq!(Ratio::new(305, 400).unwrap().percent(), "76.2");
        assert_eq!(Ratio::new(355, 400).unwrap().percent(), "88.8");
        assert_eq!(Ratio::new(2, 1999).unwrap().percent(), "0.1");
        assert_eq!(Ratio::new(1, 2001).unwrap().percent(), "0.0");
        assert_eq!(Ratio::new(5, 5).unwrap().percent(), "100.0");
        assert!(Ratio::new(1, 0).is_none());
        assert!(Ratio::new(2, 3).unwrap().cmp_value(&Ratio::new(665, 1000).unwrap()).is_gt());
        assert_eq!(Ratio::new(1, 2).unwrap().cmp_value(&Ratio::new(2, 4).unwrap()), Ordering::Equal);
    }

    #[test]
    fn single_record_summary() {
        let d = Dataset::from_records(vec![rec("a", 1, RaceType::Sprint, Position::Prone, 1, 1, 4)], None).unwrap();
        let t = accuracy_summary(&d).unwrap();
        let row = &t.rows[0];
        assert_eq!(row.overall.unwrap().percent(), "80.0");
        assert_eq!(row.by_race(RaceType::Sprint).unwrap().percent(), "80.0");
        assert!(row.by_race(RaceType::Individual).is_none());
        assert!(row.by_position(Position::Standing).is_none());
        assert_eq!(t.overall.total_shots, 5);
    }

    #[test]
    fn empty_dataset_errors() {
        let d = Dataset::from_records(vec![], Some(1)).unwrap();
        assert!(matches!(accuracy_summary(&d), Err(Error::Empty(_))));
        assert!(stage_deviation_matrix(&d).is_err());
    }

    fn table_with(race: [Option<Ratio>; 4]) -> SummaryTable {
        let row = SummaryRow {
            athlete: "x".into(),
            position: [None, None],
            race,
            total_shots: 0,
            total_hits: 0,
            overall: None,
        };
        SummaryTable {
            rows: vec![row.clone()],
            overall: row,
        }
    }

    #[test]
    fn favorite_of_single_athlete() {
        let r = |p: u64| Ratio::new(p, 10);
        let c = favorite_race_counts(&table_with([r(9), r(8), r(7), r(6)]));
        assert_eq!(c.favorite, [1, 0, 0, 0]);
        assert_eq!(c.least, [0, 0, 0, 1]);
        assert!(c.ties.is_empty());
    }

    #[test]
    fn ties_prefer_more_shots_then_format_order() {
        let c = favorite_race_counts(&table_with([Ratio::new(9, 10), Ratio::new(18, 20), Ratio::new(1, 2), None]));
        assert_eq!(c.favorite, [0, 1, 0, 0]);
        assert_eq!(c.ties.len(), 1);
        let c = favorite_race_counts(&table_with([Ratio::new(9, 10), Ratio::new(9, 10), Ratio::new(1, 2), None]));
        assert_eq!(c.favorite, [1, 0, 0, 0]);
        let c = favorite_race_counts(&table_with([None, None, Ratio::new(1, 2), None]));
        assert_eq!(c.excluded, vec!["x".to_string()]);
        assert_eq!(c.eligible(), 0);
    }

    #[test]
    fn deviations_are_symmetric_for_equal_shots() {
        let mut records = Vec::new();
        for (a, hits) in [("a", [5, 4]), ("b", [4, 4])] {
            for b in 0..2 {
                records.push(rec(a, 1, RaceType::Sprint, [Position::Prone, Position::Standing][b], 1, b as u32 + 1, hits[b]));
            }
        }
        // 9/10 and 8/10 around a pooled 17/20
        let m = stage_deviation_matrix(&Dataset::from_records(records, None).unwrap()).unwrap();
        assert!((m.deviation[0][0].unwrap() - 0.05).abs() < 1e-15);
        assert!((m.deviation[1][0].unwrap() + 0.05).abs() < 1e-15);
    }

    #[test]
    fn single_athlete_deviations_are_zero() {
        let records = vec![
            rec("a", 1, RaceType::Sprint, Position::Prone, 1, 1, 3),
            rec("a", 3, RaceType::Sprint, Position::Prone, 1, 1, 5),
        ];
        let m = stage_deviation_matrix(&Dataset::from_records(records, Some(3)).unwrap()).unwrap();
        assert_eq!(m.deviation[0], vec![Some(0.0), None, Some(0.0)]);
        assert!(m.stage_mean[1].is_none());
    }
}
