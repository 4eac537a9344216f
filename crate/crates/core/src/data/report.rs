use std::collections::BTreeMap;

use serde::Serialize;

use super::{Dataset, RaceType, SHOTS_PER_BOUT};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Warn,
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub status: CheckStatus,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AthleteTotals {
    pub athlete: String,
    pub bouts: u64,
    pub shots: u64,
    pub hits: u64,
}

/// A race in which an athlete did not shoot the format's bout count.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoutAnomaly {
    pub athlete: String,
    pub stage: u32,
    pub race_seq: u32,
    pub race_type: RaceType,
    pub bouts: usize,
    pub expected: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub n_records: usize,
    pub athletes: Vec<AthleteTotals>,
    pub anomalies: Vec<BoutAnomaly>,
    /// Distinct athletes with at least one bout, per stage.
    pub stage_participation: Vec<usize>,
    /// (athlete, stage) pairs without any bout.
    pub participation_gaps: usize,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn has_warnings(&self) -> bool {
        self.checks.iter().any(|c| c.status == CheckStatus::Warn)
    }

    pub fn totals_for(&self, athlete: &str) -> Option<&AthleteTotals> {
        self.athletes.iter().find(|a| a.athlete == athlete)
    }
}

/// Summarizes a dataset. Nothing here is an error: missing races are
/// expected (qualification cuts, absences) and reported as warnings.
pub fn validate(d: &Dataset) -> ValidationReport {
    let mut athletes: Vec<AthleteTotals> = d
        .athletes()
        .iter()
        .map(|a| AthleteTotals {
            athlete: a.clone(),
            bouts: 0,
            shots: 0,
            hits: 0,
        })
        .collect();
    let mut per_race: BTreeMap<(usize, u32, u32), (RaceType, usize)> = BTreeMap::new();
    let mut present = vec![vec![false; d.n_stages()]; d.n_athletes()];

    for (i, r) in d.records().iter().enumerate() {
        let s = d.athlete_index(i);
        let t = &mut athletes[s];
        t.bouts += 1;
        t.shots += SHOTS_PER_BOUT as u64;
        t.hits += r.hits as u64;
        per_race.entry((s, r.stage, r.race_seq)).or_insert((r.race_type, 0)).1 += 1;
        present[s][r.stage as usize - 1] = true;
    }

    let anomalies: Vec<BoutAnomaly> = per_race
        .into_iter()
        .filter(|(_, (rt, n))| *n != rt.bouts_per_athlete())
        .map(|((s, stage, race_seq), (race_type, bouts))| BoutAnomaly {
            athlete: d.athletes()[s].clone(),
            stage,
            race_seq,
            race_type,
            bouts,
            expected: race_type.bouts_per_athlete(),
        })
        .collect();

    let stage_participation: Vec<usize> = (0..d.n_stages())
        .map(|t| present.iter().filter(|p| p[t]).count())
        .collect();
    let participation_gaps = present.iter().flatten().filter(|p| !**p).count();

    let checks = vec![
        Check {
            name: "bout_counts",
            status: if anomalies.is_empty() { CheckStatus::Pass } else { CheckStatus::Warn },
            detail: if anomalies.is_empty() {
                "every race has the format's bout count".into()
            } else {
                format!("bout count anomaly in {} athlete-races", anomalies.len())
            },
        },
        Check {
            name: "participation",
            status: if participation_gaps == 0 { CheckStatus::Pass } else { CheckStatus::Warn },
            detail: format!("{participation_gaps} athlete-stage pairs without bouts"),
        },
    ];

    ValidationReport {
        n_records: d.len(),
        athletes,
        anomalies,
        stage_participation,
        participation_gaps,
        checks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::parse_sessions;

    #[test]
    fn sprint_with_three_bouts_warns() {
        let d = parse_sessions(
            "athlete,stage,race_type,position,race_seq,bout_seq,hits\n\
             A,1,sprint,prone,1,1,5\nA,1,sprint,standing,1,2,4\nA,1,sprint,standing,1,3,4\n\
             B,1,sprint,prone,1,1,5\nB,1,sprint,standing,1,2,3\n"
                .as_bytes(),
        )
        .unwrap();
        let report = validate(&d);
        assert_eq!(report.anomalies.len(), 1);
        assert_eq!(report.anomalies[0].athlete, "A");
        assert_eq!(report.anomalies[0].bouts, 3);
        let check = report.checks.iter().find(|c| c.name == "bout_counts").unwrap();
        assert_eq!(check.status, CheckStatus::Warn);
        assert!(check.detail.contains("bout count anomaly"));
        assert_eq!(report.totals_for("A").unwrap().shots, 15);
    }

    #[test]
    fn empty_dataset_passes() {
        let d = parse_sessions("athlete,stage,race_type,position,race_seq,bout_seq,hits\n".as_bytes()).unwrap();
        let report = validate(&d);
        assert!(report.athletes.is_empty());
        assert!(!report.has_warnings());
    }

    #[test]
    fn gaps_are_warnings() {
        let d = parse_sessions(
            "athlete,stage,race_type,position,race_seq,bout_seq,hits\n\
             A,1,sprint,prone,1,1,5\nA,1,sprint,standing,1,2,4\n\
             B,2,sprint,prone,1,1,5\nB,2,sprint,standing,1,2,3\n"
                .as_bytes(),
        )
        .unwrap();
        let report = validate(&d);
        assert_eq!(report.stage_participation, vec![1, 1]);
        assert_eq!(report.participation_gaps, 2);
        assert!(report.has_warnings());
        assert!(report.anomalies.is_empty());
    }
}
