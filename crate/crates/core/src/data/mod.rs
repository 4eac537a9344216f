//! Session records, datasets and season schedules.
//!
//! A [`SessionRecord`] is one five-shot bout. A [`Dataset`] is an immutable,
//! validated collection of bouts with a dense athlete index (first-appearance
//! order, zero-based internally) and the race schedule implied by the rows.

mod csv;
mod report;
mod synth;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use self::csv::{parse_sessions, parse_sessions_with, write_sessions, ParseOptions, SESSIONS_HEADER};
pub use self::report::{validate, AthleteTotals, BoutAnomaly, Check, CheckStatus, ValidationReport};
pub use self::synth::{generate_synthetic, resimulate, SynthConfig};

/// Shots per bout.
pub const SHOTS_PER_BOUT: u32 = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RaceType {
    Individual,
    Sprint,
    Pursuit,
    MassStart,
}

impl RaceType {
    pub const ALL: [RaceType; 4] = [
        RaceType::Individual,
        RaceType::Sprint,
        RaceType::Pursuit,
        RaceType::MassStart,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RaceType::Individual => "individual",
            RaceType::Sprint => "sprint",
            RaceType::Pursuit => "pursuit",
            RaceType::MassStart => "mass_start",
        }
    }

    /// Shooting bouts an athlete completes in one race of this format.
    pub fn bouts_per_athlete(self) -> usize {
        self.bout_positions().len()
    }

    /// Bout positions in shooting order.
    pub fn bout_positions(self) -> &'static [Position] {
        use Position::*;
        match self {
            RaceType::Sprint => &[Prone, Standing],
            RaceType::Individual => &[Prone, Standing, Prone, Standing],
            RaceType::Pursuit | RaceType::MassStart => &[Prone, Prone, Standing, Standing],
        }
    }
}

impl fmt::Display for RaceType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RaceType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "individual" => Ok(RaceType::Individual),
            "sprint" => Ok(RaceType::Sprint),
            "pursuit" => Ok(RaceType::Pursuit),
            "mass_start" => Ok(RaceType::MassStart),
            other => Err(format!("unknown race_type {other:?}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Position {
    Prone,
    Standing,
}

impl Position {
    pub const ALL: [Position; 2] = [Position::Prone, Position::Standing];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Position::Prone => "prone",
            Position::Standing => "standing",
        }
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Position {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "prone" => Ok(Position::Prone),
            "standing" => Ok(Position::Standing),
            other => Err(format!("unknown position {other:?}")),
        }
    }
}

/// One five-shot bout.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub athlete_id: String,
    /// 1-based World Cup stage.
    pub stage: u32,
    pub race_type: RaceType,
    pub position: Position,
    /// Ordinal of the race within the stage (1-based).
    pub race_seq: u32,
    /// Ordinal of the bout within the race (1-based).
    pub bout_seq: u32,
    pub hits: u8,
}

impl SessionRecord {
    pub fn misses(&self) -> u8 {
        SHOTS_PER_BOUT as u8 - self.hits
    }
}

/// A race slot: its ordinal within a stage and its format.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RaceSlot {
    pub race_seq: u32,
    pub race_type: RaceType,
}

/// Races held at each stage, in race order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    stages: Vec<Vec<RaceSlot>>,
}

impl Schedule {
    /// Builds a schedule from per-stage race formats; race ordinals are
    /// assigned 1, 2, ... within each stage.
    pub fn from_formats(stages: Vec<Vec<RaceType>>) -> Self {
        let stages = stages
            .into_iter()
            .map(|races| {
                races
                    .into_iter()
                    .enumerate()
                    .map(|(i, race_type)| RaceSlot {
                        race_seq: i as u32 + 1,
                        race_type,
                    })
                    .collect()
            })
            .collect();
        Schedule { stages }
    }

    pub fn from_slots(stages: Vec<Vec<RaceSlot>>) -> Self {
        Schedule { stages }
    }

    /// The 2021/22 women's World Cup: 11 stages, 10 sprints, 3 individual
    /// races, 8 pursuits and 5 mass starts. Stage 8 is the Olympic Games.
    ///
    /// | stage | venue | races |
    /// |---|---|---|
    /// | 1 | Östersund I | individual, sprint |
    /// | 2 | Östersund II | sprint, pursuit |
    /// | 3 | Hochfilzen | sprint, pursuit |
    /// | 4 | Annecy-Le Grand Bornand | sprint, pursuit, mass start |
    /// | 5 | Oberhof | sprint, pursuit |
    /// | 6 | Ruhpolding | sprint, pursuit |
    /// | 7 | Antholz-Anterselva | individual, mass start |
    /// | 8 | Beijing (Olympics) | individual, sprint, pursuit, mass start |
    /// | 9 | Kontiolahti | sprint, pursuit |
    /// | 10 | Otepää | sprint, mass start |
    /// | 11 | Oslo-Holmenkollen | sprint, pursuit, mass start |
    pub fn paper_season() -> Self {
        use RaceType::*;
        Schedule::from_formats(vec![
            vec![Individual, Sprint],
            vec![Sprint, Pursuit],
            vec![Sprint, Pursuit],
            vec![Sprint, Pursuit, MassStart],
            vec![Sprint, Pursuit],
            vec![Sprint, Pursuit],
            vec![Individual, MassStart],
            vec![Individual, Sprint, Pursuit, MassStart],
            vec![Sprint, Pursuit],
            vec![Sprint, MassStart],
            vec![Sprint, Pursuit, MassStart],
        ])
    }

    /// The season schedule truncated or repeated to `n_stages` stages.
    pub fn paper_cycled(n_stages: usize) -> Self {
        let base = Self::paper_season();
        let stages = (0..n_stages)
            .map(|t| base.stages[t % base.stages.len()].clone())
            .collect();
        Schedule { stages }
    }

    pub fn n_stages(&self) -> usize {
        self.stages.len()
    }

    /// Races at a 1-based stage; empty for stages outside the schedule.
    pub fn races(&self, stage: u32) -> &[RaceSlot] {
        stage
            .checked_sub(1)
            .and_then(|t| self.stages.get(t as usize))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn count(&self, stage: u32, race_type: RaceType) -> usize {
        self.races(stage)
            .iter()
            .filter(|slot| slot.race_type == race_type)
            .count()
    }

    /// Number of races of each format over the whole season.
    pub fn totals(&self) -> [usize; 4] {
        let mut out = [0; 4];
        for slot in self.stages.iter().flatten() {
            out[slot.race_type.index()] += 1;
        }
        out
    }

    /// Bouts an athlete shoots when starting every race.
    pub fn bouts_per_full_participant(&self) -> usize {
        self.stages
            .iter()
            .flatten()
            .map(|slot| slot.race_type.bouts_per_athlete())
            .sum()
    }
}

/// Immutable validated collection of bouts.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    records: Vec<SessionRecord>,
    athletes: Vec<String>,
    athlete_of: Vec<usize>,
    n_stages: usize,
    schedule: Schedule,
    source_digest: String,
}

impl Dataset {
    /// Builds a dataset whose athlete list is the first-appearance order of
    /// `records`. `n_stages` defaults to the largest stage present.
    pub fn from_records(records: Vec<SessionRecord>, n_stages: Option<usize>) -> Result<Self> {
        let mut athletes = Vec::new();
        let mut seen = HashSet::new();
        for r in &records {
            if seen.insert(r.athlete_id.as_str()) {
                athletes.push(r.athlete_id.clone());
            }
        }
        Self::with_athletes(records, athletes, n_stages)
    }

    /// Builds a dataset with an explicit athlete list; athletes may have
    /// no records (absence is not an error).
    pub fn with_athletes(
        records: Vec<SessionRecord>,
        athletes: Vec<String>,
        n_stages: Option<usize>,
    ) -> Result<Self> {
        let mut d = Self::assemble(records, athletes, n_stages, |i| i + 1)?;
        d.source_digest = digest_hex(write_sessions_to_vec(&d).as_slice());
        Ok(d)
    }

    /// Core constructor; `line_of` maps a record index to the line number
    /// used in error messages.
    pub(crate) fn assemble(
        records: Vec<SessionRecord>,
        athletes: Vec<String>,
        n_stages: Option<usize>,
        line_of: impl Fn(usize) -> usize,
    ) -> Result<Self> {
        let index: HashMap<&str, usize> = athletes
            .iter()
            .enumerate()
            .map(|(i, a)| (a.as_str(), i))
            .collect();
        if index.len() != athletes.len() {
            return Err(Error::Config("duplicate athlete id in athlete list".into()));
        }
        let max_stage = records.iter().map(|r| r.stage as usize).max().unwrap_or(0);
        let n_stages = n_stages.unwrap_or(max_stage);

        let mut athlete_of = Vec::with_capacity(records.len());
        let mut keys = HashSet::new();
        let mut slots: BTreeMap<(u32, u32), RaceType> = BTreeMap::new();
        for (i, r) in records.iter().enumerate() {
            let line = line_of(i);
            if r.hits as u32 > SHOTS_PER_BOUT {
                return Err(Error::parse(line, format!("hits out of range: {}", r.hits)));
            }
            if r.stage == 0 || r.stage as usize > n_stages {
                return Err(Error::parse(
                    line,
                    format!("stage {} outside 1..={n_stages}", r.stage),
                ));
            }
            if r.race_seq == 0 || r.bout_seq == 0 {
                return Err(Error::parse(line, "race_seq and bout_seq must be >= 1"));
            }
            let Some(&s) = index.get(r.athlete_id.as_str()) else {
                return Err(Error::parse(line, format!("athlete {:?} not in athlete list", r.athlete_id)));
            };
            if !keys.insert((s, r.stage, r.race_seq, r.bout_seq)) {
                return Err(Error::parse(
                    line,
                    format!(
                        "duplicate bout (athlete {}, stage {}, race_seq {}, bout_seq {})",
                        r.athlete_id, r.stage, r.race_seq, r.bout_seq
                    ),
                ));
            }
            match slots.get(&(r.stage, r.race_seq)) {
                Some(&rt) if rt != r.race_type => {
                    return Err(Error::parse(
                        line,
                        format!(
                            "stage {} race {} is {} elsewhere, found {}",
                            r.stage, r.race_seq, rt, r.race_type
                        ),
                    ));
                }
                Some(_) => {}
                None => {
                    slots.insert((r.stage, r.race_seq), r.race_type);
                }
            }
            athlete_of.push(s);
        }

        let mut stages = vec![Vec::new(); n_stages];
        for ((stage, race_seq), race_type) in slots {
            stages[stage as usize - 1].push(RaceSlot { race_seq, race_type });
        }

        Ok(Dataset {
            records,
            athletes,
            athlete_of,
            n_stages,
            schedule: Schedule::from_slots(stages),
            source_digest: String::new(),
        })
    }

    pub fn records(&self) -> &[SessionRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn athletes(&self) -> &[String] {
        &self.athletes
    }

    pub fn n_athletes(&self) -> usize {
        self.athletes.len()
    }

    pub fn n_stages(&self) -> usize {
        self.n_stages
    }

    /// Races observed in the data, per stage.
    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    /// Zero-based dense athlete index of record `i`.
    pub fn athlete_index(&self, i: usize) -> usize {
        self.athlete_of[i]
    }

    pub fn athlete_indices(&self) -> &[usize] {
        &self.athlete_of
    }

    pub fn find_athlete(&self, id: &str) -> Option<usize> {
        self.athletes.iter().position(|a| a == id)
    }

    pub fn total_shots(&self) -> u64 {
        self.records.len() as u64 * SHOTS_PER_BOUT as u64
    }

    pub fn total_hits(&self) -> u64 {
        self.records.iter().map(|r| r.hits as u64).sum()
    }

    /// SHA-256 (hex) of the bytes the dataset was parsed from, or of its
    /// canonical serialization when built in memory.
    pub fn source_digest(&self) -> &str {
        &self.source_digest
    }

    pub(crate) fn set_digest(&mut self, digest: String) {
        self.source_digest = digest;
    }

    /// Same design with new hit counts (one per record).
    pub fn with_hits(&self, hits: &[u8]) -> Result<Self> {
        if hits.len() != self.records.len() {
            return Err(Error::Dimension(format!(
                "{} hit counts for {} records",
                hits.len(),
                self.records.len()
            )));
        }
        let records = self
            .records
            .iter()
            .zip(hits)
            .map(|(r, &h)| SessionRecord { hits: h, ..r.clone() })
            .collect();
        Self::with_athletes(records, self.athletes.clone(), Some(self.n_stages))
    }
}

pub(crate) fn digest_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn write_sessions_to_vec(d: &Dataset) -> Vec<u8> {
    let mut buf = Vec::new();
    write_sessions(d, &mut buf).expect("writing to a Vec cannot fail");
    buf
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(a: &str, stage: u32, rt: RaceType, pos: Position, race: u32, bout: u32, hits: u8) -> SessionRecord {
        SessionRecord {
            athlete_id: a.into(),
            stage,
            race_type: rt,
            position: pos,
            race_seq: race,
            bout_seq: bout,
            hits,
        }
    }

    #[test]
    fn paper_schedule_counts() {
        let s = Schedule::paper_season();
        assert_eq!(s.n_stages(), 11);
        // individual, sprint, pursuit, mass start
        assert_eq!(s.totals(), [3, 10, 8, 5]);
        assert_eq!(s.bouts_per_full_participant(), 10 * 2 + 8 * 4 + 3 * 4 + 5 * 4);
    }

    #[test]
    fn bout_counts_per_format() {
        assert_eq!(RaceType::Sprint.bouts_per_athlete(), 2);
        for rt in [RaceType::Individual, RaceType::Pursuit, RaceType::MassStart] {
            assert_eq!(rt.bouts_per_athlete(), 4);
            let prone = rt.bout_positions().iter().filter(|p| **p == Position::Prone).count();
            assert_eq!(prone, 2);
        }
    }

    #[test]
    fn dense_indices_follow_first_appearance() {
        let d = Dataset::from_records(
            vec![
                rec("zed", 1, RaceType::Sprint, Position::Prone, 1, 1, 4),
                rec("amy", 1, RaceType::Sprint, Position::Prone, 1, 1, 5),
                rec("zed", 1, RaceType::Sprint, Position::Standing, 1, 2, 3),
            ],
            None,
        )
        .unwrap();
        assert_eq!(d.athletes(), ["zed", "amy"]);
        assert_eq!(d.athlete_indices(), [0, 1, 0]);
        assert_eq!(d.total_shots(), 15);
        assert_eq!(d.total_hits(), 12);
        assert_eq!(d.n_stages(), 1);
    }

    #[test]
    fn conflicting_race_format_rejected() {
        let err = Dataset::from_records(
            vec![
                rec("a", 1, RaceType::Sprint, Position::Prone, 1, 1, 4),
                rec("b", 1, RaceType::Pursuit, Position::Prone, 1, 1, 5),
            ],
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn with_hits_keeps_design() {
        let d = Dataset::from_records(
            vec![
                rec("a", 1, RaceType::Sprint, Position::Prone, 1, 1, 4),
                rec("a", 1, RaceType::Sprint, Position::Standing, 1, 2, 5),
            ],
            Some(3),
        )
        .unwrap();
        let e = d.with_hits(&[0, 1]).unwrap();
        assert_eq!(e.total_hits(), 1);
        assert_eq!(e.n_stages(), 3);
        assert!(d.with_hits(&[1]).is_err());
    }
}
