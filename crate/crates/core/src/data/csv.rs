use std::io::{Read, Write};

use super::{digest_hex, Dataset, SessionRecord};
use crate::error::{Error, Result};

pub const SESSIONS_HEADER: &str = "athlete,stage,race_type,position,race_seq,bout_seq,hits";

#[derive(Clone, Debug, Default)]
pub struct ParseOptions {
    /// Declared number of stages; rows outside `1..=n` are rejected.
    /// When `None` the largest stage present is used.
    pub n_stages: Option<usize>,
}

impl ParseOptions {
    pub fn stages(n: usize) -> Self {
        ParseOptions { n_stages: Some(n) }
    }
}

pub fn parse_sessions(input: impl Read) -> Result<Dataset> {
    parse_sessions_with(input, &ParseOptions::default())
}

/// Parses the sessions CSV format. Rows keep file order and athletes get
/// dense indices in order of first appearance.
pub fn parse_sessions_with(mut input: impl Read, opts: &ParseOptions) -> Result<Dataset> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let text = std::str::from_utf8(&bytes).map_err(|e| Error::parse(0, format!("input is not UTF-8: {e}")))?;

    let mut lines = text.split('\n').enumerate();
    match lines.next() {
        Some((_, header)) if header.trim_end_matches('\r') == SESSIONS_HEADER => {}
        Some((_, header)) => {
            return Err(Error::parse(1, format!("expected header {SESSIONS_HEADER:?}, found {header:?}")))
        }
        None => return Err(Error::parse(1, "missing header")),
    }

    let mut records = Vec::new();
    let mut line_numbers = Vec::new();
    for (i, raw) in lines {
        let line = raw.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let lineno = i + 1;
        records.push(parse_row(line, lineno)?);
        line_numbers.push(lineno);
    }

    let mut athletes = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for r in &records {
        if seen.insert(r.athlete_id.clone()) {
            athletes.push(r.athlete_id.clone());
        }
    }
    let mut d = Dataset::assemble(records, athletes, opts.n_stages, |i| line_numbers[i])?;
    d.set_digest(digest_hex(&bytes));
    Ok(d)
}

fn parse_row(line: &str, lineno: usize) -> Result<SessionRecord> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != 7 {
        return Err(Error::parse(lineno, format!("expected 7 fields, found {}", fields.len())));
    }
    let int = |idx: usize, name: &str| -> Result<u32> {
        fields[idx]
            .trim()
            .parse::<u32>()
            .map_err(|_| Error::parse(lineno, format!("{name} is not a non-negative integer: {:?}", fields[idx])))
    };
    let athlete_id = fields[0].trim();
    if athlete_id.is_empty() {
        return Err(Error::parse(lineno, "empty athlete id"));
    }
    let stage = int(1, "stage")?;
    let race_type = fields[2].trim().parse().map_err(|e: String| Error::parse(lineno, e))?;
    let position = fields[3].trim().parse().map_err(|e: String| Error::parse(lineno, e))?;
    let race_seq = int(4, "race_seq")?;
    let bout_seq = int(5, "bout_seq")?;
    let hits = int(6, "hits")?;
    if hits > 5 {
        return Err(Error::parse(lineno, format!("hits out of range: {hits}")));
    }
    Ok(SessionRecord {
        athlete_id: athlete_id.to_string(),
        stage,
        race_type,
        position,
        race_seq,
        bout_seq,
        hits: hits as u8,
    })
}

/// Writes the dataset in the sessions CSV format (LF line endings).
pub fn write_sessions(d: &Dataset, mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "{SESSIONS_HEADER}")?;
    for r in d.records() {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.athlete_id, r.stage, r.race_type, r.position, r.race_seq, r.bout_seq, r.hits
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<Dataset> {
        parse_sessions(s.as_bytes())
    }

    #[test]
    fn single_row() {
        let d = parse("athlete,stage,race_type,position,race_seq,bout_seq,hits\nA,1,sprint,prone,1,1,5\n").unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.n_athletes(), 1);
        assert_eq!(d.total_shots(), 5);
    }

    #[test]
    fn hits_out_of_range_reports_line() {
        let err = parse("athlete,stage,race_type,position,race_seq,bout_seq,hits\nA,1,sprint,prone,1,1,5\nA,1,sprint,standing,1,2,6\n")
            .unwrap_err();
        match err {
            Error::Parse { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("hits out of range"), "{message}");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn stage_outside_declared_range() {
        let input = "athlete,stage,race_type,position,race_seq,bout_seq,hits\nA,12,sprint,prone,1,1,5\n";
        let err = parse_sessions_with(input.as_bytes(), &ParseOptions::stages(11)).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse("athlete,stage,race_type,position,race_seq,bout_seq,hits\nA,0,sprint,prone,1,1,5\n").unwrap_err();
        assert!(err.to_string().contains("stage 0"), "{err}");
    }

    #[test]
    fn unknown_tokens() {
        let err = parse("athlete,stage,race_type,position,race_seq,bout_seq,hits\nA,1,relay,prone,1,1,5\n").unwrap_err();
        assert!(err.to_string().contains("unknown race_type"), "{err}");
        let err = parse("athlete,stage,race_type,position,race_seq,bout_seq,hits\nA,1,sprint,kneeling,1,1,5\n").unwrap_err();
        assert!(err.to_string().contains("unknown position"), "{err}");
    }

    #[test]
    fn duplicate_key() {
        let err = parse(
            "athlete,stage,race_type,position,race_seq,bout_seq,hits\nA,1,sprint,prone,1,1,5\nA,1,sprint,prone,1,1,4\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("duplicate bout"), "{err}");
        assert!(matches!(err, Error::Parse { line: 3, .. }));
    }

    #[test]
    fn malformed_rows() {
        assert!(matches!(
            parse("athlete,stage,race_type,position,race_seq,bout_seq,hits\nA,1,sprint,prone,1\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse("athlete,stage,race_type,position,race_seq,bout_seq,hits\nA,x,sprint,prone,1,1,5\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(parse("athlete,hits\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn digest_tracks_input_bytes() {
        let a = parse("athlete,stage,race_type,position,race_seq,bout_seq,hits\nA,1,sprint,prone,1,1,5\n").unwrap();
        let b = parse("athlete,stage,race_type,position,race_seq,bout_seq,hits\nA,1,sprint,prone,1,1,4\n").unwrap();
        assert_eq!(a.source_digest().len(), 64);
        assert_ne!(a.source_digest(), b.source_digest());
    }
}
