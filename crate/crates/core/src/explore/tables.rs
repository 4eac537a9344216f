//! CSV input and output for the exploratory tables.

use std::io::{BufRead, BufReader, Read, Write};

use super::{ClusterAssignment, Correlation, DeviationMatrix, FavoriteCounts, Ratio, SummaryRow, SummaryTable};
use crate::data::RaceType;
use crate::error::{Error, Result};

const SUMMARY_HEADER: &str = "athlete,prone,standing,individual,sprint,pursuit,mass_start,total_shots,total_hits,overall";
const RANKS_HEADER: &str = "athlete,final_rank";

fn lines<R: Read>(input: R) -> impl Iterator<Item = (usize, std::io::Result<String>)> {
    BufReader::new(input).lines().enumerate().map(|(i, l)| (i + 1, l))
}

/// `"86.5"` to 865 per mille.
fn parse_percent(s: &str, line: usize) -> Result<Option<Ratio>> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(None);
    }
    let bad = || Error::parse(line, format!("bad percentage {s:?}"));
    let (int, frac) = s.split_once('.').unwrap_or((s, "0"));
    if frac.len() != 1 {
        return Err(bad());
    }
    let tenths = int.parse::<u64>().map_err(|_| bad())? * 10 + frac.parse::<u64>().map_err(|_| bad())?;
    Ratio::new(tenths, 1000).map(Some).ok_or_else(bad)
}

/// Reads a published accuracy table (percentages to one decimal).
///
/// Each percentage becomes an exact ratio over a common per-mille
/// denominator, so equal printed values compare equal and cell "shot counts"
/// never break a tie. The overall column is checked against
/// `total_hits / total_shots`. A trailing `Overall` row is ignored; the
/// overall row is rebuilt from the totals.
pub fn load_published_table<R: Read>(input: R) -> Result<SummaryTable> {
    let mut rows = Vec::new();
    for (n, line) in lines(input) {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if n == 1 {
            if line != SUMMARY_HEADER {
                return Err(Error::parse(1, format!("expected header {SUMMARY_HEADER:?}")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 10 {
            return Err(Error::parse(n, format!("expected 10 fields, found {}", f.len())));
        }
        if f[0] == "Overall" {
            continue;
        }
        let count = |s: &str| s.trim().parse::<u64>().map_err(|_| Error::parse(n, format!("bad count {s:?}")));
        let (shots, hits) = (count(f[7])?, count(f[8])?);
        let overall = Ratio::new(hits, shots);
        if let (Some(o), Some(printed)) = (overall, parse_percent(f[9], n)?) {
            if o.tenths() != printed.hits {
                return Err(Error::parse(
                    n,
                    format!("overall {}% disagrees with {hits}/{shots}", printed.percent()),
                ));
            }
        }
        rows.push(SummaryRow {
            athlete: f[0].to_string(),
            position: [parse_percent(f[1], n)?, parse_percent(f[2], n)?],
            race: [
                parse_percent(f[3], n)?,
                parse_percent(f[4], n)?,
                parse_percent(f[5], n)?,
                parse_percent(f[6], n)?,
            ],
            total_shots: shots,
            total_hits: hits,
            overall,
        });
    }
    let (shots, hits) = rows.iter().fold((0, 0), |(s, h), r| (s + r.total_shots, h + r.total_hits));
    let overall = SummaryRow {
        athlete: "Overall".into(),
        position: [None, None],
        race: [None; 4],
        total_shots: shots,
        total_hits: hits,
        overall: Ratio::new(hits, shots),
    };
    Ok(SummaryTable { rows, overall })
}

/// Reads `athlete,final_rank`.
pub fn load_ranks<R: Read>(input: R) -> Result<Vec<(String, f64)>> {
    let mut out = Vec::new();
    for (n, line) in lines(input) {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if n == 1 {
            if line != RANKS_HEADER {
                return Err(Error::parse(1, format!("expected header {RANKS_HEADER:?}")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let (a, r) = line
            .rsplit_once(',')
            .ok_or_else(|| Error::parse(n, "expected athlete,final_rank"))?;
        let rank: f64 = r.trim().parse().map_err(|_| Error::parse(n, format!("bad rank {r:?}")))?;
        if !rank.is_finite() {
            return Err(Error::parse(n, "rank must be finite"));
        }
        if out.iter().any(|(b, _): &(String, f64)| b == a) {
            return Err(Error::parse(n, format!("duplicate athlete {a:?}")));
        }
        out.push((a.to_string(), rank));
    }
    Ok(out)
}

fn cell(c: Option<Ratio>) -> String {
    c.map(|r| r.percent()).unwrap_or_default()
}

fn summary_line(r: &SummaryRow) -> String {
    let cells: Vec<String> = r.position.iter().chain(&r.race).map(|&c| cell(c)).collect();
    format!(
        "{},{},{},{},{}\n",
        r.athlete,
        cells.join(","),
        r.total_shots,
        r.total_hits,
        cell(r.overall)
    )
}

/// Same layout as the published table, followed by the `Overall` row.
pub fn write_summary_csv<W: Write>(t: &SummaryTable, mut w: W) -> Result<()> {
    writeln!(w, "{SUMMARY_HEADER}")?;
    for r in &t.rows {
        w.write_all(summary_line(r).as_bytes())?;
    }
    w.write_all(summary_line(&t.overall).as_bytes())?;
    Ok(())
}

pub fn write_favorites_csv<W: Write>(c: &FavoriteCounts, mut w: W) -> Result<()> {
    writeln!(w, "race_type,favorite,least_favorite")?;
    for r in RaceType::ALL {
        writeln!(w, "{},{},{}", r.as_str(), c.favorite[r.index()], c.least[r.index()])?;
    }
    Ok(())
}

/// `athlete,stage_1..stage_T`, absent cells empty, then a `stage_mean` row.
pub fn write_deviation_csv<W: Write>(m: &DeviationMatrix, mut w: W) -> Result<()> {
    let header: Vec<String> = (1..=m.n_stages()).map(|t| format!("stage_{t}")).collect();
    writeln!(w, "athlete,{}", header.join(","))?;
    for (a, row) in m.athletes.iter().zip(&m.deviation) {
        let cells: Vec<String> = row.iter().map(|c| c.map(|v| format!("{v:?}")).unwrap_or_default()).collect();
        writeln!(w, "{a},{}", cells.join(","))?;
    }
    let means: Vec<String> = m
        .stage_mean
        .iter()
        .map(|c| c.map(|r| format!("{:?}", r.value())).unwrap_or_default())
        .collect();
    writeln!(w, "stage_mean,{}", means.join(","))?;
    Ok(())
}

/// Merge tree rows, then nothing else; labels go to [`write_labels_csv`].
pub fn write_merges_csv<W: Write>(a: &ClusterAssignment, mut w: W) -> Result<()> {
    writeln!(w, "step,left,right,height,size")?;
    for (i, m) in a.merges.iter().enumerate() {
        writeln!(w, "{},{},{},{:?},{}", i + 1, m.left, m.right, m.height, m.size)?;
    }
    Ok(())
}

pub fn write_labels_csv<W: Write>(a: &ClusterAssignment, mut w: W) -> Result<()> {
    writeln!(w, "leaf,athlete,cluster")?;
    for (i, (name, l)) in a.athletes.iter().zip(&a.labels).enumerate() {
        writeln!(w, "{i},{name},{l}")?;
    }
    Ok(())
}

pub fn write_correlations_csv<W: Write>(c: &[Correlation], mut w: W) -> Result<()> {
    writeln!(w, "feature,rho,n")?;
    for x in c {
        writeln!(w, "{},{:?},{}", x.feature.name(), x.rho, x.n)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percent_parsing() {
        assert_eq!(parse_percent("86.5", 1).unwrap(), Ratio::new(865, 1000));
        assert_eq!(parse_percent("100", 1).unwrap(), Ratio::new(1000, 1000));
        assert_eq!(parse_percent("", 1).unwrap(), None);
        assert!(parse_percent("86.55", 1).is_err());
        assert!(parse_percent("101.0", 1).is_err());
        assert!(parse_percent("x", 1).is_err());
    }

    #[test]
    fn published_row_round_trips() {
        let text = format!("{SUMMARY_HEADER}\nV. Voigt,91.0,92.0,95.0,95.0,88.8,91.0,400,366,91.5\n");
        let t = load_published_table(text.as_bytes()).unwrap();
        let mut out = Vec::new();
        write_summary_csv(&t, &mut out).unwrap();
        let out = String::from_utf8(out).unwrap();
        assert!(out.starts_with(&text));
        assert!(out.ends_with("Overall,,,,,,,400,366,91.5\n"));
    }

    #[test]
    fn inconsistent_overall_is_rejected() {
        let text = format!("{SUMMARY_HEADER}\nx,1.0,1.0,1.0,1.0,1.0,1.0,400,366,90.0\n");
        assert!(load_published_table(text.as_bytes()).is_err());
    }

    #[test]
    fn ranks() {
        let r = load_ranks("athlete,final_rank\na,1\nb,2.5\n".as_bytes()).unwrap();
        assert_eq!(r, vec![("a".into(), 1.0), ("b".into(), 2.5)]);
        assert!(load_ranks("athlete,final_rank\na,1\na,2\n".as_bytes()).is_err());
        assert!(load_ranks("name,rank\n".as_bytes()).is_err());
    }
}
