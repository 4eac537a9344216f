//! CSV writers for the predict report.

use std::io::Write;

use super::{CellPercentage, CumulativePoint, OddsRatioSummary, PredictiveSummary, StageTotal};
use crate::error::Result;

const SUMMARY_COLUMNS: &str = "n_draws,mean,median,lower,upper";
const CHECK_COLUMNS: &str = "observed,tail_probability,covered";

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:?}")).unwrap_or_default()
}

fn cells(s: &PredictiveSummary) -> String {
    format!("{},{:?},{:?},{:?},{:?}", s.n_draws, s.mean, s.median, s.lower, s.upper)
}

fn check(s: &PredictiveSummary) -> String {
    let covered = s.covers_observed().map(|c| c.to_string()).unwrap_or_default();
    format!("{},{},{covered}", opt(s.observed), opt(s.tail_probability))
}

/// `stage,n_draws,mean,median,lower,upper,observed` on the probability scale.
pub fn write_mu_csv<W: Write>(rows: &[PredictiveSummary], mut w: W) -> Result<()> {
    writeln!(w, "stage,{SUMMARY_COLUMNS},observed")?;
    for (t, s) in rows.iter().enumerate() {
        writeln!(w, "{},{},{}", t + 1, cells(s), opt(s.observed))?;
    }
    Ok(())
}

/// One row per effect with both scales. `keys` holds the leading columns of
/// each row (for example athlete and stage) named by `key_header`.
pub fn write_odds_ratio_csv<W: Write>(
    key_header: &str,
    rows: &[(Vec<String>, &OddsRatioSummary)],
    mut w: W,
) -> Result<()> {
    writeln!(
        w,
        "{key_header},n_draws,or_mean,or_median,or_lower,or_upper,geometric_mean,log_mean,log_lower,log_upper"
    )?;
    for (keys, s) in rows {
        let o = &s.odds_ratio;
        writeln!(
            w,
            "{},{},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?}",
            keys.join(","),
            o.n_draws,
            o.mean,
            o.median,
            o.lower,
            o.upper,
            s.geometric_mean(),
            s.log.mean,
            s.log.lower,
            s.log.upper
        )?;
    }
    Ok(())
}

pub fn write_stage_totals_csv<W: Write>(rows: &[StageTotal], mut w: W) -> Result<()> {
    writeln!(w, "stage,sessions,{SUMMARY_COLUMNS},{CHECK_COLUMNS}")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.stage, r.sessions, cells(&r.summary), check(&r.summary))?;
    }
    Ok(())
}

pub fn write_race_position_csv<W: Write>(rows: &[CellPercentage], mut w: W) -> Result<()> {
    writeln!(w, "race_type,position,shots,{SUMMARY_COLUMNS},{CHECK_COLUMNS}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.race_type.as_str(),
            r.position.as_str(),
            r.shots,
            cells(&r.summary),
            check(&r.summary)
        )?;
    }
    Ok(())
}

pub fn write_cumulative_csv<W: Write>(rows: &[CumulativePoint], mut w: W) -> Result<()> {
    writeln!(w, "race,stage,race_seq,race_type,shots,{SUMMARY_COLUMNS},{CHECK_COLUMNS}")?;
    for (k, r) in rows.iter().enumerate() {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            k + 1,
            r.stage,
            r.race_seq,
            r.race_type.as_str(),
            r.shots,
            cells(&r.summary),
            check(&r.summary)
        )?;
    }
    Ok(())
}
