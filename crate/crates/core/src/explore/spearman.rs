use serde::{Deserialize, Serialize};

use super::{Ratio, SummaryRow, SummaryTable};
use crate::data::{Position, RaceType};
use crate::error::{Error, Result};

/// 1-based ranks; tied values share the mean of their positions.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman's rho: Pearson correlation of average ranks.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!("spearman over {} and {} values", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::InsufficientDraws { needed: 2, got: a.len() });
    }
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::Undefined("spearman of a constant sequence".into()));
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Accuracy column correlated against final rank.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    Overall,
    Position(Position),
    Race(RaceType),
}

impl Feature {
    pub const ALL: [Feature; 7] = [
        Feature::Overall,
        Feature::Position(Position::Prone),
        Feature::Position(Position::Standing),
        Feature::Race(RaceType::Individual),
        Feature::Race(RaceType::Sprint),
        Feature::Race(RaceType::Pursuit),
        Feature::Race(RaceType::MassStart),
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Feature::Overall => "overall",
            Feature::Position(p) => p.as_str(),
            Feature::Race(r) => r.as_str(),
        }
    }

    fn cell(&self, row: &SummaryRow) -> Option<Ratio> {
        match self {
            Feature::Overall => row.overall,
            Feature::Position(p) => row.by_position(*p),
            Feature::Race(r) => row.by_race(*r),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub feature: Feature,
    pub rho: f64,
    /// Athletes with both a rank and a value for the feature.
    pub n: usize,
}

/// Spearman's rho between final rank and each accuracy column. Athletes
/// without a rank or without shots in a column are left out of that column.
pub fn rank_correlations(t: &SummaryTable, ranks: &[(String, f64)]) -> Result<Vec<Correlation>> {
    Feature::ALL
        .iter()
        .map(|f| {
            let (mut r, mut v) = (Vec::new(), Vec::new());
            for (athlete, rank) in ranks {
                if let Some(c) = t.row(athlete).and_then(|row| f.cell(row)) {
                    r.push(*rank);
                    v.push(c.value());
                }
            }
            Ok(Correlation {
                feature: *f,
                rho: spearman(&r, &v)?,
                n: r.len(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orderings() {
        let a = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(spearman(&a, &a).unwrap(), 1.0);
        assert_eq!(spearman(&a, &[4.0, 3.0, 2.0, 1.0]).unwrap(), -1.0);
    }

    #[test]
    fn ties_use_average_ranks() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 30.0]), vec![1.5, 3.0, 1.5, 4.0]);
        // hand computation: ranks (1.5, 1.5, 3) vs (1, 2, 3)
        let rho = spearman(&[1.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((rho - 0.75f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert!(matches!(spearman(&[1.0, 2.0], &[1.0]), Err(Error::Dimension(_))));
        assert!(matches!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(Error::Undefined(_))));
        assert!(spearman(&[1.0], &[1.0]).is_err());
    }
}
