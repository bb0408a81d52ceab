//! Group means, relative perceptual gaps between groups, gap rankings and
//! least-squares trend lines.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GapError {
    #[error("group {0:?} has no scored frames")]
    EmptyGroup(String),
    #[error("score {value} for {id:?} is outside [0, 1]")]
    OutOfRangeScore { id: String, value: f64 },
    #[error("mean {0} is outside [0, 1]")]
    OutOfRangeMean(f64),
    #[error("trend fit needs at least two points, got {0}")]
    TooFewPoints(usize),
    #[error("all x values are equal; slope is undefined")]
    DegenerateX,
    #[error("non-finite coordinate in trend input")]
    NonFinitePoint,
}

/// Per-frame scores of one scene or dataset and their arithmetic mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSet {
    pub group_id: String,
    pub frame_scores: Vec<(String, f64)>,
    pub mean_mmcm: f64,
}

pub fn group_mean(
    group_id: impl Into<String>,
    scores: Vec<(String, f64)>,
) -> Result<ScoreSet, GapError> {
    let group_id = group_id.into();
    if scores.is_empty() {
        return Err(GapError::EmptyGroup(group_id));
    }
    if let Some((id, value)) = scores.iter().find(|(_, s)| !(0.0..=1.0).contains(s)) {
        return Err(GapError::OutOfRangeScore {
            id: id.clone(),
            value: *value,
        });
    }
    let sum = scores.iter().fold(0.0f64, |acc, (_, s)| acc + s);
    // The mean of values in [0, 1] can round a hair past an endpoint.
    let mean = (sum / scores.len() as f64).clamp(0.0, 1.0);
    Ok(ScoreSet {
        group_id,
        frame_scores: scores,
        mean_mmcm: mean,
    })
}

/// `|a - b| / max(a, b)`, with `(0, 0)` mapped to 0.
pub fn perceptual_gap(mu_a: f64, mu_b: f64) -> Result<f64, GapError> {
    for mu in [mu_a, mu_b] {
        if !(0.0..=1.0).contains(&mu) {
            return Err(GapError::OutOfRangeMean(mu));
        }
    }
    let hi = mu_a.max(mu_b);
    if hi == 0.0 {
        return Ok(0.0);
    }
    Ok((mu_a - mu_b).abs() / hi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapMatrix {
    pub row_ids: Vec<String>,
    pub col_ids: Vec<String>,
    /// Row-major, `row_ids.len()` rows of `col_ids.len()` entries.
    pub values: Vec<Vec<f64>>,
}

impl GapMatrix {
    /// Same groups on both axes (an intra-domain comparison).
    pub fn is_intra(&self) -> bool {
        self.row_ids == self.col_ids
    }

    pub fn max_value(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .fold(0.0f64, |acc, &v| acc.max(v))
    }
}

pub fn gap_matrix(rows: &[ScoreSet], cols: &[ScoreSet]) -> Result<GapMatrix, GapError> {
    if rows.is_empty() {
        return Err(GapError::EmptyGroup("<rows>".into()));
    }
    if cols.is_empty() {
        return Err(GapError::EmptyGroup("<cols>".into()));
    }
    let values = rows
        .iter()
        .map(|r| {
            cols.iter()
                .map(|c| perceptual_gap(r.mean_mmcm, c.mean_mmcm))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(GapMatrix {
        row_ids: rows.iter().map(|r| r.group_id.clone()).collect(),
        col_ids: cols.iter().map(|c| c.group_id.clone()).collect(),
        values,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedGap {
    pub group_id: String,
    pub mean_gap: f64,
}

/// Row means of a gap matrix, largest first, ties by id.
///
/// For an intra matrix the zero self-pair is left out of each row mean; a
/// 1x1 intra matrix therefore has no entries and ranks its group at 0.
pub fn aggregate_gaps(matrix: &GapMatrix) -> Vec<RankedGap> {
    let intra = matrix.is_intra();
    let mut out: Vec<RankedGap> = matrix
        .row_ids
        .iter()
        .zip(&matrix.values)
        .enumerate()
        .map(|(r, (id, row))| {
            let (sum, n) = row
                .iter()
                .enumerate()
                .filter(|&(c, _)| !(intra && c == r))
                .fold((0.0f64, 0usize), |(s, n), (_, v)| (s + v, n + 1));
            RankedGap {
                group_id: id.clone(),
                mean_gap: if n == 0 { 0.0 } else { sum / n as f64 },
            }
        })
        .collect();
    out.sort_by(|a, b| {
        b.mean_gap
            .partial_cmp(&a.mean_gap)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.group_id.cmp(&b.group_id))
    });
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendFit {
    pub slope: f64,
    pub intercept: f64,
    /// Pearson correlation; 0 when every y is equal.
    pub pearson_r: f64,
    pub n: usize,
}

impl TrendFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// Ordinary least squares `y = intercept + slope * x`.
///
/// Points are sorted by `(x, y)` before any summation so the result does not
/// depend on input order.
pub fn trend_fit(points: &[(f64, f64)]) -> Result<TrendFit, GapError> {
    if points.len() < 2 {
        return Err(GapError::TooFewPoints(points.len()));
    }
    if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(GapError::NonFinitePoint);
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    if pts.first().unwrap().0 == pts.last().unwrap().0 {
        return Err(GapError::DegenerateX);
    }

    let n = pts.len() as f64;
    let mean_x = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0f64, 0.0f64, 0.0f64);
    for &(x, y) in &pts {
        let (dx, dy) = (x - mean_x, y - mean_y);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(GapError::DegenerateX);
    }
    let slope = sxy / sxx;
    let pearson_r = if syy == 0.0 {
        0.0
    } else {
        (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
    };
    Ok(TrendFit {
        slope,
        intercept: mean_y - slope * mean_x,
        pearson_r,
        n: pts.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(id: &str, mean: f64) -> ScoreSet {
        group_mean(id, vec![(format!("{id}-f"), mean)]).unwrap()
    }

    #[test]
    fn group_means() {
        assert_eq!(group_mean("a", vec![("x".into(), 0.5)]).unwrap().mean_mmcm, 0.5);
        let s = group_mean("a", vec![("x".into(), 0.0), ("y".into(), 1.0)]).unwrap();
        assert_eq!(s.mean_mmcm, 0.5);
        assert_eq!(group_mean("a", vec![]), Err(GapError::EmptyGroup("a".into())));
        assert!(matches!(
            group_mean("a", vec![("x".into(), 1.5)]),
            Err(GapError::OutOfRangeScore { .. })
        ));
    }

    #[test]
    fn table_two_dataset_gap() {
        let g = perceptual_gap(0.6926, 0.5693).unwrap();
        assert!((g - 0.178025).abs() < 1e-6, "{g}");
        assert_eq!(g, perceptual_gap(0.5693, 0.6926).unwrap());
    }

    #[test]
    fn gap_edge_cases() {
        assert_eq!(perceptual_gap(0.3, 0.3).unwrap(), 0.0);
        assert_eq!(perceptual_gap(0.0, 0.0).unwrap(), 0.0);
        assert_eq!(perceptual_gap(0.0, 0.7).unwrap(), 1.0);
        assert_eq!(perceptual_gap(1.2, 0.5), Err(GapError::OutOfRangeMean(1.2)));
        assert!(perceptual_gap(f64::NAN, 0.5).is_err());
    }

    #[test]
    fn matrices() {
        let m = gap_matrix(&[set("a", 0.5), set("b", 0.5)], &[set("a", 0.5), set("b", 0.5)]).unwrap();
        assert_eq!(m.values, vec![vec![0.0, 0.0], vec![0.0, 0.0]]);
        assert!(m.is_intra());

        let m = gap_matrix(&[set("r", 0.8)], &[set("c", 0.4)]).unwrap();
        assert_eq!(m.values, vec![vec![0.5]]);
        assert!(!m.is_intra());

        assert!(gap_matrix(&[], &[set("c", 0.4)]).is_err());
        assert!(gap_matrix(&[set("c", 0.4)], &[]).is_err());
    }

    #[test]
    fn intra_matrix_is_symmetric_with_zero_diagonal() {
        let sets: Vec<_> = [0.1, 0.9, 0.45, 0.6].iter().enumerate().map(|(i, &m)| set(&format!("s{i}"), m)).collect();
        let m = gap_matrix(&sets, &sets).unwrap();
        for i in 0..4 {
            assert_eq!(m.values[i][i], 0.0);
            for j in 0..4 {
                assert_eq!(m.values[i][j], m.values[j][i]);
            }
        }
    }

    #[test]
    fn aggregate_cross_single() {
        let m = GapMatrix {
            row_ids: vec!["row".into()],
            col_ids: vec!["col".into()],
            values: vec![vec![0.5]],
        };
        assert_eq!(
            aggregate_gaps(&m),
            vec![RankedGap { group_id: "row".into(), mean_gap: 0.5 }]
        );
    }

    #[test]
    fn aggregate_intra_tie_break() {
        let ids: Vec<String> = ["A", "B", "C"].iter().map(|s| s.to_string()).collect();
        let m = GapMatrix {
            row_ids: ids.clone(),
            col_ids: ids,
            values: vec![
                vec![0.0, 0.2, 0.4],
                vec![0.2, 0.0, 0.2],
                vec![0.4, 0.2, 0.0],
            ],
        };
        let r = aggregate_gaps(&m);
        let order: Vec<_> = r.iter().map(|g| g.group_id.as_str()).collect();
        assert_eq!(order, ["A", "C", "B"]);
        assert!((r[0].mean_gap - 0.3).abs() < 1e-15);
        assert!((r[1].mean_gap - 0.3).abs() < 1e-15);
        assert!((r[2].mean_gap - 0.2).abs() < 1e-15);
    }

    #[test]
    fn aggregate_all_equal_is_lexicographic() {
        let sets = vec![set("z", 0.4), set("a", 0.4), set("m", 0.4)];
        let r = aggregate_gaps(&gap_matrix(&sets, &sets).unwrap());
        let order: Vec<_> = r.iter().map(|g| (g.group_id.as_str(), g.mean_gap)).collect();
        assert_eq!(order, [("a", 0.0), ("m", 0.0), ("z", 0.0)]);
        let one = vec![set("solo", 0.4)];
        assert_eq!(aggregate_gaps(&gap_matrix(&one, &one).unwrap())[0].mean_gap, 0.0);
    }

    #[test]
    fn exact_lines() {
        let f = trend_fit(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)]).unwrap();
        assert_eq!((f.slope, f.intercept, f.pearson_r, f.n), (1.0, 0.0, 1.0, 3));
        let f = trend_fit(&[(0.0, 1.0), (1.0, 0.0)]).unwrap();
        assert_eq!((f.slope, f.intercept, f.pearson_r), (-1.0, 1.0, -1.0));
        let f = trend_fit(&[(0.0, 2.0), (1.0, 2.0), (5.0, 2.0)]).unwrap();
        assert_eq!((f.slope, f.intercept, f.pearson_r), (0.0, 2.0, 0.0));
    }

    #[test]
    fn trend_errors() {
        assert_eq!(trend_fit(&[(1.0, 1.0)]), Err(GapError::TooFewPoints(1)));
        assert_eq!(trend_fit(&[(1.0, 1.0), (1.0, 2.0)]), Err(GapError::DegenerateX));
        assert_eq!(trend_fit(&[(1.0, f64::NAN), (2.0, 2.0)]), Err(GapError::NonFinitePoint));
    }
}
