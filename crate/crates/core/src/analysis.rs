//! Turns corpus scores into the grouped comparisons a report needs: score
//! sets at a chosen aggregation level, gap sections and per-domain trends.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusScores, FrameScores};
use crate::gap::{aggregate_gaps, gap_matrix, group_mean, trend_fit, GapError, GapMatrix, RankedGap, ScoreSet, TrendFit};

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("unknown dataset {0:?}")]
    UnknownDataset(String),
    #[error("no dataset selected")]
    NothingSelected,
    #[error(transparent)]
    Gap(#[from] GapError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Frame,
    Scene,
    Dataset,
}

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::Frame => "frame",
            Level::Scene => "scene",
            Level::Dataset => "dataset",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "frame" => Ok(Level::Frame),
            "scene" => Ok(Level::Scene),
            "dataset" => Ok(Level::Dataset),
            other => Err(format!("unknown level {other:?} (frame, scene, dataset)")),
        }
    }
}

/// Score sets for the given datasets at `level`, in manifest order.
///
/// Group ids are prefixed with the dataset id only when more than one
/// dataset is selected. Groups whose frames all failed are skipped.
pub fn score_sets(
    scores: &CorpusScores,
    datasets: &[String],
    level: Level,
) -> Result<Vec<ScoreSet>, AnalysisError> {
    named_sets(scores, datasets, level, datasets.len() > 1)
}

fn named_sets(
    scores: &CorpusScores,
    datasets: &[String],
    level: Level,
    prefix: bool,
) -> Result<Vec<ScoreSet>, AnalysisError> {
    if datasets.is_empty() {
        return Err(AnalysisError::NothingSelected);
    }
    for d in datasets {
        if !scores.records.iter().any(|r| &r.dataset_id == d) {
            return Err(AnalysisError::UnknownDataset(d.clone()));
        }
    }
    let name = |dataset: &str, rest: &str| {
        if prefix {
            format!("{dataset}/{rest}")
        } else {
            rest.to_string()
        }
    };
    let mut out = Vec::new();
    for d in datasets {
        match level {
            Level::Dataset => out.push(scores.dataset_set(d)?),
            Level::Scene => {
                let mut seen: Vec<&str> = Vec::new();
                for r in scores.records.iter().filter(|r| &r.dataset_id == d) {
                    if seen.contains(&r.scene_id.as_str()) {
                        continue;
                    }
                    seen.push(&r.scene_id);
                    if let Ok(mut set) = scores.scene_set(d, &r.scene_id) {
                        set.group_id = name(d, &r.scene_id);
                        out.push(set);
                    }
                }
            }
            Level::Frame => {
                for (r, s) in scores.scored().filter(|(r, _)| &r.dataset_id == d) {
                    let id = name(d, &format!("{}/{}", r.scene_id, s.frame_id));
                    out.push(group_mean(id.clone(), vec![(id, s.consensus.mmcm)])?);
                }
            }
        }
    }
    if out.is_empty() {
        return Err(GapError::EmptyGroup(datasets.join(",")).into());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapSection {
    pub name: String,
    pub level: Level,
    pub matrix: GapMatrix,
    pub ranking: Vec<RankedGap>,
}

pub fn gap_section(
    scores: &CorpusScores,
    rows: &[String],
    cols: &[String],
    level: Level,
) -> Result<GapSection, AnalysisError> {
    // Ids stay bare only for a single dataset against itself; otherwise
    // scene ids shared across datasets would collide.
    let prefix = rows.len() > 1 || rows != cols;
    let row_sets = named_sets(scores, rows, level, prefix)?;
    let col_sets = named_sets(scores, cols, level, prefix)?;
    let matrix = gap_matrix(&row_sets, &col_sets)?;
    let ranking = aggregate_gaps(&matrix);
    Ok(GapSection {
        name: format!("{}_vs_{}_{}", rows.join("+"), cols.join("+"), level),
        level,
        matrix,
        ranking,
    })
}

/// Structural quantity plotted against MMCM.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrendMetric {
    DepthEntropy,
    DepthMean,
    DiscontinuityRatio,
}

impl TrendMetric {
    pub const ALL: [TrendMetric; 3] = [
        TrendMetric::DepthEntropy,
        TrendMetric::DepthMean,
        TrendMetric::DiscontinuityRatio,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TrendMetric::DepthEntropy => "depth_entropy",
            TrendMetric::DepthMean => "depth_mean",
            TrendMetric::DiscontinuityRatio => "discontinuity_ratio",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            TrendMetric::DepthEntropy => "Depth entropy (nats)",
            TrendMetric::DepthMean => "Depth mean",
            TrendMetric::DiscontinuityRatio => "Discontinuity ratio",
        }
    }

    pub fn value(self, s: &FrameScores) -> Option<f64> {
        let st = s.structural.as_ref()?;
        Some(match self {
            TrendMetric::DepthEntropy => st.depth_entropy,
            TrendMetric::DepthMean => st.depth_mean,
            TrendMetric::DiscontinuityRatio => st.discontinuity_ratio,
        })
    }
}

impl fmt::Display for TrendMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TrendMetric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TrendMetric::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown metric {s:?} (depth_entropy, depth_mean, discontinuity_ratio)"))
    }
}

/// Fit of MMCM against one structural metric for the frames of one domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendSection {
    pub metric: TrendMetric,
    pub domain_tag: String,
    /// `(metric value, mmcm)` for every scored frame with depth.
    pub points: Vec<(f64, f64)>,
    /// Scored frames left out because they have no depth.
    pub excluded: usize,
    pub fit: Option<TrendFit>,
    /// Why `fit` is absent.
    pub error: Option<String>,
}

/// One section per domain tag, tags in order of first appearance.
pub fn trend_sections(scores: &CorpusScores, metric: TrendMetric) -> Vec<TrendSection> {
    let mut tags: Vec<&str> = Vec::new();
    for r in &scores.records {
        if !tags.contains(&r.domain_tag.as_str()) {
            tags.push(&r.domain_tag);
        }
    }
    tags.into_iter()
        .map(|tag| {
            let mut points = Vec::new();
            let mut excluded = 0;
            for (_, s) in scores.scored().filter(|(r, _)| r.domain_tag == tag) {
                match metric.value(s) {
                    Some(x) => points.push((x, s.consensus.mmcm)),
                    None => excluded += 1,
                }
            }
            let (fit, error) = match trend_fit(&points) {
                Ok(f) => (Some(f), None),
                Err(e) => (None, Some(e.to_string())),
            };
            TrendSection {
                metric,
                domain_tag: tag.to_string(),
                points,
                excluded,
                fit,
                error,
            }
        })
        .collect()
}

/// Gap sections computed automatically for a scoring run: every dataset
/// against every other at dataset level, plus the scene-level intra matrix
/// of each dataset with more than one scored scene.
pub fn default_gap_sections(scores: &CorpusScores) -> Vec<GapSection> {
    let mut ids: Vec<String> = Vec::new();
    for r in &scores.records {
        if !ids.contains(&r.dataset_id) {
            ids.push(r.dataset_id.clone());
        }
    }
    let mut out = Vec::new();
    let scored: Vec<String> = ids
        .iter()
        .filter(|d| scores.dataset_set(d).is_ok())
        .cloned()
        .collect();
    if scored.len() > 1 {
        let sets: Vec<ScoreSet> = scored.iter().filter_map(|d| scores.dataset_set(d).ok()).collect();
        if let Ok(matrix) = gap_matrix(&sets, &sets) {
            out.push(GapSection {
                name: "datasets".into(),
                level: Level::Dataset,
                ranking: aggregate_gaps(&matrix),
                matrix,
            });
        }
    }
    for d in &scored {
        let d = std::slice::from_ref(d);
        if let Ok(sets) = score_sets(scores, d, Level::Scene) {
            if sets.len() > 1 {
                if let Ok(s) = gap_section(scores, d, d, Level::Scene) {
                    out.push(s);
                }
            }
        }
    }
    out
}
