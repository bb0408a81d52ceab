//! CSV and JSON serialization of a scoring run.
//!
//! CSV files are RFC 4180, UTF-8, LF-terminated. Real-valued cells carry six
//! significant digits; counts are plain integers; absent values are empty
//! cells. Column order is fixed and new metrics are only ever appended.
//!
//! | file                    | columns |
//! |-------------------------|---------|
//! | `frame_scores.csv`      | dataset_id, scene_id, frame_id, mmcm, mean_agreement, mean_confidence, depth_entropy, depth_mean, discontinuity_ratio |
//! | `scene_means.csv`       | dataset_id, scene_id, domain_tag, frames_scored, frames_failed, mean_mmcm |
//! | `dataset_means.csv`     | dataset_id, domain_tag, frames_scored, frames_failed, mean_mmcm |
//! | `gap_matrix_<name>.csv` | group, then one column per column group |
//! | `rankings_<name>.csv`   | rank, group_id, mean_gap |
//! | `trend_<metric>.csv`    | domain_tag, n, excluded, slope, intercept, pearson_r, status |
//!
//! The JSON document holds the same content at full precision with object
//! keys in alphabetical order.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analysis::{GapSection, TrendMetric, TrendSection};
use crate::corpus::{CorpusScores, FrameFailure, GroupSummary};
use crate::structural::StructuralParams;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("io failure on {path}: {source}")]
    IoFailure {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::IoFailure {
        path: path.display().to_string(),
        source,
    }
}

/// Formats `x` with six significant digits, `%g`-style: positional notation
/// for decimal exponents in `[-5, 6)`, scientific otherwise. Trailing zeros
/// are kept so every cell shows the same precision.
pub fn fmt_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0.00000".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.5e}");
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    if (-5..6).contains(&exp) {
        format!("{:.*}", (5 - exp) as usize, x)
    } else {
        sci
    }
}

fn opt6(x: Option<f64>) -> String {
    x.map(fmt_sig6).unwrap_or_default()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Replaces anything outside `[A-Za-z0-9._-]` so ids are safe in file names.
pub fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub tool_version: String,
    pub bins: usize,
    pub tau: f64,
    pub timestamp: String,
    pub manifest_sha256: String,
    pub models: Vec<String>,
    pub frames_scored: usize,
    pub frames_failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRow {
    pub dataset_id: String,
    pub scene_id: String,
    pub frame_id: String,
    pub domain_tag: String,
    pub mmcm: f64,
    pub mean_agreement: f64,
    pub mean_confidence: f64,
    pub per_model_mean_confidence: Vec<f64>,
    pub pairwise_agreement: Vec<Vec<Option<f64>>>,
    pub depth_entropy: Option<f64>,
    pub depth_mean: Option<f64>,
    pub depth_min: Option<f64>,
    pub depth_max: Option<f64>,
    pub discontinuity_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub meta: RunMeta,
    pub frame_scores: Vec<FrameRow>,
    pub scene_means: Vec<GroupSummary>,
    pub dataset_means: Vec<GroupSummary>,
    pub gaps: Vec<GapSection>,
    pub trends: BTreeMap<String, Vec<TrendSection>>,
    pub failures: Vec<FrameFailure>,
}

impl ReportBundle {
    /// Assembles a bundle; failed frames appear only under `failures`.
    pub fn new(
        scores: &CorpusScores,
        models: Vec<String>,
        params: &StructuralParams,
        manifest_sha256: String,
        timestamp: String,
        gaps: Vec<GapSection>,
        trends: Vec<TrendSection>,
    ) -> Self {
        let frame_scores = scores
            .scored()
            .map(|(r, s)| {
                let st = s.structural.as_ref();
                FrameRow {
                    dataset_id: r.dataset_id.clone(),
                    scene_id: r.scene_id.clone(),
                    frame_id: s.frame_id.clone(),
                    domain_tag: r.domain_tag.clone(),
                    mmcm: s.consensus.mmcm,
                    mean_agreement: s.consensus.mean_agreement,
                    mean_confidence: s.consensus.mean_confidence,
                    per_model_mean_confidence: s.consensus.per_model_mean_confidence.clone(),
                    pairwise_agreement: s.consensus.pairwise_agreement.clone(),
                    depth_entropy: st.map(|x| x.depth_entropy),
                    depth_mean: st.map(|x| x.depth_mean),
                    depth_min: st.map(|x| x.depth_min),
                    depth_max: st.map(|x| x.depth_max),
                    discontinuity_ratio: st.map(|x| x.discontinuity_ratio),
                }
            })
            .collect();
        let mut trend_map: BTreeMap<String, Vec<TrendSection>> = BTreeMap::new();
        for t in trends {
            trend_map.entry(t.metric.as_str().to_string()).or_default().push(t);
        }
        ReportBundle {
            meta: RunMeta {
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                bins: params.bins,
                tau: params.tau,
                timestamp,
                manifest_sha256,
                models,
                frames_scored: scores.frames_scored(),
                frames_failed: scores.frames_failed(),
            },
            frame_scores,
            scene_means: scores.scene_summaries(),
            dataset_means: scores.dataset_summaries(),
            gaps,
            trends: trend_map,
            failures: scores.failures().into_iter().cloned().collect(),
        }
    }
}

pub fn now_timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, ReportError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file))
}

fn finish(mut w: csv::Writer<fs::File>, path: &Path) -> Result<PathBuf, ReportError> {
    w.flush().map_err(io_err(path))?;
    Ok(path.to_path_buf())
}

pub const FRAME_SCORE_COLUMNS: [&str; 9] = [
    "dataset_id",
    "scene_id",
    "frame_id",
    "mmcm",
    "mean_agreement",
    "mean_confidence",
    "depth_entropy",
    "depth_mean",
    "discontinuity_ratio",
];

pub fn write_frame_scores(rows: &[FrameRow], path: &Path) -> Result<PathBuf, ReportError> {
    let mut w = csv_writer(path)?;
    w.write_record(FRAME_SCORE_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.dataset_id.clone(),
            r.scene_id.clone(),
            r.frame_id.clone(),
            fmt_sig6(r.mmcm),
            fmt_sig6(r.mean_agreement),
            fmt_sig6(r.mean_confidence),
            opt6(r.depth_entropy),
            opt6(r.depth_mean),
            opt6(r.discontinuity_ratio),
        ])?;
    }
    finish(w, path)
}

pub fn write_scene_means(rows: &[GroupSummary], path: &Path) -> Result<PathBuf, ReportError> {
    let mut w = csv_writer(path)?;
    w.write_record(["dataset_id", "scene_id", "domain_tag", "frames_scored", "frames_failed", "mean_mmcm"])?;
    for r in rows {
        w.write_record([
            r.dataset_id.clone(),
            r.scene_id.clone().unwrap_or_default(),
            r.domain_tag.clone(),
            r.frames_scored.to_string(),
            r.frames_failed.to_string(),
            opt6(r.mean_mmcm),
        ])?;
    }
    finish(w, path)
}

pub fn write_dataset_means(rows: &[GroupSummary], path: &Path) -> Result<PathBuf, ReportError> {
    let mut w = csv_writer(path)?;
    w.write_record(["dataset_id", "domain_tag", "frames_scored", "frames_failed", "mean_mmcm"])?;
    for r in rows {
        w.write_record([
            r.dataset_id.clone(),
            r.domain_tag.clone(),
            r.frames_scored.to_string(),
            r.frames_failed.to_string(),
            opt6(r.mean_mmcm),
        ])?;
    }
    finish(w, path)
}

pub fn write_gap_matrix(section: &GapSection, path: &Path) -> Result<PathBuf, ReportError> {
    let m = &section.matrix;
    let mut w = csv_writer(path)?;
    let mut header = vec!["group".to_string()];
    header.extend(m.col_ids.iter().cloned());
    w.write_record(&header)?;
    for (id, row) in m.row_ids.iter().zip(&m.values) {
        let mut rec = vec![id.clone()];
        rec.extend(row.iter().map(|&v| fmt_sig6(v)));
        w.write_record(&rec)?;
    }
    finish(w, path)
}

pub fn write_ranking(section: &GapSection, path: &Path) -> Result<PathBuf, ReportError> {
    let mut w = csv_writer(path)?;
    w.write_record(["rank", "group_id", "mean_gap"])?;
    for (i, g) in section.ranking.iter().enumerate() {
        w.write_record([(i + 1).to_string(), g.group_id.clone(), fmt_sig6(g.mean_gap)])?;
    }
    finish(w, path)
}

pub fn write_trend(sections: &[TrendSection], path: &Path) -> Result<PathBuf, ReportError> {
    let mut w = csv_writer(path)?;
    w.write_record(["domain_tag", "n", "excluded", "slope", "intercept", "pearson_r", "status"])?;
    for t in sections {
        let f = t.fit.as_ref();
        w.write_record([
            t.domain_tag.clone(),
            t.points.len().to_string(),
            t.excluded.to_string(),
            opt6(f.map(|f| f.slope)),
            opt6(f.map(|f| f.intercept)),
            opt6(f.map(|f| f.pearson_r)),
            t.error.clone().unwrap_or_else(|| "ok".into()),
        ])?;
    }
    finish(w, path)
}

pub fn gap_file_names(section: &GapSection) -> (String, String) {
    let stem = file_stem(&section.name);
    (format!("gap_matrix_{stem}.csv"), format!("rankings_{stem}.csv"))
}

pub fn trend_file_name(metric: TrendMetric) -> String {
    format!("trend_{}.csv", metric.as_str())
}

/// Writes every CSV table present in the bundle. Returns the paths written.
pub fn emit_csv(bundle: &ReportBundle, out_dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut written = vec![
        write_frame_scores(&bundle.frame_scores, &out_dir.join("frame_scores.csv"))?,
        write_scene_means(&bundle.scene_means, &out_dir.join("scene_means.csv"))?,
        write_dataset_means(&bundle.dataset_means, &out_dir.join("dataset_means.csv"))?,
    ];
    for g in &bundle.gaps {
        let (matrix, ranking) = gap_file_names(g);
        written.push(write_gap_matrix(g, &out_dir.join(matrix))?);
        written.push(write_ranking(g, &out_dir.join(ranking))?);
    }
    for sections in bundle.trends.values() {
        if let Some(first) = sections.first() {
            written.push(write_trend(sections, &out_dir.join(trend_file_name(first.metric)))?);
        }
    }
    Ok(written)
}

/// Pretty JSON with alphabetically ordered keys.
pub fn to_json_string(bundle: &ReportBundle) -> Result<String, ReportError> {
    // `serde_json::Value` objects are BTreeMaps, which fixes key order.
    let value = serde_json::to_value(bundle)?;
    Ok(serde_json::to_string_pretty(&value)? + "\n")
}

pub fn emit_json(bundle: &ReportBundle, path: &Path) -> Result<(), ReportError> {
    let text = to_json_string(bundle)?;
    fs::write(path, text).map_err(io_err(path))
}

/// Parses a `frame_scores.csv` back into rows keyed by
/// `(dataset_id, scene_id, frame_id)`. Only the CSV columns are restored.
pub fn read_frame_scores(path: &Path) -> Result<Vec<FrameScoreCsvRow>, ReportError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut r = csv::Reader::from_reader(file);
    let mut out = Vec::new();
    for rec in r.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameScoreCsvRow {
    pub dataset_id: String,
    pub scene_id: String,
    pub frame_id: String,
    pub mmcm: f64,
    pub mean_agreement: f64,
    pub mean_confidence: f64,
    pub depth_entropy: Option<f64>,
    pub depth_mean: Option<f64>,
    pub discontinuity_ratio: Option<f64>,
}
