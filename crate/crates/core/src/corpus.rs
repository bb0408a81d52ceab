//! Manifest-driven corpora: datasets contain scenes, scenes contain frames,
//! and each frame lists one label/confidence raster pair per model plus an
//! optional depth raster.
//!
//! Raster paths are resolved relative to the directory holding the manifest.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consensus::{consensus, ConsensusError, ConsensusResult, EnsembleFrame, Prediction};
use crate::gap::{group_mean, GapError, ScoreSet};
use crate::raster::{self, RasterError};
use crate::structural::{structural_metrics, StructuralError, StructuralParams, StructuralResult};

pub const MANIFEST_VERSION: &str = "1";

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("cannot read manifest {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest is not valid JSON: {0}")]
    ParseError(String),
    #[error("manifest violates schema: {0}")]
    SchemaViolation(String),
    #[error("duplicate {kind} id {id:?}")]
    DuplicateId { kind: &'static str, id: String },
    #[error("frame {frame:?} in {dataset}/{scene} lists {found} predictions, manifest declares {expected} models")]
    ModelCountMismatch {
        dataset: String,
        scene: String,
        frame: String,
        expected: usize,
        found: usize,
    },
    #[error("unknown dataset {0:?}")]
    UnknownDataset(String),
    #[error("unknown scene {0:?}")]
    UnknownScene(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionPaths {
    pub labels: PathBuf,
    pub confidence: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameEntry {
    pub frame_id: String,
    pub predictions: Vec<PredictionPaths>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneEntry {
    pub scene_id: String,
    pub frames: Vec<FrameEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetEntry {
    pub dataset_id: String,
    pub domain_tag: String,
    pub scenes: Vec<SceneEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: String,
    pub models: Vec<String>,
    pub datasets: Vec<DatasetEntry>,
    /// Directory that relative raster paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn unique<'a>(
    kind: &'static str,
    ids: impl IntoIterator<Item = &'a String>,
) -> Result<(), ManifestError> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(ManifestError::DuplicateId {
                kind,
                id: id.clone(),
            });
        }
    }
    Ok(())
}

impl Manifest {
    pub fn from_json(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, ManifestError> {
        let mut m: Manifest = serde_json::from_str(text).map_err(|e| match e.classify() {
            serde_json::error::Category::Data => ManifestError::SchemaViolation(e.to_string()),
            _ => ManifestError::ParseError(e.to_string()),
        })?;
        m.base_dir = base_dir.into();
        m.check()?;
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    /// Structural checks only; no raster is opened.
    pub fn check(&self) -> Result<(), ManifestError> {
        if self.version != MANIFEST_VERSION {
            return Err(ManifestError::SchemaViolation(format!(
                "unsupported version {:?}",
                self.version
            )));
        }
        if self.models.len() < 2 {
            return Err(ManifestError::SchemaViolation(format!(
                "at least two models required, found {}",
                self.models.len()
            )));
        }
        unique("model", &self.models)?;
        unique("dataset", self.datasets.iter().map(|d| &d.dataset_id))?;
        for d in &self.datasets {
            unique("scene", d.scenes.iter().map(|s| &s.scene_id))?;
            for s in &d.scenes {
                if s.frames.is_empty() {
                    return Err(ManifestError::SchemaViolation(format!(
                        "scene {}/{} has no frames",
                        d.dataset_id, s.scene_id
                    )));
                }
                unique("frame", s.frames.iter().map(|f| &f.frame_id))?;
                for f in &s.frames {
                    if f.predictions.len() != self.models.len() {
                        return Err(ManifestError::ModelCountMismatch {
                            dataset: d.dataset_id.clone(),
                            scene: s.scene_id.clone(),
                            frame: f.frame_id.clone(),
                            expected: self.models.len(),
                            found: f.predictions.len(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.base_dir.join(p)
    }

    pub fn dataset(&self, id: &str) -> Option<&DatasetEntry> {
        self.datasets.iter().find(|d| d.dataset_id == id)
    }

    /// Keeps only the named datasets and scenes. Empty filters keep everything.
    pub fn filtered(&self, datasets: &[String], scenes: &[String]) -> Result<Manifest, ManifestError> {
        for id in datasets {
            if self.dataset(id).is_none() {
                return Err(ManifestError::UnknownDataset(id.clone()));
            }
        }
        for id in scenes {
            let known = self
                .datasets
                .iter()
                .any(|d| d.scenes.iter().any(|s| &s.scene_id == id));
            if !known {
                return Err(ManifestError::UnknownScene(id.clone()));
            }
        }
        let mut out = self.clone();
        out.datasets.retain(|d| datasets.is_empty() || datasets.contains(&d.dataset_id));
        for d in &mut out.datasets {
            d.scenes.retain(|s| scenes.is_empty() || scenes.contains(&s.scene_id));
        }
        out.datasets.retain(|d| !d.scenes.is_empty());
        Ok(out)
    }

    /// Frames in manifest traversal order.
    pub fn frames(&self) -> Vec<FrameRef<'_>> {
        let mut out = Vec::new();
        for d in &self.datasets {
            for s in &d.scenes {
                for f in &s.frames {
                    out.push(FrameRef {
                        dataset: d,
                        scene: s,
                        frame: f,
                    });
                }
            }
        }
        out
    }

    pub fn frame_count(&self) -> usize {
        self.datasets
            .iter()
            .flat_map(|d| &d.scenes)
            .map(|s| s.frames.len())
            .sum()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FrameRef<'a> {
    pub dataset: &'a DatasetEntry,
    pub scene: &'a SceneEntry,
    pub frame: &'a FrameEntry,
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest, ManifestError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ManifestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Manifest::from_json(&text, base)
}

/// Why one frame could not be scored.
#[derive(Debug, Error)]
pub enum FrameError {
    #[error("{}{}: {source}", model.as_deref().map(|m| format!("model {m}, ")).unwrap_or_default(), path.display())]
    Raster {
        model: Option<String>,
        path: PathBuf,
        #[source]
        source: RasterError,
    },
    #[error("{0}")]
    Consensus(#[from] ConsensusError),
    #[error("{0}")]
    Structural(#[from] StructuralError),
}

impl FrameError {
    pub fn kind(&self) -> &'static str {
        match self {
            FrameError::Raster { source, .. } => match source {
                RasterError::BadMagic(_) => "BadMagic",
                RasterError::UnknownDtype(_) => "UnknownDtype",
                RasterError::NonZeroReserved => "NonZeroReserved",
                RasterError::TruncatedHeader(_) => "TruncatedHeader",
                RasterError::ZeroDimension { .. } => "ZeroDimension",
                RasterError::TruncatedPayload { .. } => "TruncatedPayload",
                RasterError::OversizedPayload { .. } => "OversizedPayload",
                RasterError::DtypeMismatch { .. } => "DtypeMismatch",
                RasterError::NonFiniteValue { .. } => "NonFiniteValue",
                RasterError::OutOfRangeConfidence { .. } => "OutOfRangeConfidence",
                RasterError::LengthMismatch { .. } => "LengthMismatch",
                RasterError::IoFailure { .. } => "IoFailure",
            },
            FrameError::Consensus(ConsensusError::DimensionMismatch(..)) => "DimensionMismatch",
            FrameError::Consensus(ConsensusError::TooFewModels(_)) => "TooFewModels",
            FrameError::Structural(_) => "InvalidParameter",
        }
    }
}

/// A recorded failure, addressable by position in the corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameFailure {
    pub dataset_id: String,
    pub scene_id: String,
    pub frame_id: String,
    pub model: Option<String>,
    pub path: Option<String>,
    pub kind: String,
    pub message: String,
}

impl FrameFailure {
    fn new(r: &FrameRef<'_>, err: &FrameError) -> Self {
        let (model, path) = match err {
            FrameError::Raster { model, path, .. } => {
                (model.clone(), Some(path.display().to_string()))
            }
            _ => (None, None),
        };
        FrameFailure {
            dataset_id: r.dataset.dataset_id.clone(),
            scene_id: r.scene.scene_id.clone(),
            frame_id: r.frame.frame_id.clone(),
            model,
            path,
            kind: err.kind().to_string(),
            message: err.to_string(),
        }
    }
}

impl fmt::Display for FrameFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/{}/{}: {}: {}",
            self.dataset_id, self.scene_id, self.frame_id, self.kind, self.message
        )
    }
}

fn raster_err(model: Option<&str>, path: PathBuf) -> impl FnOnce(RasterError) -> FrameError {
    let model = model.map(str::to_string);
    move |source| FrameError::Raster {
        model,
        path,
        source,
    }
}

/// Reads every raster of one frame. Label and confidence dimensions must
/// agree; cross-model agreement is checked by [`EnsembleFrame::validate`].
pub fn load_frame(m: &Manifest, r: &FrameRef<'_>) -> Result<EnsembleFrame, FrameError> {
    let mut predictions = Vec::with_capacity(m.models.len());
    for (model, p) in m.models.iter().zip(&r.frame.predictions) {
        let lp = m.resolve(&p.labels);
        let cp = m.resolve(&p.confidence);
        let labels = raster::read_labels(&lp).map_err(raster_err(Some(model), lp.clone()))?;
        let conf = raster::read_confidence(&cp).map_err(raster_err(Some(model), cp.clone()))?;
        let pred = Prediction::new(labels, conf).map_err(FrameError::Consensus)?;
        predictions.push(pred);
    }
    let depth = match &r.frame.depth {
        Some(p) => {
            let dp = m.resolve(p);
            Some(raster::read_depth(&dp).map_err(raster_err(None, dp.clone()))?)
        }
        None => None,
    };
    let frame = EnsembleFrame {
        frame_id: r.frame.frame_id.clone(),
        predictions,
        depth,
    };
    frame.validate()?;
    Ok(frame)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameScores {
    pub frame_id: String,
    pub consensus: ConsensusResult,
    pub structural: Option<StructuralResult>,
}

pub fn score_frame(frame: &EnsembleFrame, params: &StructuralParams) -> Result<FrameScores, FrameError> {
    let c = consensus(frame)?;
    let structural = match &frame.depth {
        Some(d) => Some(structural_metrics(d, params)?),
        None => None,
    };
    Ok(FrameScores {
        frame_id: frame.frame_id.clone(),
        consensus: c,
        structural,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub dataset_id: String,
    pub scene_id: String,
    pub domain_tag: String,
    pub outcome: Result<FrameScores, FrameFailure>,
}

impl FrameRecord {
    pub fn scores(&self) -> Option<&FrameScores> {
        self.outcome.as_ref().ok()
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("invalid structural parameters: {0}")]
    Params(#[from] StructuralError),
    #[error("worker pool: {0}")]
    Pool(String),
    #[error("no frame could be scored ({failed} failed)")]
    NoFramesScored { failed: usize },
}

/// Frame-level outcomes of a corpus run, in manifest order.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusScores {
    pub records: Vec<FrameRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub dataset_id: String,
    /// `None` for dataset-level summaries.
    pub scene_id: Option<String>,
    pub domain_tag: String,
    pub frames_scored: usize,
    pub frames_failed: usize,
    /// Absent when every frame of the group failed.
    pub mean_mmcm: Option<f64>,
}

impl CorpusScores {
    pub fn scored(&self) -> impl Iterator<Item = (&FrameRecord, &FrameScores)> {
        self.records.iter().filter_map(|r| r.scores().map(|s| (r, s)))
    }

    pub fn failures(&self) -> Vec<&FrameFailure> {
        self.records
            .iter()
            .filter_map(|r| r.outcome.as_ref().err())
            .collect()
    }

    pub fn frames_scored(&self) -> usize {
        self.scored().count()
    }

    pub fn frames_failed(&self) -> usize {
        self.records.len() - self.frames_scored()
    }

    fn group<'a>(
        &'a self,
        pred: impl Fn(&FrameRecord) -> bool + 'a,
    ) -> impl Iterator<Item = &'a FrameRecord> + 'a {
        self.records.iter().filter(move |r| pred(r))
    }

    /// Per-frame scores of one scene, or `EmptyGroup` if none succeeded.
    pub fn scene_set(&self, dataset_id: &str, scene_id: &str) -> Result<ScoreSet, GapError> {
        let scores = self
            .group(|r| r.dataset_id == dataset_id && r.scene_id == scene_id)
            .filter_map(|r| r.scores())
            .map(|s| (s.frame_id.clone(), s.consensus.mmcm))
            .collect();
        group_mean(scene_id, scores)
    }

    /// All scored frames of a dataset pooled into one mean.
    pub fn dataset_set(&self, dataset_id: &str) -> Result<ScoreSet, GapError> {
        let scores = self
            .group(|r| r.dataset_id == dataset_id)
            .filter_map(|r| r.scores().map(|s| (format!("{}/{}", r.scene_id, s.frame_id), s.consensus.mmcm)))
            .collect();
        group_mean(dataset_id, scores)
    }

    /// Scene summaries in manifest order.
    pub fn scene_summaries(&self) -> Vec<GroupSummary> {
        let mut keys: Vec<(&str, &str, &str)> = Vec::new();
        for r in &self.records {
            let k = (r.dataset_id.as_str(), r.scene_id.as_str(), r.domain_tag.as_str());
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
        keys.into_iter()
            .map(|(d, s, tag)| {
                let members: Vec<_> = self.group(|r| r.dataset_id == d && r.scene_id == s).collect();
                let scored = members.iter().filter(|r| r.outcome.is_ok()).count();
                GroupSummary {
                    dataset_id: d.to_string(),
                    scene_id: Some(s.to_string()),
                    domain_tag: tag.to_string(),
                    frames_scored: scored,
                    frames_failed: members.len() - scored,
                    mean_mmcm: self.scene_set(d, s).ok().map(|x| x.mean_mmcm),
                }
            })
            .collect()
    }

    pub fn dataset_summaries(&self) -> Vec<GroupSummary> {
        let mut keys: Vec<(&str, &str)> = Vec::new();
        for r in &self.records {
            let k = (r.dataset_id.as_str(), r.domain_tag.as_str());
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
        keys.into_iter()
            .map(|(d, tag)| {
                let members: Vec<_> = self.group(|r| r.dataset_id == d).collect();
                let scored = members.iter().filter(|r| r.outcome.is_ok()).count();
                GroupSummary {
                    dataset_id: d.to_string(),
                    scene_id: None,
                    domain_tag: tag.to_string(),
                    frames_scored: scored,
                    frames_failed: members.len() - scored,
                    mean_mmcm: self.dataset_set(d).ok().map(|x| x.mean_mmcm),
                }
            })
            .collect()
    }
}

fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T, CorpusError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CorpusError::Pool(e.to_string()))?;
    Ok(pool.install(f))
}

/// Scores every frame on a pool of `workers` threads. Output order is the
/// manifest order regardless of scheduling; a failing frame is recorded and
/// never affects the others.
pub fn score_corpus(
    m: &Manifest,
    params: &StructuralParams,
    workers: usize,
) -> Result<CorpusScores, CorpusError> {
    params.validate()?;
    let frames = m.frames();
    let records: Vec<FrameRecord> = with_pool(workers, || {
        frames
            .par_iter()
            .map(|r| {
                let outcome = load_frame(m, r)
                    .and_then(|f| score_frame(&f, params))
                    .map_err(|e| FrameFailure::new(r, &e));
                FrameRecord {
                    dataset_id: r.dataset.dataset_id.clone(),
                    scene_id: r.scene.scene_id.clone(),
                    domain_tag: r.dataset.domain_tag.clone(),
                    outcome,
                }
            })
            .collect()
    })?;
    let scores = CorpusScores { records };
    if scores.frames_scored() == 0 {
        return Err(CorpusError::NoFramesScored {
            failed: scores.frames_failed(),
        });
    }
    Ok(scores)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub frames_checked: usize,
    pub failures: Vec<FrameFailure>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Opens every referenced raster and cross-checks dimensions within each
/// frame. Collects all failures instead of stopping at the first.
pub fn validate_corpus(m: &Manifest, workers: usize) -> Result<ValidationReport, CorpusError> {
    let frames = m.frames();
    let per_frame: Vec<Vec<FrameFailure>> = with_pool(workers, || {
        frames.par_iter().map(|r| validate_frame(m, r)).collect()
    })?;
    Ok(ValidationReport {
        frames_checked: frames.len(),
        failures: per_frame.into_iter().flatten().collect(),
    })
}

fn validate_frame(m: &Manifest, r: &FrameRef<'_>) -> Vec<FrameFailure> {
    let mut failures = Vec::new();
    let mut dims: Vec<(String, (u32, u32))> = Vec::new();
    let mut check = |model: Option<&str>, rel: &Path, kind: raster::RasterKind| {
        let path = m.resolve(rel);
        match raster::read_raster(&path, kind) {
            Ok(raster) => dims.push((path.display().to_string(), raster.dims())),
            Err(e) => failures.push(FrameFailure::new(r, &raster_err(model, path)(e))),
        }
    };
    for (model, p) in m.models.iter().zip(&r.frame.predictions) {
        check(Some(model), &p.labels, raster::RasterKind::Labels);
        check(Some(model), &p.confidence, raster::RasterKind::Confidence);
    }
    if let Some(d) = &r.frame.depth {
        check(None, d, raster::RasterKind::Depth);
    }
    if let Some((first_path, first)) = dims.first().cloned() {
        for (path, d) in &dims[1..] {
            if *d != first {
                let err = FrameError::Consensus(ConsensusError::DimensionMismatch(
                    first.0, first.1, d.0, d.1,
                ));
                let mut f = FrameFailure::new(r, &err);
                f.path = Some(path.clone());
                f.message = format!("{path} is {}x{}, {first_path} is {}x{}", d.0, d.1, first.0, first.1);
                failures.push(f);
            }
        }
    }
    failures
}
