//! Multi-model consensus (MMCM) for a single frame.
//!
//! For every unordered model pair the confidence-weighted agreement is the
//! mean over pixels of `[S_a == S_b] * sqrt(C_a * C_b)`. The frame score is
//! the mean pair agreement times the square root of the mean confidence.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{ConfidenceMap, DepthMap, LabelMap};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConsensusError {
    #[error("raster dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(u32, u32, u32, u32),
    #[error("consensus needs at least two models, got {0}")]
    TooFewModels(usize),
}

/// One model's output for a frame: labels plus the confidence of each label.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub labels: LabelMap,
    pub confidence: ConfidenceMap,
}

impl Prediction {
    pub fn new(labels: LabelMap, confidence: ConfidenceMap) -> Result<Self, ConsensusError> {
        same_dims(
            (labels.width(), labels.height()),
            (confidence.width(), confidence.height()),
        )?;
        Ok(Prediction { labels, confidence })
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.labels.width(), self.labels.height())
    }
}

fn same_dims(a: (u32, u32), b: (u32, u32)) -> Result<(), ConsensusError> {
    if a == b {
        Ok(())
    } else {
        Err(ConsensusError::DimensionMismatch(a.0, a.1, b.0, b.1))
    }
}

/// Aligned predictions of every ensemble member for one image.
#[derive(Debug, Clone)]
pub struct EnsembleFrame {
    pub frame_id: String,
    pub predictions: Vec<Prediction>,
    pub depth: Option<DepthMap>,
}

impl EnsembleFrame {
    pub fn validate(&self) -> Result<(u32, u32), ConsensusError> {
        let first = match self.predictions.first() {
            Some(p) => p.dims(),
            None => return Err(ConsensusError::TooFewModels(0)),
        };
        for p in &self.predictions {
            same_dims(first, p.dims())?;
            same_dims(first, (p.confidence.width(), p.confidence.height()))?;
        }
        if let Some(d) = &self.depth {
            same_dims(first, (d.width(), d.height()))?;
        }
        if self.predictions.len() < 2 {
            return Err(ConsensusError::TooFewModels(self.predictions.len()));
        }
        Ok(first)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusResult {
    pub frame_id: String,
    /// `N x N`, symmetric; the diagonal is `None`.
    pub pairwise_agreement: Vec<Vec<Option<f64>>>,
    pub mean_agreement: f64,
    pub mean_confidence: f64,
    pub per_model_mean_confidence: Vec<f64>,
    pub mmcm: f64,
}

/// Confidence-weighted agreement between two predictions.
pub fn pairwise_agreement(a: &Prediction, b: &Prediction) -> Result<f64, ConsensusError> {
    same_dims(a.dims(), b.dims())?;
    Ok(weighted_agreement(
        a.labels.labels(),
        a.confidence.values(),
        b.labels.labels(),
        b.confidence.values(),
    ))
}

// Row-major, single f64 accumulator: results must not depend on scheduling.
fn weighted_agreement(la: &[u16], ca: &[f32], lb: &[u16], cb: &[f32]) -> f64 {
    let n = la.len();
    let (la, ca, lb, cb) = (&la[..n], &ca[..n], &lb[..n], &cb[..n]);
    let mut sum = 0.0f64;
    for i in 0..n {
        if la[i] == lb[i] {
            sum += (ca[i] as f64 * cb[i] as f64).sqrt();
        }
    }
    sum / n as f64
}

fn mean_confidence(c: &ConfidenceMap) -> f64 {
    let v = c.values();
    v.iter().fold(0.0f64, |acc, &x| acc + x as f64) / v.len() as f64
}

pub fn consensus(frame: &EnsembleFrame) -> Result<ConsensusResult, ConsensusError> {
    frame.validate()?;
    let preds = &frame.predictions;
    let n = preds.len();

    let mut matrix = vec![vec![None; n]; n];
    let mut pair_sum = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            let a = pairwise_agreement(&preds[i], &preds[j])?;
            matrix[i][j] = Some(a);
            matrix[j][i] = Some(a);
            pair_sum += a;
        }
    }
    let pairs = (n * (n - 1) / 2) as f64;
    let mean_agreement = pair_sum / pairs;

    let per_model: Vec<f64> = preds.iter().map(|p| mean_confidence(&p.confidence)).collect();
    let mean_conf = per_model.iter().sum::<f64>() / n as f64;

    Ok(ConsensusResult {
        frame_id: frame.frame_id.clone(),
        pairwise_agreement: matrix,
        mean_agreement,
        mean_confidence: mean_conf,
        per_model_mean_confidence: per_model,
        mmcm: mean_agreement * mean_conf.sqrt(),
    })
}
