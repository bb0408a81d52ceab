//! Rebuilds corpus scores from a previously written `frame_scores.csv`.

use anyhow::{bail, Result};

use mmcm::consensus::ConsensusResult;
use mmcm::corpus::{CorpusScores, FrameFailure, FrameRecord, FrameScores, Manifest};
use mmcm::report::FrameScoreCsvRow;
use mmcm::structural::{StructuralParams, StructuralResult};

/// Frames listed in the manifest but missing from the CSV are recorded as
/// failures. Pairwise matrices and depth extrema are not part of the CSV and
/// come back empty (extrema as NaN).
pub fn from_csv(m: &Manifest, rows: &[FrameScoreCsvRow], params: &StructuralParams) -> Result<CorpusScores> {
    let mut records = Vec::with_capacity(m.frame_count());
    for r in m.frames() {
        let (d, s, f) = (&r.dataset.dataset_id, &r.scene.scene_id, &r.frame.frame_id);
        let row = rows
            .iter()
            .find(|x| &x.dataset_id == d && &x.scene_id == s && &x.frame_id == f);
        let outcome = match row {
            Some(x) => Ok(FrameScores {
                frame_id: f.clone(),
                consensus: ConsensusResult {
                    frame_id: f.clone(),
                    pairwise_agreement: Vec::new(),
                    mean_agreement: x.mean_agreement,
                    mean_confidence: x.mean_confidence,
                    per_model_mean_confidence: Vec::new(),
                    mmcm: x.mmcm,
                },
                structural: match (x.depth_entropy, x.depth_mean, x.discontinuity_ratio) {
                    (Some(e), Some(mean), Some(ratio)) => Some(StructuralResult {
                        depth_entropy: e,
                        depth_mean: mean,
                        depth_min: f64::NAN,
                        depth_max: f64::NAN,
                        discontinuity_ratio: ratio,
                        bin_count: params.bins,
                        tau: params.tau,
                    }),
                    _ => None,
                },
            }),
            None => Err(FrameFailure {
                dataset_id: d.clone(),
                scene_id: s.clone(),
                frame_id: f.clone(),
                model: None,
                path: None,
                kind: "MissingScore".into(),
                message: "frame absent from scores file".into(),
            }),
        };
        records.push(FrameRecord {
            dataset_id: d.clone(),
            scene_id: s.clone(),
            domain_tag: r.dataset.domain_tag.clone(),
            outcome,
        });
    }
    let scores = CorpusScores { records };
    if scores.frames_scored() == 0 {
        bail!("scores file matches no frame of the manifest");
    }
    Ok(scores)
}
