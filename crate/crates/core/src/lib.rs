//! Label-free scene complexity metrics for image corpora.
//!
//! Perceptual complexity comes from how well an ensemble of segmentation
//! models agrees on each frame ([`consensus`]); structural complexity comes
//! from the frame's depth map ([`structural`]). Frame scores roll up to scene
//! and dataset means whose relative differences measure the gap between
//! domains ([`gap`]). Predictions arrive as `MMC1` rasters ([`raster`])
//! listed in a JSON manifest ([`corpus`]).

pub mod analysis;
pub mod consensus;
pub mod corpus;
pub mod gap;
pub mod plot;
pub mod raster;
pub mod report;
pub mod structural;
pub mod synthgen;

pub use consensus::{consensus, pairwise_agreement, ConsensusResult, EnsembleFrame, Prediction};
pub use corpus::{load_manifest, score_corpus, validate_corpus, CorpusScores, Manifest};
pub use gap::{aggregate_gaps, gap_matrix, group_mean, perceptual_gap, trend_fit, GapMatrix, ScoreSet, TrendFit};
pub use raster::{read_raster, write_raster, ConfidenceMap, DepthMap, LabelMap, Raster, RasterKind};
pub use structural::{depth_entropy, discontinuity_ratio, sobel_gradients, structural_metrics, StructuralParams};
