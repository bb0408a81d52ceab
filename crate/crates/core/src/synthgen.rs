//! Synthetic ensemble corpora with analytically known scores.
//!
//! Every frame has one shared "disagreement set" of pixels. Outside it all
//! models predict the same base label; inside it model `k` predicts
//! `(base + k) mod K`, so every model pair disagrees there and agrees
//! elsewhere. With `d = |I| - round(rho * |I|)` disagreeing pixels each pair's
//! label agreement fraction is exactly `round(rho * |I|) / |I|`. Confidence is
//! constant per model, which makes the expected score closed-form:
//!
//! ```text
//! A_ij = rho * sqrt(c_i * c_j)      C = mean(c)      mmcm = mean(A_ij) * sqrt(C)
//! ```
//!
//! and `rho * c * sqrt(c)` when all models share one confidence `c`.
//!
//! # Random stream
//!
//! The generator is ChaCha20 (RFC 8439 block function, 20 rounds) keyed with
//! the seed as 8 little-endian bytes followed by 24 zero bytes, nonce zero,
//! consuming the keystream as little-endian 32-bit words (64-bit draws are
//! two consecutive words, low word first). Frames are generated in manifest
//! order; per frame the draws are, in order:
//!
//! 1. one 32-bit draw per pixel, row-major: `base = (draw * K) >> 32`;
//! 2. a partial Fisher-Yates pass over `0..|I|` for `i in 0..d`:
//!    `j = i + ((draw64 * (|I| - i)) >> 64)`, swap `i` and `j`; the first
//!    `d` entries are the disagreement set;
//! 3. for `uniform-random` depth only, one 32-bit draw per pixel:
//!    `depth = (draw >> 8) / 2^24`.

use std::fs;
use std::path::{Path, PathBuf};

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{DatasetEntry, FrameEntry, Manifest, PredictionPaths, SceneEntry, MANIFEST_VERSION};
use crate::raster::{self, ConfidenceMap, DepthMap, LabelMap, Raster, RasterError};
use crate::structural::{DEFAULT_BINS, DEFAULT_TAU};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synth spec: {0}")]
    InvalidSpec(String),
    #[error("agreement not realizable: {0}")]
    UnrealizableAgreement(String),
    #[error("io failure on {path}: {source}")]
    IoFailure {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Raster(#[from] RasterError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DepthPattern {
    /// No depth raster is written.
    None,
    /// Every pixel is 1.0.
    Constant,
    /// Columns left of `width / 2` are 0.0, the rest 1.0.
    StepEdge,
    /// Depth equals the column index.
    GradientRamp,
    UniformRandom,
}

/// One confidence for every model, or one per model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConfidenceSpec {
    Global(f64),
    PerModel(Vec<f64>),
}

fn default_classes() -> u32 {
    19
}
fn default_one() -> usize {
    1
}
fn default_bins() -> usize {
    DEFAULT_BINS
}
fn default_tau() -> f64 {
    DEFAULT_TAU
}
fn default_dataset() -> String {
    "synth".into()
}
fn default_tag() -> String {
    "synthetic".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub width: u32,
    pub height: u32,
    pub n_models: usize,
    #[serde(default = "default_classes")]
    pub n_classes: u32,
    pub target_pair_agreement: f64,
    pub confidence_value: ConfidenceSpec,
    pub depth_pattern: DepthPattern,
    pub seed: u64,
    #[serde(default = "default_dataset")]
    pub dataset_id: String,
    #[serde(default = "default_tag")]
    pub domain_tag: String,
    #[serde(default = "default_one")]
    pub scenes: usize,
    #[serde(default = "default_one")]
    pub frames_per_scene: usize,
    /// Histogram bins the documented depth expectations assume.
    #[serde(default = "default_bins")]
    pub bins: usize,
    /// Threshold the documented discontinuity expectation assumes.
    #[serde(default = "default_tau")]
    pub tau: f64,
}

impl SynthSpec {
    pub fn new(width: u32, height: u32, n_models: usize, rho: f64, c: f64, depth: DepthPattern, seed: u64) -> Self {
        SynthSpec {
            width,
            height,
            n_models,
            n_classes: default_classes(),
            target_pair_agreement: rho,
            confidence_value: ConfidenceSpec::Global(c),
            depth_pattern: depth,
            seed,
            dataset_id: default_dataset(),
            domain_tag: default_tag(),
            scenes: 1,
            frames_per_scene: 1,
            bins: DEFAULT_BINS,
            tau: DEFAULT_TAU,
        }
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// Confidences as they will be stored (rounded to f32).
    pub fn stored_confidences(&self) -> Vec<f64> {
        match &self.confidence_value {
            ConfidenceSpec::Global(c) => vec![*c as f32 as f64; self.n_models],
            ConfidenceSpec::PerModel(v) => v.iter().map(|c| *c as f32 as f64).collect(),
        }
    }

    pub fn agreeing_pixels(&self) -> usize {
        (self.target_pair_agreement * self.pixel_count() as f64).round() as usize
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        if self.width == 0 || self.height == 0 {
            return bad(format!("dimensions {}x{} must be positive", self.width, self.height));
        }
        if self.n_models < 2 {
            return bad(format!("n_models must be at least 2, got {}", self.n_models));
        }
        if self.n_classes == 0 || self.n_classes > 1 << 16 {
            return bad(format!("n_classes {} outside 1..=65536", self.n_classes));
        }
        if self.scenes == 0 || self.frames_per_scene == 0 {
            return bad("scenes and frames_per_scene must be positive".into());
        }
        if self.bins == 0 || !(self.tau.is_finite() && self.tau > 0.0) {
            return bad("bins must be >= 1 and tau > 0".into());
        }
        let confs = match &self.confidence_value {
            ConfidenceSpec::Global(c) => vec![*c],
            ConfidenceSpec::PerModel(v) => {
                if v.len() != self.n_models {
                    return bad(format!("{} confidences for {} models", v.len(), self.n_models));
                }
                v.clone()
            }
        };
        if let Some(c) = confs.iter().find(|c| !(0.0..=1.0).contains(*c)) {
            return bad(format!("confidence {c} outside [0, 1]"));
        }
        if matches!(self.depth_pattern, DepthPattern::StepEdge | DepthPattern::GradientRamp) && self.width < 2 {
            return bad("step-edge and gradient-ramp depth need width >= 2".into());
        }
        let rho = self.target_pair_agreement;
        if !(0.0..=1.0).contains(&rho) {
            return Err(SynthError::UnrealizableAgreement(format!(
                "pair agreement {rho} outside [0, 1]"
            )));
        }
        if self.agreeing_pixels() < self.pixel_count() && (self.n_classes as usize) < self.n_models {
            return Err(SynthError::UnrealizableAgreement(format!(
                "{} models cannot all disagree with only {} classes",
                self.n_models, self.n_classes
            )));
        }
        Ok(())
    }

    pub fn expected(&self) -> Expected {
        let c = self.stored_confidences();
        let n = self.n_models;
        let rho = self.agreeing_pixels() as f64 / self.pixel_count() as f64;
        let mut pair_sum = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                pair_sum += rho * (c[i] * c[j]).sqrt();
            }
        }
        let mean_agreement = pair_sum / (n * (n - 1) / 2) as f64;
        let mean_confidence = c.iter().sum::<f64>() / n as f64;
        Expected {
            target_pair_agreement: self.target_pair_agreement,
            pair_agreement: rho,
            confidence_values: c,
            mean_agreement,
            mean_confidence,
            mmcm: mean_agreement * mean_confidence.sqrt(),
            depth: self.expected_depth(),
        }
    }

    fn expected_depth(&self) -> Option<ExpectedDepth> {
        let w = self.width as usize;
        let bins = self.bins;
        let tau = self.tau;
        let xlogx = |p: f64| if p > 0.0 { -p * p.ln() } else { 0.0 };
        let (entropy, mean, ratio) = match self.depth_pattern {
            DepthPattern::None => return None,
            DepthPattern::Constant => (Some(0.0), Some(1.0), Some(0.0)),
            DepthPattern::StepEdge => {
                let zeros = w / 2;
                let p0 = zeros as f64 / w as f64;
                let entropy = if bins == 1 { 0.0 } else { xlogx(p0) + xlogx(1.0 - p0) };
                // The two columns beside the step see a jump of 1 through all
                // three kernel rows; every other column sees none.
                let ratio = if 4.0 > tau { 2.0 / w as f64 } else { 0.0 };
                (Some(entropy), Some((w - zeros) as f64 / w as f64), Some(ratio))
            }
            DepthPattern::GradientRamp => {
                let range = (w - 1) as f64;
                let threshold = tau * range;
                // Border columns see a one-sided difference of 1 (response 4),
                // interior columns a central difference of 2 (response 8).
                let hits = (0..w)
                    .filter(|&x| {
                        let g = if x == 0 || x == w - 1 { 4.0 } else { 8.0 };
                        g > threshold
                    })
                    .count();
                // Columns land in distinct bins whenever bins outnumber the
                // column gaps; otherwise occupancy depends on rounding.
                let entropy = ((w - 1) < bins).then(|| (w as f64).ln());
                (entropy, Some(range / 2.0), Some(hits as f64 / w as f64))
            }
            DepthPattern::UniformRandom => (None, None, None),
        };
        Some(ExpectedDepth {
            pattern: self.depth_pattern,
            bins,
            tau,
            depth_entropy: entropy,
            depth_mean: mean,
            discontinuity_ratio: ratio,
        })
    }
}

/// Closed-form expectations written next to a generated corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expected {
    pub target_pair_agreement: f64,
    /// Realized agreement fraction after rounding to whole pixels.
    pub pair_agreement: f64,
    pub confidence_values: Vec<f64>,
    pub mean_agreement: f64,
    pub mean_confidence: f64,
    pub mmcm: f64,
    pub depth: Option<ExpectedDepth>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedDepth {
    pub pattern: DepthPattern,
    pub bins: usize,
    pub tau: f64,
    pub depth_entropy: Option<f64>,
    pub depth_mean: Option<f64>,
    pub discontinuity_ratio: Option<f64>,
}

/// In-memory rasters of one generated frame.
pub struct SynthFrame {
    pub labels: Vec<LabelMap>,
    pub confidence: Vec<ConfidenceMap>,
    pub depth: Option<DepthMap>,
}

pub struct Generator {
    spec: SynthSpec,
    rng: ChaCha20Rng,
    indices: Vec<u32>,
}

impl Generator {
    pub fn new(spec: SynthSpec) -> Result<Self, SynthError> {
        spec.validate()?;
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&spec.seed.to_le_bytes());
        let n = spec.pixel_count();
        Ok(Generator {
            spec,
            rng: ChaCha20Rng::from_seed(key),
            indices: Vec::with_capacity(n),
        })
    }

    pub fn next_frame(&mut self) -> Result<SynthFrame, SynthError> {
        let spec = &self.spec;
        let (w, h) = (spec.width, spec.height);
        let n = spec.pixel_count();
        let k = spec.n_classes as u64;

        let base: Vec<u16> = (0..n)
            .map(|_| ((self.rng.next_u32() as u64 * k) >> 32) as u16)
            .collect();

        let d = n - spec.agreeing_pixels();
        self.indices.clear();
        self.indices.extend(0..n as u32);
        for i in 0..d {
            let span = (n - i) as u128;
            let j = i + ((self.rng.next_u64() as u128 * span) >> 64) as usize;
            self.indices.swap(i, j);
        }
        let mut disagree = vec![false; n];
        for &i in &self.indices[..d] {
            disagree[i as usize] = true;
        }

        let mut labels = Vec::with_capacity(spec.n_models);
        for model in 0..spec.n_models as u64 {
            let l: Vec<u16> = base
                .iter()
                .zip(&disagree)
                .map(|(&b, &flip)| if flip { ((b as u64 + model) % k) as u16 } else { b })
                .collect();
            labels.push(LabelMap::new(w, h, l)?);
        }
        let confidence = spec
            .stored_confidences()
            .iter()
            .map(|&c| ConfidenceMap::new(w, h, vec![c as f32; n]))
            .collect::<Result<Vec<_>, _>>()?;

        let half = spec.width / 2;
        let depth_values: Option<Vec<f32>> = match spec.depth_pattern {
            DepthPattern::None => None,
            DepthPattern::Constant => Some(vec![1.0; n]),
            DepthPattern::StepEdge => Some(
                (0..n)
                    .map(|i| if (i as u32 % w) < half { 0.0 } else { 1.0 })
                    .collect(),
            ),
            DepthPattern::GradientRamp => Some((0..n).map(|i| (i as u32 % w) as f32).collect()),
            DepthPattern::UniformRandom => Some(
                (0..n)
                    .map(|_| (self.rng.next_u32() >> 8) as f32 / (1u32 << 24) as f32)
                    .collect(),
            ),
        };
        let depth = depth_values.map(|v| DepthMap::new(w, h, v)).transpose()?;

        Ok(SynthFrame {
            labels,
            confidence,
            depth,
        })
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SynthError + '_ {
    move |source| SynthError::IoFailure {
        path: path.display().to_string(),
        source,
    }
}

pub fn model_name(k: usize) -> String {
    format!("model{k}")
}

/// Writes rasters, `manifest.json` and `expected.json` under `out_dir`.
pub fn generate(spec: &SynthSpec, out_dir: impl AsRef<Path>) -> Result<Manifest, SynthError> {
    let out_dir = out_dir.as_ref();
    let mut gen = Generator::new(spec.clone())?;
    let mut scenes = Vec::with_capacity(spec.scenes);
    for s in 0..spec.scenes {
        let scene_id = format!("scene{s:03}");
        let rel_dir = PathBuf::from(&spec.dataset_id).join(&scene_id);
        let dir = out_dir.join(&rel_dir);
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let mut frames = Vec::with_capacity(spec.frames_per_scene);
        for f in 0..spec.frames_per_scene {
            let frame_id = format!("frame{f:04}");
            let frame = gen.next_frame()?;
            let mut predictions = Vec::with_capacity(spec.n_models);
            for (k, (l, c)) in frame.labels.into_iter().zip(frame.confidence).enumerate() {
                let lp = rel_dir.join(format!("{frame_id}.{}.labels.mmc1", model_name(k)));
                let cp = rel_dir.join(format!("{frame_id}.{}.conf.mmc1", model_name(k)));
                raster::write_raster(&Raster::Labels(l), out_dir.join(&lp))?;
                raster::write_raster(&Raster::Confidence(c), out_dir.join(&cp))?;
                predictions.push(PredictionPaths {
                    labels: lp,
                    confidence: cp,
                });
            }
            let depth = match frame.depth {
                Some(d) => {
                    let dp = rel_dir.join(format!("{frame_id}.depth.mmc1"));
                    raster::write_raster(&Raster::Depth(d), out_dir.join(&dp))?;
                    Some(dp)
                }
                None => None,
            };
            frames.push(FrameEntry {
                frame_id,
                predictions,
                depth,
            });
        }
        scenes.push(SceneEntry { scene_id, frames });
    }

    let manifest = Manifest {
        version: MANIFEST_VERSION.into(),
        models: (0..spec.n_models).map(model_name).collect(),
        datasets: vec![DatasetEntry {
            dataset_id: spec.dataset_id.clone(),
            domain_tag: spec.domain_tag.clone(),
            scenes,
        }],
        base_dir: out_dir.to_path_buf(),
    };
    let mp = out_dir.join("manifest.json");
    fs::write(&mp, manifest.to_json() + "\n").map_err(io_err(&mp))?;
    let ep = out_dir.join("expected.json");
    let expected = serde_json::to_string_pretty(&spec.expected()).expect("expected serializes");
    fs::write(&ep, expected + "\n").map_err(io_err(&ep))?;
    Ok(manifest)
}

pub fn load_spec(path: impl AsRef<Path>) -> Result<SynthSpec, SynthError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let spec: SynthSpec =
        serde_json::from_str(&text).map_err(|e| SynthError::InvalidSpec(e.to_string()))?;
    spec.validate()?;
    Ok(spec)
}
