//! Random frames and depth maps, both as rand-driven samplers and as
//! proptest strategies.

use mmcm::{ConfidenceMap, DepthMap, EnsembleFrame, LabelMap, Prediction};
use proptest::prelude::*;
use rand::Rng;

use crate::oracle;

/// Plain-vector ensemble frame, convertible into the library type.
#[derive(Debug, Clone)]
pub struct RawFrame {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<Vec<u16>>,
    pub conf: Vec<Vec<f32>>,
}

impl RawFrame {
    pub fn n_models(&self) -> usize {
        self.labels.len()
    }

    pub fn to_frame(&self) -> EnsembleFrame {
        let predictions = self
            .labels
            .iter()
            .zip(&self.conf)
            .map(|(l, c)| prediction(self.width, self.height, l.clone(), c.clone()))
            .collect();
        EnsembleFrame {
            frame_id: "f".into(),
            predictions,
            depth: None,
        }
    }

    pub fn oracle(&self) -> oracle::NaiveConsensus {
        oracle::consensus(self.width, self.height, &self.labels, &self.conf)
    }
}

pub fn prediction(width: usize, height: usize, labels: Vec<u16>, conf: Vec<f32>) -> Prediction {
    Prediction::new(
        LabelMap::new(width as u32, height as u32, labels).unwrap(),
        ConfidenceMap::new(width as u32, height as u32, conf).unwrap(),
    )
    .unwrap()
}

#[derive(Debug, Clone)]
pub struct RawDepth {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f32>,
}

impl RawDepth {
    pub fn to_map(&self) -> DepthMap {
        DepthMap::new(self.width as u32, self.height as u32, self.values.clone()).unwrap()
    }

    pub fn map_values(&self, f: impl Fn(f32) -> f32) -> RawDepth {
        RawDepth {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Frame up to `max_side` x `max_side`, 2..=`max_models` models and
/// 1..=`max_classes` classes, with continuous confidences in [0, 1].
pub fn random_frame<R: Rng>(rng: &mut R, max_side: usize, max_models: usize, max_classes: u16) -> RawFrame {
    let width = rng.gen_range(1..=max_side);
    let height = rng.gen_range(1..=max_side);
    let n = rng.gen_range(2..=max_models);
    let k = rng.gen_range(1..=max_classes);
    let px = width * height;
    let labels = (0..n)
        .map(|_| (0..px).map(|_| rng.gen_range(0..k)).collect())
        .collect();
    let conf = (0..n)
        .map(|_| (0..px).map(|_| rng.gen_range(0.0f32..=1.0)).collect())
        .collect();
    RawFrame { width, height, labels, conf }
}

/// Depth map up to `max_side` x `max_side`. Some maps are drawn from a few
/// discrete levels so flat regions and ties occur.
pub fn random_depth<R: Rng>(rng: &mut R, max_side: usize) -> RawDepth {
    let width = rng.gen_range(1..=max_side);
    let height = rng.gen_range(1..=max_side);
    let px = width * height;
    let values = match rng.gen_range(0..3) {
        0 => (0..px).map(|_| rng.gen_range(-100.0f32..100.0)).collect(),
        1 => (0..px).map(|_| rng.gen_range(0..4) as f32 * 0.5).collect(),
        _ => {
            let c = rng.gen_range(0.0f32..10.0);
            (0..px).map(|_| c).collect()
        }
    };
    RawDepth { width, height, values }
}

/// Frames whose confidences are multiples of 1/4096, so scaling by m/256 is
/// exact in f32.
pub fn grid_frame(max_side: usize, max_models: usize, max_classes: u16) -> impl Strategy<Value = RawFrame> {
    (1..=max_side, 1..=max_side, 2..=max_models, 1..=max_classes).prop_flat_map(|(w, h, n, k)| {
        let px = w * h;
        (
            prop::collection::vec(prop::collection::vec(0..k, px), n),
            prop::collection::vec(prop::collection::vec((0u32..=4096).prop_map(|q| q as f32 / 4096.0), px), n),
        )
            .prop_map(move |(labels, conf)| RawFrame {
                width: w,
                height: h,
                labels,
                conf,
            })
    })
}

/// Depth maps with small integer values, so affine maps with dyadic
/// coefficients are exact.
pub fn int_depth(max_side: usize) -> impl Strategy<Value = RawDepth> {
    (1..=max_side, 1..=max_side).prop_flat_map(|(w, h)| {
        prop::collection::vec((-64i32..=64).prop_map(|v| v as f32), w * h).prop_map(move |values| RawDepth {
            width: w,
            height: h,
            values,
        })
    })
}

/// Depth maps with arbitrary finite values.
pub fn any_depth(max_side: usize) -> impl Strategy<Value = RawDepth> {
    (1..=max_side, 1..=max_side).prop_flat_map(|(w, h)| {
        prop::collection::vec(-1.0e3f32..1.0e3, w * h).prop_map(move |values| RawDepth {
            width: w,
            height: h,
            values,
        })
    })
}
