//! Depth-derived structural complexity: histogram entropy, Sobel gradient
//! magnitude and the fraction of pixels on significant depth transitions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::DepthMap;

pub const DEFAULT_BINS: usize = 256;
pub const DEFAULT_TAU: f64 = 0.1;

#[derive(Debug, Error, PartialEq)]
pub enum StructuralError {
    #[error("bin count must be at least 1, got {0}")]
    InvalidBinCount(usize),
    #[error("tau must be a finite value > 0, got {0}")]
    InvalidTau(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructuralParams {
    pub bins: usize,
    pub tau: f64,
}

impl Default for StructuralParams {
    fn default() -> Self {
        StructuralParams {
            bins: DEFAULT_BINS,
            tau: DEFAULT_TAU,
        }
    }
}

impl StructuralParams {
    pub fn validate(&self) -> Result<(), StructuralError> {
        check_bins(self.bins)?;
        check_tau(self.tau)
    }
}

fn check_bins(bins: usize) -> Result<(), StructuralError> {
    if bins < 1 {
        Err(StructuralError::InvalidBinCount(bins))
    } else {
        Ok(())
    }
}

fn check_tau(tau: f64) -> Result<(), StructuralError> {
    if tau.is_finite() && tau > 0.0 {
        Ok(())
    } else {
        Err(StructuralError::InvalidTau(tau))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuralResult {
    /// Shannon entropy of the depth histogram, in nats.
    pub depth_entropy: f64,
    pub depth_mean: f64,
    pub depth_min: f64,
    pub depth_max: f64,
    pub discontinuity_ratio: f64,
    pub bin_count: usize,
    pub tau: f64,
}

/// Horizontal and vertical Sobel responses plus their Euclidean magnitude.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    pub width: u32,
    pub height: u32,
    pub gx: Vec<f64>,
    pub gy: Vec<f64>,
    pub magnitude: Vec<f64>,
}

fn min_max(values: &[f32]) -> (f64, f64) {
    values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        let v = v as f64;
        (lo.min(v), hi.max(v))
    })
}

/// Histogram bin of `v` for `bins` equal-width bins spanning `[lo, hi]`.
/// The upper edge is closed so `hi` lands in the last bin.
#[inline]
fn bin_index(v: f64, lo: f64, range: f64, bins: usize) -> usize {
    let t = (v - lo) / range * bins as f64;
    (t as usize).min(bins - 1)
}

pub fn depth_entropy(d: &DepthMap, bins: usize) -> Result<f64, StructuralError> {
    check_bins(bins)?;
    let (lo, hi) = min_max(d.values());
    Ok(entropy_with_range(d.values(), lo, hi, bins))
}

fn entropy_with_range(values: &[f32], lo: f64, hi: f64, bins: usize) -> f64 {
    let range = hi - lo;
    if range == 0.0 {
        return 0.0;
    }
    let mut counts = vec![0u64; bins];
    for &v in values {
        counts[bin_index(v as f64, lo, range, bins)] += 1;
    }
    let total = values.len() as f64;
    let h = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.ln()
        })
        .sum::<f64>();
    // A single occupied bin yields -1*ln(1) = -0.0.
    h.max(0.0)
}

/// Sobel gradients with clamp-to-edge borders.
///
/// The kernels are applied as printed (no flip), so `gx` is positive where
/// depth increases to the right and `gy` where it increases downward:
///
/// ```text
/// Sx = [-1 0 1; -2 0 2; -1 0 1]    Sy = [-1 -2 -1; 0 0 0; 1 2 1]
/// ```
pub fn sobel_gradients(d: &DepthMap) -> GradientField {
    let w = d.width() as usize;
    let h = d.height() as usize;
    let v = d.values();
    let n = w * h;
    let mut gx = vec![0.0f64; n];
    let mut gy = vec![0.0f64; n];
    let mut magnitude = vec![0.0f64; n];

    for y in 0..h {
        let up = &v[y.saturating_sub(1) * w..][..w];
        let mid = &v[y * w..][..w];
        let down = &v[(y + 1).min(h - 1) * w..][..w];
        for x in 0..w {
            let l = x.saturating_sub(1);
            let r = (x + 1).min(w - 1);
            let (ul, um, ur) = (up[l] as f64, up[x] as f64, up[r] as f64);
            let (ml, mr) = (mid[l] as f64, mid[r] as f64);
            let (dl, dm, dr) = (down[l] as f64, down[x] as f64, down[r] as f64);
            let sx = (ur - ul) + 2.0 * (mr - ml) + (dr - dl);
            let sy = (dl - ul) + 2.0 * (dm - um) + (dr - ur);
            let k = y * w + x;
            gx[k] = sx;
            gy[k] = sy;
            magnitude[k] = (sx * sx + sy * sy).sqrt();
        }
    }

    GradientField {
        width: d.width(),
        height: d.height(),
        gx,
        gy,
        magnitude,
    }
}

fn ratio_above(magnitude: &[f64], threshold: f64) -> f64 {
    let hits = magnitude.iter().filter(|&&g| g > threshold).count();
    hits as f64 / magnitude.len() as f64
}

/// Fraction of pixels whose gradient magnitude exceeds `tau` times the depth
/// range. The comparison is strict, so a constant map gives 0.
pub fn discontinuity_ratio(d: &DepthMap, tau: f64) -> Result<f64, StructuralError> {
    check_tau(tau)?;
    let (lo, hi) = min_max(d.values());
    let g = sobel_gradients(d);
    Ok(ratio_above(&g.magnitude, tau * (hi - lo)))
}

pub fn structural_metrics(
    d: &DepthMap,
    params: &StructuralParams,
) -> Result<StructuralResult, StructuralError> {
    params.validate()?;
    let values = d.values();
    let (lo, hi) = min_max(values);
    let sum = values.iter().fold(0.0f64, |acc, &v| acc + v as f64);
    // Rounding can put the mean a hair outside [lo, hi] on near-constant maps.
    let mean = (sum / values.len() as f64).clamp(lo, hi);
    let g = sobel_gradients(d);
    Ok(StructuralResult {
        depth_entropy: entropy_with_range(values, lo, hi, params.bins),
        depth_mean: mean,
        depth_min: lo,
        depth_max: hi,
        discontinuity_ratio: ratio_above(&g.magnitude, params.tau * (hi - lo)),
        bin_count: params.bins,
        tau: params.tau,
    })
}
