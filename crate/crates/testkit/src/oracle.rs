//! Naive reference implementations. Each works on raw slices with explicit
//! `(x, y)` indexing and shares no code with the library.

use num::{BigInt, BigRational, ToPrimitive, Zero};

/// Result of the brute-force consensus evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct NaiveConsensus {
    pub pairs: Vec<((usize, usize), f64)>,
    pub mean_agreement: f64,
    pub mean_confidence: f64,
    pub mmcm: f64,
}

/// Direct evaluation of the weighted agreement of every pair, the mean
/// confidence and the consensus score.
pub fn consensus(width: usize, height: usize, labels: &[Vec<u16>], conf: &[Vec<f32>]) -> NaiveConsensus {
    let n = labels.len();
    let area = (width * height) as f64;
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let mut total = 0.0f64;
            for y in 0..height {
                for x in 0..width {
                    let p = y * width + x;
                    if labels[i][p] == labels[j][p] {
                        total += (conf[i][p] as f64).sqrt() * (conf[j][p] as f64).sqrt();
                    }
                }
            }
            pairs.push(((i, j), total / area));
        }
    }
    let mean_agreement = pairs.iter().map(|(_, a)| a).sum::<f64>() * 2.0 / (n * (n - 1)) as f64;
    let mut mean_confidence = 0.0;
    for c in conf {
        let mut s = 0.0f64;
        for y in 0..height {
            for x in 0..width {
                s += c[y * width + x] as f64;
            }
        }
        mean_confidence += s / area;
    }
    mean_confidence /= n as f64;
    NaiveConsensus {
        pairs,
        mean_agreement,
        mean_confidence,
        mmcm: mean_agreement * mean_confidence.sqrt(),
    }
}

const SOBEL_X: [[f64; 3]; 3] = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
const SOBEL_Y: [[f64; 3]; 3] = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]];

/// 3x3 window sums with indices clamped to the raster.
pub fn sobel(width: usize, height: usize, d: &[f32]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let at = |x: isize, y: isize| {
        let xc = x.clamp(0, width as isize - 1) as usize;
        let yc = y.clamp(0, height as isize - 1) as usize;
        d[yc * width + xc] as f64
    };
    let mut gx = Vec::with_capacity(d.len());
    let mut gy = Vec::with_capacity(d.len());
    let mut mag = Vec::with_capacity(d.len());
    for y in 0..height as isize {
        for x in 0..width as isize {
            let mut sx = 0.0;
            let mut sy = 0.0;
            for ky in 0..3 {
                for kx in 0..3 {
                    let v = at(x + kx as isize - 1, y + ky as isize - 1);
                    sx += SOBEL_X[ky][kx] * v;
                    sy += SOBEL_Y[ky][kx] * v;
                }
            }
            gx.push(sx);
            gy.push(sy);
            mag.push((sx * sx + sy * sy).sqrt());
        }
    }
    (gx, gy, mag)
}

/// Histogram entropy (nats). Bins are located by scanning edges rather than
/// by direct index arithmetic; the top edge belongs to the last bin.
pub fn entropy(d: &[f32], bins: usize) -> f64 {
    let lo = d.iter().map(|&v| v as f64).fold(f64::INFINITY, f64::min);
    let hi = d.iter().map(|&v| v as f64).fold(f64::NEG_INFINITY, f64::max);
    if hi == lo {
        return 0.0;
    }
    let mut counts = vec![0usize; bins];
    for &v in d {
        let pos = (v as f64 - lo) / (hi - lo) * bins as f64;
        let mut bin = bins - 1;
        for b in 0..bins {
            if pos < (b + 1) as f64 {
                bin = b;
                break;
            }
        }
        counts[bin] += 1;
    }
    let total = d.len() as f64;
    let mut h = 0.0;
    for c in counts {
        if c > 0 {
            let p = c as f64 / total;
            h -= p * p.ln();
        }
    }
    h.max(0.0)
}

pub fn discontinuity_ratio(width: usize, height: usize, d: &[f32], tau: f64) -> f64 {
    let lo = d.iter().map(|&v| v as f64).fold(f64::INFINITY, f64::min);
    let hi = d.iter().map(|&v| v as f64).fold(f64::NEG_INFINITY, f64::max);
    let (_, _, mag) = sobel(width, height, d);
    let mut hits = 0usize;
    for g in mag {
        if g > tau * (hi - lo) {
            hits += 1;
        }
    }
    hits as f64 / d.len() as f64
}

fn exact(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite")
}

/// Least-squares line from the normal equations in exact rational
/// arithmetic, rounded to f64 only at the end.
pub fn exact_ols(points: &[(f64, f64)]) -> (f64, f64) {
    let n = BigRational::from_integer(BigInt::from(points.len()));
    let mut sx = BigRational::zero();
    let mut sy = BigRational::zero();
    let mut sxx = BigRational::zero();
    let mut sxy = BigRational::zero();
    for &(x, y) in points {
        let (x, y) = (exact(x), exact(y));
        sx += &x;
        sy += &y;
        sxx += &x * &x;
        sxy += &x * &y;
    }
    let denom = &n * &sxx - &sx * &sx;
    let slope = (&n * &sxy - &sx * &sy) / &denom;
    let intercept = (&sy - &slope * &sx) / &n;
    (slope.to_f64().unwrap(), intercept.to_f64().unwrap())
}
