//! Property bodies shared by the proptest suites and the acceptance runner.
//! Each check returns `Err` with a description on the first violation.

use std::cell::Cell;

use mmcm::{
    consensus, depth_entropy, discontinuity_ratio, pairwise_agreement, perceptual_gap, sobel_gradients,
    trend_fit, ConsensusResult,
};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestError, TestRng, TestRunner};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::gen::{self, RawDepth, RawFrame};

pub type Check = Result<(), TestCaseError>;

fn score(f: &RawFrame) -> ConsensusResult {
    consensus(&f.to_frame()).expect("valid frame")
}

fn close(name: &str, got: f64, want: f64, tol: f64) -> Check {
    prop_assert!(
        (got - want).abs() <= tol,
        "{}: got {} want {} (tol {})",
        name,
        got,
        want,
        tol
    );
    Ok(())
}

pub fn consensus_bounds(f: &RawFrame) -> Check {
    let r = score(f);
    let tol = 1e-12;
    for row in &r.pairwise_agreement {
        for a in row.iter().flatten() {
            prop_assert!(*a >= -tol && *a <= 1.0 + tol, "pair agreement {} out of bounds", a);
        }
    }
    for (name, v) in [
        ("mean_agreement", r.mean_agreement),
        ("mean_confidence", r.mean_confidence),
        ("mmcm", r.mmcm),
    ] {
        prop_assert!(v >= -tol && v <= 1.0 + tol, "{} = {} out of bounds", name, v);
    }
    Ok(())
}

pub fn pair_symmetry(f: &RawFrame) -> Check {
    let frame = f.to_frame();
    let p = &frame.predictions;
    for i in 0..p.len() {
        for j in 0..p.len() {
            let ab = pairwise_agreement(&p[i], &p[j]).unwrap();
            let ba = pairwise_agreement(&p[j], &p[i]).unwrap();
            prop_assert_eq!(ab.to_bits(), ba.to_bits());
        }
    }
    let r = consensus(&frame).unwrap();
    for i in 0..p.len() {
        prop_assert!(r.pairwise_agreement[i][i].is_none());
        for j in 0..p.len() {
            prop_assert_eq!(r.pairwise_agreement[i][j], r.pairwise_agreement[j][i]);
        }
    }
    Ok(())
}

pub fn permutation_invariance(f: &RawFrame, seed: u64) -> Check {
    let mut order: Vec<usize> = (0..f.n_models()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let permuted = RawFrame {
        width: f.width,
        height: f.height,
        labels: order.iter().map(|&k| f.labels[k].clone()).collect(),
        conf: order.iter().map(|&k| f.conf[k].clone()).collect(),
    };
    let (a, b) = (score(f), score(&permuted));
    close("mean_agreement", b.mean_agreement, a.mean_agreement, 1e-12)?;
    close("mean_confidence", b.mean_confidence, a.mean_confidence, 1e-12)?;
    close("mmcm", b.mmcm, a.mmcm, 1e-12)
}

/// `l -> l * mult + add (mod 2^16)` is a bijection for odd `mult`.
pub fn relabel_invariance(f: &RawFrame, mult: u16, add: u16) -> Check {
    let mult = mult | 1;
    let relabeled = RawFrame {
        labels: f
            .labels
            .iter()
            .map(|l| l.iter().map(|&v| v.wrapping_mul(mult).wrapping_add(add)).collect())
            .collect(),
        ..f.clone()
    };
    prop_assert_eq!(score(f), score(&relabeled));
    Ok(())
}

/// Copies model `j`'s label into model `i` at one pixel; `A_ij` must not drop.
pub fn monotonicity(f: &RawFrame, pick: (usize, usize, usize)) -> Check {
    let n = f.n_models();
    let i = pick.0 % n;
    let j = (i + 1 + pick.1 % (n - 1)) % n;
    let p = pick.2 % (f.width * f.height);
    let mut g = f.clone();
    g.labels[i][p] = g.labels[j][p];
    let before = score(f).pairwise_agreement[i][j].unwrap();
    let after = score(&g).pairwise_agreement[i][j].unwrap();
    prop_assert!(after >= before, "A[{}][{}] fell from {} to {}", i, j, before, after);
    Ok(())
}

/// Scaling every confidence by `s = m / 256` scales pair agreements and mean
/// confidence by `s` and the score by `s^1.5`. Grid confidences keep the
/// scaled values exact in f32.
pub fn scaling_law(f: &RawFrame, m: u32) -> Check {
    let s = m as f64 / 256.0;
    let scaled = RawFrame {
        conf: f
            .conf
            .iter()
            .map(|c| c.iter().map(|&v| v * s as f32).collect())
            .collect(),
        ..f.clone()
    };
    let (a, b) = (score(f), score(&scaled));
    for (ra, rb) in a.pairwise_agreement.iter().zip(&b.pairwise_agreement) {
        for (x, y) in ra.iter().zip(rb) {
            if let (Some(x), Some(y)) = (x, y) {
                close("pair agreement", *y, s * x, 1e-9)?;
            }
        }
    }
    close("mean_confidence", b.mean_confidence, s * a.mean_confidence, 1e-9)?;
    close("mmcm", b.mmcm, s.powf(1.5) * a.mmcm, 1e-9)
}

pub fn maximality(f: &RawFrame) -> Check {
    let agree = f.labels.iter().all(|l| *l == f.labels[0]);
    let certain = f.conf.iter().flatten().all(|&c| c == 1.0);
    let r = score(f);
    prop_assert_eq!(r.mmcm == 1.0, agree && certain, "mmcm {}", r.mmcm);
    Ok(())
}

pub fn oracle_consensus(f: &RawFrame) -> Check {
    let r = score(f);
    let o = f.oracle();
    for ((i, j), a) in &o.pairs {
        close("pair agreement", r.pairwise_agreement[*i][*j].unwrap(), *a, 1e-9)?;
    }
    close("mean_agreement", r.mean_agreement, o.mean_agreement, 1e-9)?;
    close("mean_confidence", r.mean_confidence, o.mean_confidence, 1e-9)?;
    close("mmcm", r.mmcm, o.mmcm, 1e-9)
}

pub fn oracle_structural(d: &RawDepth, bins: usize, tau: f64) -> Check {
    let map = d.to_map();
    let g = sobel_gradients(&map);
    let (gx, gy, mag) = crate::oracle::sobel(d.width, d.height, &d.values);
    for k in 0..mag.len() {
        close("gx", g.gx[k], gx[k], 1e-9)?;
        close("gy", g.gy[k], gy[k], 1e-9)?;
        close("magnitude", g.magnitude[k], mag[k], 1e-9)?;
    }
    close(
        "entropy",
        depth_entropy(&map, bins).unwrap(),
        crate::oracle::entropy(&d.values, bins),
        1e-9,
    )?;
    close(
        "discontinuity ratio",
        discontinuity_ratio(&map, tau).unwrap(),
        crate::oracle::discontinuity_ratio(d.width, d.height, &d.values, tau),
        1e-9,
    )
}

pub fn gap_symmetry_bounds(a: f64, b: f64) -> Check {
    let ab = perceptual_gap(a, b).unwrap();
    let ba = perceptual_gap(b, a).unwrap();
    prop_assert_eq!(ab.to_bits(), ba.to_bits());
    prop_assert!((0.0..=1.0).contains(&ab), "gap {} out of bounds", ab);
    prop_assert_eq!(ab == 0.0, a == b, "gap {} for {} vs {}", ab, a, b);
    prop_assert_eq!(perceptual_gap(a, a).unwrap(), 0.0);
    Ok(())
}

pub fn gap_scale_covariance(a: f64, b: f64, k: f64) -> Check {
    let (ka, kb) = (a * k, b * k);
    if ka > 1.0 || kb > 1.0 {
        return Ok(());
    }
    close("scaled gap", perceptual_gap(ka, kb).unwrap(), perceptual_gap(a, b).unwrap(), 1e-12)
}

/// Integer depth, dyadic `a` and `tau`, integer `b`: every intermediate is
/// exact, so the metrics must agree to the tolerance.
pub fn affine_invariance(d: &RawDepth, a: f32, b: f32, bins: usize, tau: f64) -> Check {
    let t = d.map_values(|v| a * v + b);
    let (m0, m1) = (d.to_map(), t.to_map());
    close(
        "entropy",
        depth_entropy(&m1, bins).unwrap(),
        depth_entropy(&m0, bins).unwrap(),
        1e-9,
    )?;
    close(
        "discontinuity ratio",
        discontinuity_ratio(&m1, tau).unwrap(),
        discontinuity_ratio(&m0, tau).unwrap(),
        1e-9,
    )
}

pub fn tau_monotonicity(d: &RawDepth, t1: f64, t2: f64) -> Check {
    let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
    let m = d.to_map();
    let r_lo = discontinuity_ratio(&m, lo).unwrap();
    let r_hi = discontinuity_ratio(&m, hi).unwrap();
    prop_assert!(r_lo >= r_hi, "ratio({}) = {} < ratio({}) = {}", lo, r_lo, hi, r_hi);
    Ok(())
}

pub fn entropy_bounds(d: &RawDepth, bins: usize) -> Check {
    let h = depth_entropy(&d.to_map(), bins).unwrap();
    prop_assert!(h >= 0.0 && h <= (bins as f64).ln() + 1e-12, "entropy {} with {} bins", h, bins);
    Ok(())
}

pub fn transposition(d: &RawDepth) -> Check {
    let m = d.to_map();
    let t = m.transpose();
    let g = sobel_gradients(&m);
    let gt = sobel_gradients(&t);
    let (w, h) = (d.width, d.height);
    for y in 0..h {
        for x in 0..w {
            let k = y * w + x;
            let kt = x * h + y;
            prop_assert_eq!(gt.magnitude[kt], g.magnitude[k]);
            prop_assert_eq!(gt.gx[kt], g.gy[k]);
            prop_assert_eq!(gt.gy[kt], g.gx[k]);
        }
    }
    Ok(())
}

pub fn trend_reorder(points: &[(f64, f64)], seed: u64) -> Check {
    let base = match trend_fit(points) {
        Ok(f) => f,
        Err(_) => return Ok(()),
    };
    let mut shuffled = points.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let other = trend_fit(&shuffled).unwrap();
    close("slope", other.slope, base.slope, 1e-12)?;
    close("intercept", other.intercept, base.intercept, 1e-12)?;
    let (slope, intercept) = crate::oracle::exact_ols(points);
    close("slope vs exact", base.slope, slope, 1e-9 * slope.abs().max(1.0))?;
    close("intercept vs exact", base.intercept, intercept, 1e-9 * intercept.abs().max(1.0))
}

/// Frames biased toward the maximality boundary: labels optionally all
/// equal, confidences optionally all 1 except possibly one pixel.
pub fn near_max_frame() -> impl Strategy<Value = RawFrame> {
    (gen::grid_frame(6, 4, 4), any::<bool>(), any::<bool>(), any::<bool>()).prop_map(
        |(mut f, agree, certain, dent)| {
            if agree {
                let first = f.labels[0].clone();
                f.labels.iter_mut().for_each(|l| *l = first.clone());
            }
            if certain {
                f.conf.iter_mut().flatten().for_each(|c| *c = 1.0);
                if dent {
                    f.conf[0][0] = 4095.0 / 4096.0;
                }
            }
            f
        },
    )
}

pub fn dyadic_scale() -> impl Strategy<Value = f32> {
    (1u32..=64).prop_map(|k| k as f32 / 8.0)
}

pub fn dyadic_tau() -> impl Strategy<Value = f64> {
    (1u32..=64).prop_map(|k| k as f64 / 64.0)
}

pub fn unit_mean() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), Just(1.0), 0.0f64..=1.0]
}

pub fn trend_points() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.0f64..10.0, -5.0f64..5.0), 2..40)
}

/// Outcome of one named property run.
#[derive(Debug, Clone)]
pub struct PropertyOutcome {
    pub name: &'static str,
    pub cases: u32,
    pub failure: Option<String>,
}

fn run<S: Strategy>(
    name: &'static str,
    cases: u32,
    strategy: S,
    check: impl Fn(S::Value) -> Check,
) -> PropertyOutcome {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    let count = Cell::new(0u32);
    let result = runner.run(&strategy, |v| {
        count.set(count.get() + 1);
        check(v)
    });
    let failure = match result {
        Ok(()) => None,
        Err(TestError::Fail(reason, value)) => Some(format!("{} (input {:?})", reason, value)),
        Err(TestError::Abort(reason)) => Some(format!("aborted: {}", reason)),
    };
    PropertyOutcome {
        name,
        cases: count.get(),
        failure,
    }
}

/// Runs every invariant with a fixed seed, `cases` cases each.
pub fn run_invariant_suite(cases: u32) -> Vec<PropertyOutcome> {
    vec![
        run("mmcm bounds", cases, gen::grid_frame(12, 4, 19), |f| consensus_bounds(&f)),
        run("pair symmetry", cases, gen::grid_frame(12, 4, 19), |f| pair_symmetry(&f)),
        run(
            "model permutation invariance",
            cases,
            (gen::grid_frame(12, 4, 19), any::<u64>()),
            |(f, s)| permutation_invariance(&f, s),
        ),
        run(
            "class relabeling invariance",
            cases,
            (gen::grid_frame(12, 4, 19), any::<u16>(), any::<u16>()),
            |(f, m, a)| relabel_invariance(&f, m, a),
        ),
        run(
            "agreement monotonicity",
            cases,
            (gen::grid_frame(12, 4, 4), any::<(usize, usize, usize)>()),
            |(f, p)| monotonicity(&f, p),
        ),
        run(
            "confidence scaling law",
            cases,
            (gen::grid_frame(12, 4, 19), 1u32..=256),
            |(f, m)| scaling_law(&f, m),
        ),
        run("maximality", cases, near_max_frame(), |f| maximality(&f)),
        run(
            "gap symmetry, bounds, zero identity",
            cases,
            (unit_mean(), unit_mean()),
            |(a, b)| gap_symmetry_bounds(a, b),
        ),
        run(
            "gap scale covariance",
            cases,
            (unit_mean(), unit_mean(), 0.01f64..4.0),
            |(a, b, k)| gap_scale_covariance(a, b, k),
        ),
        run(
            "entropy and ratio affine invariance",
            cases,
            (gen::int_depth(16), dyadic_scale(), -100i32..=100, 1usize..=300, dyadic_tau()),
            |(d, a, b, bins, tau)| affine_invariance(&d, a, b as f32, bins, tau),
        ),
        run(
            "ratio monotone in tau",
            cases,
            (gen::any_depth(16), 0.001f64..2.0, 0.001f64..2.0),
            |(d, t1, t2)| tau_monotonicity(&d, t1, t2),
        ),
        run(
            "entropy bounds",
            cases,
            (gen::any_depth(16), 1usize..=512),
            |(d, bins)| entropy_bounds(&d, bins),
        ),
        run("gradient transposition", cases, gen::any_depth(16), |d| transposition(&d)),
        run(
            "trend reorder invariance",
            cases,
            (trend_points(), any::<u64>()),
            |(p, s)| trend_reorder(&p, s),
        ),
    ]
}
