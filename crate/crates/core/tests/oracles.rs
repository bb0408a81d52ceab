use mmcm::{
    aggregate_gaps, consensus, depth_entropy, discontinuity_ratio, gap_matrix, group_mean, perceptual_gap,
    sobel_gradients, structural_metrics, trend_fit, DepthMap, EnsembleFrame, StructuralParams,
};
use mmcm_testkit::gen::{self, prediction, RawDepth};
use mmcm_testkit::{oracle, props};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const REAL: [(&str, f64); 10] = [
    ("Atanasie", 0.6953),
    ("Barsana", 0.7201),
    ("Comana", 0.6879),
    ("Gradistei", 0.7761),
    ("Herculane", 0.6765),
    ("Jupiter", 0.6229),
    ("Norce", 0.7516),
    ("Olanesti", 0.5869),
    ("Petrova", 0.7256),
    ("Slanic", 0.6827),
];

const SYNTH: [(&str, f64); 8] = [
    ("Town01", 0.5504),
    ("Town02", 0.7274),
    ("Town03", 0.6108),
    ("Town04", 0.4857),
    ("Town05", 0.4852),
    ("Town06", 0.4877),
    ("Town07", 0.5446),
    ("Town10HD", 0.6624),
];

fn sets(rows: &[(&str, f64)]) -> Vec<mmcm::ScoreSet> {
    rows.iter()
        .map(|(id, m)| group_mean(*id, vec![("f".to_string(), *m)]).unwrap())
        .collect()
}

#[test]
fn two_by_two_hand_example() {
    let a = prediction(2, 2, vec![1, 1, 2, 2], vec![1.0; 4]);
    let b = prediction(2, 2, vec![1, 1, 2, 3], vec![0.64, 0.64, 0.64, 0.64]);
    let frame = EnsembleFrame {
        frame_id: "x".into(),
        predictions: vec![a, b],
        depth: None,
    };
    let r = consensus(&frame).unwrap();
    let o = oracle::consensus(
        2,
        2,
        &[vec![1, 1, 2, 2], vec![1, 1, 2, 3]],
        &[vec![1.0; 4], vec![0.64f32; 4]],
    );
    assert!((r.mmcm - o.mmcm).abs() <= 1e-9);
    // 0.64 is not exact in f32; the hand values hold to storage precision.
    assert!((r.mean_agreement - 0.6).abs() < 1e-7);
    assert!((r.mean_confidence - 0.82).abs() < 1e-7);
    assert!((r.mmcm - 0.6 * 0.82f64.sqrt()).abs() < 1e-7);
}

#[test]
fn random_frames_match_pixel_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let f = gen::random_frame(&mut rng, 16, 4, 19);
        props::oracle_consensus(&f).unwrap();
    }
}

#[test]
fn random_depth_maps_match_window_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..200 {
        let d = gen::random_depth(&mut rng, 32);
        let bins = rng.gen_range(1..=256);
        let tau = rng.gen_range(0.01..1.0);
        props::oracle_structural(&d, bins, tau).unwrap();
    }
}

fn columns_0011() -> DepthMap {
    let row = [0.0f32, 0.0, 1.0, 1.0];
    DepthMap::new(4, 4, row.iter().cycle().take(16).copied().collect()).unwrap()
}

#[test]
fn step_edge_hand_case() {
    let d = columns_0011();
    let g = sobel_gradients(&d);
    let (gx, _, mag) = oracle::sobel(4, 4, d.values());
    assert_eq!(g.gx, gx);
    assert_eq!(g.magnitude, mag);
    // Columns 1 and 2 see the edge with weight 4, the outer columns see none.
    for y in 0..4 {
        assert_eq!(&g.gx[y * 4..y * 4 + 4], &[0.0, 4.0, 4.0, 0.0]);
    }
    assert!(g.gy.iter().all(|&v| v == 0.0));
    assert!((discontinuity_ratio(&d, 0.1).unwrap() - 0.5).abs() <= 1e-9);
    assert!((depth_entropy(&d, 256).unwrap() - std::f64::consts::LN_2).abs() <= 1e-9);
}

#[test]
fn transposed_step_edge_swaps_axes() {
    let d = columns_0011().transpose();
    let g = sobel_gradients(&d);
    assert!(g.gx.iter().all(|&v| v == 0.0));
    for y in 0..4 {
        let expect = if y == 1 || y == 2 { 4.0 } else { 0.0 };
        assert!(g.gy[y * 4..y * 4 + 4].iter().all(|&v| v == expect));
    }
    assert_eq!(discontinuity_ratio(&d, 0.1).unwrap(), 0.5);
}

#[test]
fn constant_and_single_pixel_maps() {
    let c = DepthMap::new(5, 3, vec![7.5; 15]).unwrap();
    let r = structural_metrics(&c, &StructuralParams::default()).unwrap();
    assert_eq!(r.depth_entropy, 0.0);
    assert_eq!(r.discontinuity_ratio, 0.0);
    assert_eq!(r.depth_mean, 7.5);
    let one = DepthMap::new(1, 1, vec![3.0]).unwrap();
    let r = structural_metrics(&one, &StructuralParams::default()).unwrap();
    assert_eq!((r.depth_entropy, r.discontinuity_ratio), (0.0, 0.0));
}

#[test]
fn uniform_histogram_reaches_log_bins() {
    let values: Vec<f32> = (0..256).map(|v| v as f32).collect();
    let d = RawDepth {
        width: 16,
        height: 16,
        values,
    };
    let h = depth_entropy(&d.to_map(), 256).unwrap();
    assert!((h - 256f64.ln()).abs() <= 1e-9);
    assert!((h - oracle::entropy(&d.values, 256)).abs() <= 1e-12);
}

#[test]
fn dataset_level_gap_of_reported_means() {
    let g = perceptual_gap(0.6926, 0.5693).unwrap();
    assert!((g - 0.178025).abs() <= 1e-6, "{g}");
}

#[test]
fn reported_scene_means_average_to_dataset_means() {
    let real = REAL.iter().map(|r| r.1).sum::<f64>() / REAL.len() as f64;
    let synth = SYNTH.iter().map(|r| r.1).sum::<f64>() / SYNTH.len() as f64;
    assert!((real - 0.6926).abs() < 5e-5, "{real}");
    assert!((synth - 0.5693).abs() < 5e-5, "{synth}");
}

#[test]
fn reported_pairwise_gaps() {
    let m = gap_matrix(&sets(&REAL), &sets(&SYNTH)).unwrap();
    let at = |r: &str, c: &str| {
        let i = m.row_ids.iter().position(|x| x == r).unwrap();
        let j = m.col_ids.iter().position(|x| x == c).unwrap();
        m.values[i][j]
    };
    assert!((at("Petrova", "Town02") - 0.0025).abs() < 5e-5);
    assert!((at("Herculane", "Town10HD") - 0.0208).abs() < 5e-5);
    assert!((at("Olanesti", "Town01") - 0.0622).abs() < 5e-5);
    // Town04-06 against Gradistei span the 30-37% band.
    for t in ["Town04", "Town05", "Town06"] {
        let v = at("Gradistei", t);
        assert!((0.30..=0.375).contains(&v), "{t}: {v}");
    }
}

#[test]
fn reported_aggregate_ordering() {
    let real = aggregate_gaps(&gap_matrix(&sets(&REAL), &sets(&SYNTH)).unwrap());
    assert_eq!(real.first().unwrap().group_id, "Gradistei");
    assert!((real[0].mean_gap - 0.27).abs() < 0.01);
    assert_eq!(real.last().unwrap().group_id, "Olanesti");
    assert!((real.last().unwrap().mean_gap - 0.12).abs() < 0.01);

    let synth = aggregate_gaps(&gap_matrix(&sets(&SYNTH), &sets(&REAL)).unwrap());
    let top: Vec<&str> = synth[..3].iter().map(|g| g.group_id.as_str()).collect();
    for t in ["Town04", "Town05", "Town06"] {
        assert!(top.contains(&t), "{top:?}");
    }
    for g in &synth[..3] {
        assert!((g.mean_gap - 0.29).abs() < 0.01, "{g:?}");
    }
    let bottom: Vec<&str> = synth[6..].iter().map(|g| g.group_id.as_str()).collect();
    assert!(bottom.contains(&"Town02") && bottom.contains(&"Town10HD"), "{bottom:?}");
    for g in &synth[6..] {
        assert!((g.mean_gap - 0.07).abs() < 0.015, "{g:?}");
    }
}

#[test]
fn trend_matches_exact_least_squares() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let pts: Vec<(f64, f64)> = (0..100)
        .map(|_| {
            let x = rng.gen_range(2.5..4.0);
            (x, 0.3 * x - 0.2 + rng.gen_range(-0.1..0.1))
        })
        .collect();
    let fit = trend_fit(&pts).unwrap();
    let (slope, intercept) = oracle::exact_ols(&pts);
    assert!((fit.slope - slope).abs() <= 1e-9);
    assert!((fit.intercept - intercept).abs() <= 1e-9);
    assert_eq!(fit.n, 100);
}

#[test]
fn trend_exact_lines() {
    let up = trend_fit(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)]).unwrap();
    assert_eq!((up.slope, up.intercept, up.pearson_r), (1.0, 0.0, 1.0));
    let down = trend_fit(&[(0.0, 1.0), (1.0, 0.0)]).unwrap();
    assert_eq!((down.slope, down.intercept, down.pearson_r), (-1.0, 1.0, -1.0));
}
