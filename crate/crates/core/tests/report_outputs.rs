use std::fs;
use std::path::Path;

use mmcm::analysis::{default_gap_sections, gap_section, trend_sections, Level, TrendMetric};
use mmcm::plot::{heatmap_svg, scatter_svg, ScatterSeries};
use mmcm::report::{emit_csv, emit_json, read_frame_scores, to_json_string, ReportBundle};
use mmcm::synthgen::{generate, DepthPattern, SynthSpec};
use mmcm::{gap_matrix, group_mean, load_manifest, score_corpus, trend_fit, CorpusScores, GapMatrix, StructuralParams};
use tempfile::TempDir;

fn corpus(dir: &Path, depth: DepthPattern, scenes: usize, frames: usize) -> CorpusScores {
    let mut s = SynthSpec::new(4, 4, 2, 0.75, 0.64, depth, 3);
    s.scenes = scenes;
    s.frames_per_scene = frames;
    generate(&s, dir).unwrap();
    let m = load_manifest(dir.join("manifest.json")).unwrap();
    score_corpus(&m, &StructuralParams::default(), 1).unwrap()
}

fn bundle(scores: &CorpusScores) -> ReportBundle {
    let trends = TrendMetric::ALL
        .iter()
        .flat_map(|&m| trend_sections(scores, m))
        .collect();
    ReportBundle::new(
        scores,
        vec!["model0".into(), "model1".into()],
        &StructuralParams::default(),
        "0".repeat(64),
        "2026-01-01T00:00:00Z".into(),
        default_gap_sections(scores),
        trends,
    )
}

fn svg_doc(text: &str) -> roxmltree::Document<'_> {
    roxmltree::Document::parse(text).expect("well-formed svg")
}

fn count_class(doc: &roxmltree::Document<'_>, class: &str) -> usize {
    doc.descendants().filter(|n| n.attribute("class") == Some(class)).count()
}

fn matrix(rows: &[(&str, f64)], cols: &[(&str, f64)]) -> GapMatrix {
    let sets = |v: &[(&str, f64)]| -> Vec<_> {
        v.iter()
            .map(|(id, m)| group_mean(*id, vec![("f".into(), *m)]).unwrap())
            .collect()
    };
    gap_matrix(&sets(rows), &sets(cols)).unwrap()
}

#[test]
fn single_frame_csv_has_header_and_one_row() {
    let tmp = TempDir::new().unwrap();
    let scores = corpus(&tmp.path().join("c"), DepthPattern::StepEdge, 1, 1);
    let out = tmp.path().join("out");
    emit_csv(&bundle(&scores), &out).unwrap();
    let text = fs::read_to_string(out.join("frame_scores.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(
        lines[0],
        "dataset_id,scene_id,frame_id,mmcm,mean_agreement,mean_confidence,depth_entropy,depth_mean,discontinuity_ratio"
    );
    assert!(lines[1].starts_with("synth,scene000,frame0000,0.384000,"), "{}", lines[1]);
    assert!(lines[1].ends_with(",0.693147,0.500000,0.500000"), "{}", lines[1]);
    assert!(!text.contains('\r'));
}

#[test]
fn frames_without_depth_leave_structural_cells_empty() {
    let tmp = TempDir::new().unwrap();
    let scores = corpus(&tmp.path().join("c"), DepthPattern::None, 1, 2);
    let out = tmp.path().join("out");
    emit_csv(&bundle(&scores), &out).unwrap();
    let text = fs::read_to_string(out.join("frame_scores.csv")).unwrap();
    for line in text.lines().skip(1) {
        assert!(line.ends_with(",,,"), "{line}");
    }
    let rows = read_frame_scores(&out.join("frame_scores.csv")).unwrap();
    assert!(rows.iter().all(|r| r.depth_entropy.is_none() && r.discontinuity_ratio.is_none()));
    assert_eq!(rows.len(), 2);
}

#[test]
fn json_round_trips_and_has_no_nan() {
    let tmp = TempDir::new().unwrap();
    let scores = corpus(&tmp.path().join("c"), DepthPattern::UniformRandom, 3, 2);
    let b = bundle(&scores);
    let path = tmp.path().join("run.json");
    emit_json(&b, &path).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    assert!(!text.contains("NaN"));
    let back: ReportBundle = serde_json::from_str(&text).unwrap();
    assert_eq!(back, b);
    assert_eq!(to_json_string(&back).unwrap(), text);
}

#[test]
fn identical_bundles_give_identical_bytes() {
    let tmp = TempDir::new().unwrap();
    let scores = corpus(&tmp.path().join("c"), DepthPattern::GradientRamp, 2, 3);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    emit_csv(&bundle(&scores), &a).unwrap();
    emit_csv(&bundle(&scores), &b).unwrap();
    for entry in fs::read_dir(&a).unwrap() {
        let name = entry.unwrap().file_name();
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap());
    }
}

#[test]
fn single_group_has_no_default_gaps() {
    let tmp = TempDir::new().unwrap();
    let scores = corpus(&tmp.path().join("c"), DepthPattern::None, 1, 3);
    assert!(default_gap_sections(&scores).is_empty());
    let s = gap_section(&scores, &["synth".into()], &["synth".into()], Level::Scene).unwrap();
    assert_eq!(s.matrix.values, vec![vec![0.0]]);
    assert_eq!(s.ranking[0].mean_gap, 0.0);
}

#[test]
fn intra_scene_matrix_for_multi_scene_dataset() {
    let tmp = TempDir::new().unwrap();
    let scores = corpus(&tmp.path().join("c"), DepthPattern::None, 3, 1);
    let sections = default_gap_sections(&scores);
    assert_eq!(sections.len(), 1);
    let m = &sections[0].matrix;
    assert_eq!(m.row_ids, vec!["scene000", "scene001", "scene002"]);
    assert!(m.values.iter().flatten().all(|&v| v == 0.0));
}

#[test]
fn heatmap_is_well_formed() {
    let m = matrix(&[("a", 0.8), ("b<&>", 0.4)], &[("c", 0.5)]);
    let svg = heatmap_svg(&m, "gap \"title\"");
    let doc = svg_doc(&svg);
    assert_eq!(count_class(&doc, "cell"), 2);
    assert_eq!(count_class(&doc, "row-label") + count_class(&doc, "col-label"), 3);
}

#[test]
fn one_by_one_heatmap() {
    let m = matrix(&[("only", 0.5)], &[("only", 0.5)]);
    let svg = heatmap_svg(&m, "t");
    let doc = svg_doc(&svg);
    assert_eq!(count_class(&doc, "cell"), 1);
    let v = doc.descendants().find(|n| n.attribute("class") == Some("cell-value")).unwrap();
    assert_eq!(v.text(), Some("0.000"));
}

#[test]
fn zero_matrix_legend_tops_at_zero() {
    let m = matrix(&[("a", 0.3), ("b", 0.3)], &[("a", 0.3), ("b", 0.3)]);
    let svg = heatmap_svg(&m, "zeros");
    let doc = svg_doc(&svg);
    let max = doc.descendants().find(|n| n.attribute("class") == Some("legend-max")).unwrap();
    assert_eq!(max.text(), Some("0.000"));
}

#[test]
fn ten_by_eight_heatmap_counts() {
    let rows: Vec<(String, f64)> = (0..10).map(|i| (format!("real{i}"), 0.5 + i as f64 * 0.03)).collect();
    let cols: Vec<(String, f64)> = (0..8).map(|i| (format!("Town{i:02}"), 0.45 + i as f64 * 0.03)).collect();
    let r: Vec<(&str, f64)> = rows.iter().map(|(a, b)| (a.as_str(), *b)).collect();
    let c: Vec<(&str, f64)> = cols.iter().map(|(a, b)| (a.as_str(), *b)).collect();
    let doc_text = heatmap_svg(&matrix(&r, &c), "real vs synthetic");
    let doc = svg_doc(&doc_text);
    assert_eq!(count_class(&doc, "cell"), 80);
    assert_eq!(count_class(&doc, "cell-value"), 80);
    assert_eq!(count_class(&doc, "row-label") + count_class(&doc, "col-label"), 18);
}

fn num(n: &roxmltree::Node<'_, '_>, a: &str) -> f64 {
    n.attribute(a).unwrap().parse().unwrap()
}

#[test]
fn collinear_points_lie_on_trend_line() {
    let pts = vec![(1.0, 0.2), (2.0, 0.4), (3.0, 0.6)];
    let fit = trend_fit(&pts).unwrap();
    let svg = scatter_svg(
        &[ScatterSeries {
            label: "real".into(),
            points: pts,
            fit: Some(fit),
        }],
        "entropy",
        "mmcm",
    );
    let doc = svg_doc(&svg);
    let line = doc.descendants().find(|n| n.attribute("class") == Some("trend")).unwrap();
    let (x1, y1, x2, y2) = (num(&line, "x1"), num(&line, "y1"), num(&line, "x2"), num(&line, "y2"));
    let len = ((x2 - x1).powi(2) + (y2 - y1).powi(2)).sqrt();
    let points: Vec<_> = doc.descendants().filter(|n| n.attribute("class") == Some("point")).collect();
    assert_eq!(points.len(), 3);
    for p in points {
        let (cx, cy) = (num(&p, "cx"), num(&p, "cy"));
        let dist = ((x2 - x1) * (y1 - cy) - (x1 - cx) * (y2 - y1)).abs() / len;
        assert!(dist < 0.02, "point off line by {dist}");
    }
}

#[test]
fn single_point_has_no_trend_line() {
    let svg = scatter_svg(
        &[ScatterSeries {
            label: "real".into(),
            points: vec![(1.0, 0.5)],
            fit: None,
        }],
        "x",
        "y",
    );
    let doc = svg_doc(&svg);
    assert_eq!(count_class(&doc, "point"), 1);
    assert_eq!(count_class(&doc, "trend"), 0);
}

#[test]
fn two_domains_two_legend_entries() {
    let series = [
        ScatterSeries {
            label: "real".into(),
            points: vec![(1.0, 0.5), (2.0, 0.7)],
            fit: trend_fit(&[(1.0, 0.5), (2.0, 0.7)]).ok(),
        },
        ScatterSeries {
            label: "synthetic".into(),
            points: vec![(1.5, 0.4), (2.5, 0.3)],
            fit: trend_fit(&[(1.5, 0.4), (2.5, 0.3)]).ok(),
        },
    ];
    let doc_text = scatter_svg(&series, "x", "y");
    let doc = svg_doc(&doc_text);
    assert_eq!(count_class(&doc, "legend-entry"), 2);
    assert_eq!(count_class(&doc, "trend"), 2);
}
