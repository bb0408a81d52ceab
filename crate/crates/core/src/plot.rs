//! Static SVG 1.1 heatmaps and scatter plots.
//!
//! Heatmap cells use a five-stop gradient with monotonically increasing
//! luminance, interpolated linearly in sRGB over `[0, max entry]`:
//!
//! | t    | colour    |
//! |------|-----------|
//! | 0.00 | `#440154` |
//! | 0.25 | `#3b528b` |
//! | 0.50 | `#21918c` |
//! | 0.75 | `#5ec962` |
//! | 1.00 | `#fde725` |

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::gap::{GapMatrix, TrendFit};
use crate::report::{io_err, ReportError};

pub const COLORMAP: [(f64, [u8; 3]); 5] = [
    (0.0, [0x44, 0x01, 0x54]),
    (0.25, [0x3b, 0x52, 0x8b]),
    (0.5, [0x21, 0x91, 0x8c]),
    (0.75, [0x5e, 0xc9, 0x62]),
    (1.0, [0xfd, 0xe7, 0x25]),
];

/// Colour for `t`, clamped to `[0, 1]`.
pub fn colormap(t: f64) -> [u8; 3] {
    let t = if t.is_nan() { 0.0 } else { t.clamp(0.0, 1.0) };
    for pair in COLORMAP.windows(2) {
        let (t0, c0) = pair[0];
        let (t1, c1) = pair[1];
        if t <= t1 {
            let f = (t - t0) / (t1 - t0);
            let mut out = [0u8; 3];
            for i in 0..3 {
                out[i] = (c0[i] as f64 + f * (c1[i] as f64 - c0[i] as f64)).round() as u8;
            }
            return out;
        }
    }
    COLORMAP[4].1
}

fn hex([r, g, b]: [u8; 3]) -> String {
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// Escapes text for use in element content and attribute values.
fn esc(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn luminance([r, g, b]: [u8; 3]) -> f64 {
    0.2126 * r as f64 + 0.7152 * g as f64 + 0.0722 * b as f64
}

const CELL_W: f64 = 56.0;
const CELL_H: f64 = 32.0;

pub fn heatmap_svg(matrix: &GapMatrix, title: &str) -> String {
    let rows = matrix.row_ids.len();
    let cols = matrix.col_ids.len();
    let label_chars = |ids: &[String]| ids.iter().map(|s| s.chars().count()).max().unwrap_or(0) as f64;
    let left = 16.0 + 7.0 * label_chars(&matrix.row_ids);
    let top = 48.0 + 5.0 * label_chars(&matrix.col_ids);
    let grid_w = CELL_W * cols as f64;
    let grid_h = CELL_H * rows as f64;
    let legend_x = left + grid_w + 24.0;
    let width = legend_x + 90.0;
    let height = (top + grid_h + 24.0).max(top + 160.0);
    let max = matrix.max_value();

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif">"#
    );
    let _ = writeln!(s, r#"<defs><linearGradient id="legend-gradient" x1="0" y1="1" x2="0" y2="0">"#);
    for (t, c) in COLORMAP {
        let _ = writeln!(s, r#"<stop offset="{t}" stop-color="{}"/>"#, hex(c));
    }
    let _ = writeln!(s, "</linearGradient></defs>");
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text class="title" x="{left:.2}" y="20" font-size="14">{}</text>"#, esc(title));

    for (c, id) in matrix.col_ids.iter().enumerate() {
        let x = left + CELL_W * (c as f64 + 0.5);
        let y = top - 6.0;
        let _ = writeln!(
            s,
            r#"<text class="col-label" x="{x:.2}" y="{y:.2}" font-size="11" transform="rotate(-45 {x:.2} {y:.2})">{}</text>"#,
            esc(id)
        );
    }
    for (r, id) in matrix.row_ids.iter().enumerate() {
        let y = top + CELL_H * (r as f64 + 0.5) + 4.0;
        let _ = writeln!(
            s,
            r#"<text class="row-label" x="{:.2}" y="{y:.2}" font-size="11" text-anchor="end">{}</text>"#,
            left - 6.0,
            esc(id)
        );
    }
    for (r, row) in matrix.values.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            let color = colormap(if max > 0.0 { v / max } else { 0.0 });
            let x = left + CELL_W * c as f64;
            let y = top + CELL_H * r as f64;
            let ink = if luminance(color) > 140.0 { "black" } else { "white" };
            let _ = writeln!(
                s,
                r#"<rect class="cell" x="{x:.2}" y="{y:.2}" width="{CELL_W}" height="{CELL_H}" fill="{}" stroke="white"/>"#,
                hex(color)
            );
            let _ = writeln!(
                s,
                r#"<text class="cell-value" x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle" fill="{ink}">{v:.3}</text>"#,
                x + CELL_W / 2.0,
                y + CELL_H / 2.0 + 4.0
            );
        }
    }

    let bar_h = 120.0;
    let _ = writeln!(
        s,
        r#"<g class="legend"><rect x="{legend_x:.2}" y="{top:.2}" width="16" height="{bar_h}" fill="url(#legend-gradient)" stroke="black" stroke-width="0.5"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text class="legend-max" x="{:.2}" y="{:.2}" font-size="11">{max:.3}</text>"#,
        legend_x + 22.0,
        top + 10.0
    );
    let _ = writeln!(
        s,
        r#"<text class="legend-min" x="{:.2}" y="{:.2}" font-size="11">0.000</text></g>"#,
        legend_x + 22.0,
        top + bar_h
    );
    s.push_str("</svg>\n");
    s
}

pub fn render_heatmap(matrix: &GapMatrix, title: &str, path: &Path) -> Result<(), ReportError> {
    fs::write(path, heatmap_svg(matrix, title)).map_err(io_err(path))
}

/// One coloured group of points with its own optional trend line.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterSeries {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub fit: Option<TrendFit>,
}

const SERIES_COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

pub const PLOT_W: f64 = 640.0;
pub const PLOT_H: f64 = 440.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 150.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 55.0;

fn padded_range(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    if lo == hi {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        (lo - pad, hi + pad)
    } else {
        let pad = (hi - lo) * 0.05;
        (lo - pad, hi + pad)
    }
}

/// Maps data coordinates to SVG user units for a fixed plot frame.
#[derive(Debug, Clone, Copy)]
pub struct Frame {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl Frame {
    pub fn fit(series: &[ScatterSeries]) -> Self {
        let pts = series.iter().flat_map(|s| &s.points);
        let (mut xl, mut xh, mut yl, mut yh) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in pts {
            xl = xl.min(x);
            xh = xh.max(x);
            yl = yl.min(y);
            yh = yh.max(y);
        }
        Frame {
            x: padded_range(xl, xh),
            y: padded_range(yl, yh),
        }
    }

    pub fn px(&self, x: f64) -> f64 {
        MARGIN_L + (x - self.x.0) / (self.x.1 - self.x.0) * (PLOT_W - MARGIN_L - MARGIN_R)
    }

    pub fn py(&self, y: f64) -> f64 {
        PLOT_H - MARGIN_B - (y - self.y.0) / (self.y.1 - self.y.0) * (PLOT_H - MARGIN_T - MARGIN_B)
    }
}

pub fn scatter_svg(series: &[ScatterSeries], x_label: &str, y_label: &str) -> String {
    let frame = Frame::fit(series);
    let (x0, x1) = (MARGIN_L, PLOT_W - MARGIN_R);
    let (y0, y1) = (PLOT_H - MARGIN_B, MARGIN_T);

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{PLOT_W}" height="{PLOT_H}" viewBox="0 0 {PLOT_W} {PLOT_H}" font-family="sans-serif">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path class="axes" d="M{x0:.2},{y1:.2} L{x0:.2},{y0:.2} L{x1:.2},{y0:.2}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let xv = frame.x.0 + f * (frame.x.1 - frame.x.0);
        let yv = frame.y.0 + f * (frame.y.1 - frame.y.0);
        let (px, py) = (frame.px(xv), frame.py(yv));
        let _ = writeln!(
            s,
            r#"<line class="tick" x1="{px:.2}" y1="{y0:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text class="tick-label" x="{px:.2}" y="{:.2}" font-size="10" text-anchor="middle">{}</text>"#,
            y0 + 4.0,
            y0 + 16.0,
            tick(xv)
        );
        let _ = writeln!(
            s,
            r#"<line class="tick" x1="{:.2}" y1="{py:.2}" x2="{x0:.2}" y2="{py:.2}" stroke="black"/><text class="tick-label" x="{:.2}" y="{:.2}" font-size="10" text-anchor="end">{}</text>"#,
            x0 - 4.0,
            x0 - 6.0,
            py + 3.0,
            tick(yv)
        );
    }
    let _ = writeln!(
        s,
        r#"<text class="x-label" x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        PLOT_H - 12.0,
        esc(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text class="y-label" x="16" y="{:.2}" font-size="12" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        esc(y_label)
    );

    for (k, ser) in series.iter().enumerate() {
        let color = SERIES_COLORS[k % SERIES_COLORS.len()];
        let _ = writeln!(s, r#"<g class="series" data-label="{}">"#, esc(&ser.label));
        for &(x, y) in &ser.points {
            let _ = writeln!(
                s,
                r#"<circle class="point" cx="{:.2}" cy="{:.2}" r="3" fill="{color}" fill-opacity="0.7"/>"#,
                frame.px(x),
                frame.py(y)
            );
        }
        if let Some(fit) = &ser.fit {
            let lo = ser.points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
            let hi = ser.points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
            let _ = writeln!(
                s,
                r#"<line class="trend" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="1.5" stroke-dasharray="2 4"/>"#,
                frame.px(lo),
                frame.py(fit.predict(lo)),
                frame.px(hi),
                frame.py(fit.predict(hi))
            );
        }
        let _ = writeln!(s, "</g>");

        let ly = MARGIN_T + 10.0 + 20.0 * k as f64;
        let lx = PLOT_W - MARGIN_R + 16.0;
        let _ = writeln!(
            s,
            r#"<g class="legend-entry"><circle cx="{lx:.2}" cy="{ly:.2}" r="4" fill="{color}"/><text x="{:.2}" y="{:.2}" font-size="11">{}</text></g>"#,
            lx + 10.0,
            ly + 4.0,
            esc(&ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn tick(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e5).contains(&a) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

pub fn render_scatter(
    series: &[ScatterSeries],
    x_label: &str,
    y_label: &str,
    path: &Path,
) -> Result<(), ReportError> {
    fs::write(path, scatter_svg(series, x_label, y_label)).map_err(io_err(path))
}
