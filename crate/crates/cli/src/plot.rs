//! Self-contained SVG charts of trajectories, one panel per angle.

use std::fmt::Write;

use blurcam::{Error, Result, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesStyle {
    Line,
    Dashed,
    Markers,
}

pub struct Series<'a> {
    pub label: &'a str,
    pub traj: &'a Trajectory,
    pub style: SeriesStyle,
    pub color: &'a str,
}

const PANEL_W: f64 = 720.0;
const PANEL_H: f64 = 180.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const GAP: f64 = 40.0;
const AXES: [&str; 3] = ["pitch α (rad)", "yaw β (rad)", "roll γ (rad)"];

fn range(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    values.fold(None, |acc, v| match acc {
        None => Some((v, v)),
        Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
    })
}

/// Widen a degenerate or near-degenerate range so it can be drawn.
fn padded(lo: f64, hi: f64) -> (f64, f64) {
    let span = hi - lo;
    if span <= 1e-15 * lo.abs().max(hi.abs()).max(1.0) {
        let pad = if lo == 0.0 { 1e-6 } else { lo.abs() * 0.1 };
        (lo - pad, hi + pad)
    } else {
        (lo - 0.05 * span, hi + 0.05 * span)
    }
}

pub fn render_svg(title: &str, series: &[Series]) -> Result<String> {
    if series.is_empty() || series.iter().all(|s| s.traj.is_empty()) {
        return Err(Error::Data("nothing to plot".into()));
    }
    let (t_lo, t_hi) = range(series.iter().flat_map(|s| s.traj.times())).expect("non-empty");
    let (t_lo, t_hi) = if t_hi > t_lo {
        (t_lo, t_hi)
    } else {
        (t_lo - 1.0, t_hi + 1.0)
    };
    let width = LEFT + PANEL_W + RIGHT;
    let height = TOP + 3.0 * (PANEL_H + GAP) + 30.0;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="22" font-size="15" text-anchor="middle">{}</text>"#,
        width / 2.0,
        escape(title)
    );

    for axis in 0..3 {
        let top = TOP + axis as f64 * (PANEL_H + GAP);
        let (lo, hi) = range(
            series
                .iter()
                .flat_map(|s| s.traj.samples().iter().map(move |p| p.as_array()[axis])),
        )
        .expect("non-empty");
        let (lo, hi) = padded(lo, hi);
        let px = |t: f64| LEFT + (t - t_lo) / (t_hi - t_lo) * PANEL_W;
        let py = |v: f64| top + (hi - v) / (hi - lo) * PANEL_H;
        let _ = writeln!(
            svg,
            r##"<g class="panel" id="axis-{axis}"><rect x="{LEFT}" y="{top}" width="{PANEL_W}" height="{PANEL_H}" fill="none" stroke="#444"/>"##
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="start">{}</text>"#,
            LEFT,
            top - 6.0,
            AXES[axis]
        );
        for (v, anchor) in [(hi, "hanging"), (lo, "auto")] {
            let _ = writeln!(
                svg,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end" dominant-baseline="{anchor}">{:.2e}</text>"#,
                LEFT - 6.0,
                py(v),
                v
            );
        }
        for s in series {
            let pts: Vec<(f64, f64)> = s
                .traj
                .samples()
                .iter()
                .map(|p| (px(p.t_ms), py(p.as_array()[axis])))
                .collect();
            match s.style {
                SeriesStyle::Markers => {
                    let _ = write!(
                        svg,
                        r#"<g fill="{}" data-series="{}">"#,
                        s.color,
                        escape(s.label)
                    );
                    for (x, y) in &pts {
                        let _ = write!(svg, r#"<circle cx="{x:.2}" cy="{y:.2}" r="2.5"/>"#);
                    }
                    let _ = writeln!(svg, "</g>");
                }
                SeriesStyle::Line | SeriesStyle::Dashed => {
                    let dash = if s.style == SeriesStyle::Dashed {
                        r#" stroke-dasharray="5,3""#
                    } else {
                        ""
                    };
                    let path: Vec<String> =
                        pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
                    let _ = writeln!(
                        svg,
                        r#"<polyline fill="none" stroke="{}" stroke-width="1.3"{dash} data-series="{}" points="{}"/>"#,
                        s.color,
                        escape(s.label),
                        path.join(" ")
                    );
                }
            }
        }
        let _ = writeln!(svg, "</g>");
    }
    let axis_y = TOP + 3.0 * (PANEL_H + GAP) - GAP + 16.0;
    let _ = writeln!(
        svg,
        r#"<text x="{LEFT}" y="{axis_y:.1}">{t_lo:.1} ms</text>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{axis_y:.1}" text-anchor="end">{t_hi:.1} ms</text>"#,
        LEFT + PANEL_W
    );
    let mut x = LEFT;
    let legend_y = axis_y + 20.0;
    for s in series {
        let _ = writeln!(
            svg,
            r#"<g class="legend"><rect x="{x:.1}" y="{:.1}" width="14" height="4" fill="{}"/><text x="{:.1}" y="{legend_y:.1}">{}</text></g>"#,
            legend_y - 6.0,
            s.color,
            x + 18.0,
            escape(s.label)
        );
        x += 30.0 + 7.0 * s.label.chars().count() as f64;
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}
