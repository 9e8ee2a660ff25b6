//! Three stacked panels (amplitude, heart rate, multiplier) over a shared time
//! axis, rendered as SVG.
//!
//! Output is plain text with fixed-precision coordinates, so identical traces
//! give byte-identical files. Each panel is a `<g class="panel">` carrying its
//! series name and x-extent as data attributes.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::engine::TraceRecord;

const WIDTH: f64 = 960.0;
const PANEL_H: f64 = 180.0;
const GAP: f64 = 40.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;

#[derive(Debug, Error)]
pub enum FigureError {
    #[error("trace is empty")]
    EmptyTrace,
    #[error(transparent)]
    Io(#[from] io::Error),
}

struct Panel<'a> {
    id: &'a str,
    series: &'a str,
    label: &'a str,
    color: &'a str,
    values: Vec<Option<f64>>,
}

fn y_range(values: &[Option<f64>]) -> (f64, f64) {
    let (lo, hi) = values
        .iter()
        .flatten()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = if hi > lo {
        (hi - lo) * 0.05
    } else {
        lo.abs().max(1.0) * 0.05
    };
    (lo - pad, hi + pad)
}

pub fn render_figure(records: &[TraceRecord]) -> Result<String, FigureError> {
    let (first, last) = match records {
        [] => return Err(FigureError::EmptyTrace),
        [f, .., l] => (f, l),
        [f] => (f, f),
    };
    let (x_min, x_max) = (first.t, last.t);
    let x_span = if x_max > x_min { x_max - x_min } else { 1.0 };
    let plot_w = WIDTH - LEFT - RIGHT;

    let panels = [
        Panel {
            id: "panel-amplitude",
            series: "rms_amplitude",
            label: "RMS amplitude",
            color: "#1f4e79",
            values: records.iter().map(|r| Some(r.rms_amplitude)).collect(),
        },
        Panel {
            id: "panel-heart-rate",
            series: "hr_bpm",
            label: "heart rate (BPM)",
            color: "#b22222",
            values: records.iter().map(|r| r.hr_bpm).collect(),
        },
        Panel {
            id: "panel-multiplier",
            series: "multiplier",
            label: "tempo multiplier",
            color: "#2e7d32",
            values: records.iter().map(|r| Some(r.multiplier)).collect(),
        },
    ];

    let height = TOP + 3.0 * PANEL_H + 2.0 * GAP + BOTTOM;
    let mut svg = String::new();
    // writes into a String cannot fail
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);

    for (i, p) in panels.iter().enumerate() {
        let top = TOP + i as f64 * (PANEL_H + GAP);
        let (y_lo, y_hi) = y_range(&p.values);
        let px = |t: f64| LEFT + (t - x_min) / x_span * plot_w;
        let py = |v: f64| top + PANEL_H - (v - y_lo) / (y_hi - y_lo) * PANEL_H;

        let _ = writeln!(
            svg,
            r#"<g class="panel" id="{}" data-series="{}" data-x-min="{x_min:.6}" data-x-max="{x_max:.6}" data-points="{}">"#,
            p.id,
            p.series,
            p.values.len()
        );
        let _ = writeln!(
            svg,
            r##"<rect x="{LEFT}" y="{top}" width="{plot_w}" height="{PANEL_H}" fill="none" stroke="#444"/>"##
        );
        let _ = writeln!(
            svg,
            r#"<text x="{LEFT}" y="{:.1}">{}</text>"#,
            top - 6.0,
            p.label
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{y_hi:.3}</text>"#,
            LEFT - 6.0,
            top + 10.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{y_lo:.3}</text>"#,
            LEFT - 6.0,
            top + PANEL_H
        );

        // one polyline per run of present values
        let mut run = String::new();
        let flush = |svg: &mut String, run: &mut String| {
            if !run.is_empty() {
                let _ = writeln!(
                    svg,
                    r#"<polyline fill="none" stroke="{}" stroke-width="1" points="{}"/>"#,
                    p.color,
                    run.trim_end()
                );
                run.clear();
            }
        };
        for (r, v) in records.iter().zip(&p.values) {
            match v {
                Some(v) if v.is_finite() => {
                    let _ = write!(run, "{:.2},{:.2} ", px(r.t), py(*v));
                }
                _ => flush(&mut svg, &mut run),
            }
        }
        flush(&mut svg, &mut run);
        let _ = writeln!(svg, "</g>");
    }

    let axis_y = TOP + 3.0 * PANEL_H + 2.0 * GAP;
    let _ = writeln!(
        svg,
        r#"<text x="{LEFT}" y="{:.1}">{x_min:.2}</text>"#,
        axis_y + 16.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{x_max:.2}</text>"#,
        WIDTH - RIGHT,
        axis_y + 16.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">time (s)</text>"#,
        LEFT + plot_w / 2.0,
        axis_y + 36.0
    );
    let _ = writeln!(svg, "</svg>");
    Ok(svg)
}

pub fn save_figure(path: impl AsRef<Path>, records: &[TraceRecord]) -> Result<(), FigureError> {
    std::fs::write(path, render_figure(records)?)?;
    Ok(())
}
