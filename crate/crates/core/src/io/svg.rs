//! SVG rendering of controllability grids and run logs.
//!
//! Output is plain SVG 1.1 text. Panels and cells carry `data-*`
//! attributes with the values they show so files can be checked without a
//! renderer.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::table::CsvTable;
use crate::controllability::{ArcaiTable, FailureGrid};
use crate::{Error, Result};

/// Marker drawn on cells whose value is ≤ 0.
pub const UNCONTROLLABLE_MARK: char = '×';

/// A labelled grid of signed values; `None` cells are left blank.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatGrid {
    pub title: String,
    pub row_label: String,
    pub col_label: String,
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub cells: Vec<Vec<Option<f64>>>,
}

impl HeatGrid {
    /// Pair grid of the full index, rotors numbered from 1.
    pub fn from_failure_grid(grid: &FailureGrid, title: &str) -> Self {
        let labels: Vec<String> = (1..=grid.size()).map(|n| n.to_string()).collect();
        HeatGrid {
            title: title.to_owned(),
            row_label: "failed rotor".into(),
            col_label: "failed rotor".into(),
            rows: labels.clone(),
            cols: labels,
            cells: grid
                .cells
                .iter()
                .map(|row| row.iter().map(|c| c.as_ref().map(|r| r.rho)).collect())
                .collect(),
        }
    }

    /// Single failures against the full index and each attitude channel
    /// left uncontrolled.
    pub fn from_arcai_table(table: &ArcaiTable, title: &str) -> Self {
        HeatGrid {
            title: title.to_owned(),
            row_label: "failed rotor".into(),
            col_label: "uncontrolled".into(),
            rows: (1..=table.single.len()).map(|n| n.to_string()).collect(),
            cols: ["none", "phi", "theta", "psi"].map(String::from).to_vec(),
            cells: table
                .single
                .iter()
                .map(|r| vec![Some(r.full.rho), Some(r.roll.rho), Some(r.pitch.rho), Some(r.yaw.rho)])
                .collect(),
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Blue for positive values, red for non-positive, shaded by magnitude.
fn cell_colour(v: f64, scale: f64) -> String {
    let s = if scale > 0.0 { (v.abs() / scale).min(1.0) } else { 0.0 };
    let fade = |c: f64| (255.0 - (255.0 - c) * (0.25 + 0.75 * s)).round() as u8;
    if v > 0.0 {
        format!("rgb({},{},{})", fade(33.0), fade(102.0), fade(172.0))
    } else {
        format!("rgb({},{},{})", fade(178.0), fade(24.0), fade(43.0))
    }
}

pub fn grid_svg(grid: &HeatGrid) -> String {
    let cell = 56.0;
    let left = 90.0;
    let top = 70.0;
    let width = left + cell * grid.cols.len() as f64 + 30.0;
    let height = top + cell * grid.rows.len() as f64 + 40.0;
    let scale = grid
        .cells
        .iter()
        .flatten()
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.abs()));

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" font-size="15" text-anchor="middle">{}</text>"#, width / 2.0, escape(&grid.title));
    let _ = writeln!(
        s,
        r#"<text x="{}" y="50" font-size="12" text-anchor="middle">{}</text>"#,
        left + cell * grid.cols.len() as f64 / 2.0,
        escape(&grid.col_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        top + cell * grid.rows.len() as f64 / 2.0,
        top + cell * grid.rows.len() as f64 / 2.0,
        escape(&grid.row_label)
    );
    for (j, c) in grid.cols.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">{}</text>"#,
            left + cell * (j as f64 + 0.5),
            top - 6.0,
            escape(c)
        );
    }
    for (i, r) in grid.rows.iter().enumerate() {
        let y = top + cell * i as f64;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="12" text-anchor="end">{}</text>"#,
            left - 8.0,
            y + cell / 2.0 + 4.0,
            escape(r)
        );
        for (j, v) in grid.cells[i].iter().enumerate() {
            let x = left + cell * j as f64;
            match v {
                Some(v) => {
                    let _ = writeln!(
                        s,
                        r#"<rect class="cell" x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{}" stroke="white" data-row="{i}" data-col="{j}" data-value="{v:.8e}"/>"#,
                        cell_colour(*v, scale)
                    );
                    if *v <= 0.0 {
                        let _ = writeln!(
                            s,
                            r#"<text class="uncontrollable" x="{}" y="{}" font-size="26" text-anchor="middle" fill="black">{UNCONTROLLABLE_MARK}</text>"#,
                            x + cell / 2.0,
                            y + cell / 2.0 + 9.0
                        );
                    }
                }
                None => {
                    let _ = writeln!(
                        s,
                        r##"<rect class="empty" x="{x}" y="{y}" width="{cell}" height="{cell}" fill="#eeeeee" stroke="white"/>"##
                    );
                }
            }
        }
    }
    s.push_str("</svg>\n");
    s
}

/// One time-series panel: which columns it draws and its axis label.
#[derive(Debug, Clone, Copy)]
pub struct Panel {
    pub title: &'static str,
    pub columns: &'static [&'static str],
}

/// Position, velocity, attitude and body-rate panels.
pub const TIME_SERIES_PANELS: [Panel; 4] = [
    Panel {
        title: "position [m]",
        columns: &["x", "y", "z", "x_ref", "y_ref", "z_ref"],
    },
    Panel {
        title: "velocity [m/s]",
        columns: &["u", "v", "w"],
    },
    Panel {
        title: "attitude [deg]",
        columns: &["phi", "theta", "psi"],
    },
    Panel {
        title: "body rates [deg/s]",
        columns: &["p", "q", "r"],
    },
];

const COLOURS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#1f77b4", "#d62728", "#2ca02c"];

/// Most points drawn per series; longer series are thinned evenly.
const MAX_POINTS: usize = 2000;

pub fn time_series_svg(table: &CsvTable, title: &str) -> Result<String> {
    let t = table.column("t")?;
    let width = 900.0;
    let panel_h = 200.0;
    let gap = 40.0;
    let left = 70.0;
    let right = 110.0;
    let top = 50.0;
    let plot_w = width - left - right;
    let height = top + 4.0 * (panel_h + gap);
    let (t0, t1) = match (t.first(), t.last()) {
        (Some(&a), Some(&b)) if b > a => (a, b),
        (Some(&a), _) => (a, a + 1.0),
        _ => (0.0, 1.0),
    };
    let stride = t.len().div_ceil(MAX_POINTS).max(1);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="26" font-size="16" text-anchor="middle">{}</text>"#, width / 2.0, escape(title));

    for (k, panel) in TIME_SERIES_PANELS.iter().enumerate() {
        let series = panel
            .columns
            .iter()
            .map(|c| table.column(c))
            .collect::<Result<Vec<_>>>()?;
        let lo = series.iter().flatten().copied().fold(f64::INFINITY, f64::min);
        let hi = series.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
        let (min, max) = if lo.is_finite() { (lo, hi) } else { (0.0, 0.0) };
        let pad = if max > min { 0.05 * (max - min) } else { 1.0 };
        let (y0, y1) = (min - pad, max + pad);
        let py = top + k as f64 * (panel_h + gap);
        let sx = |x: f64| left + (x - t0) / (t1 - t0) * plot_w;
        let sy = |y: f64| py + panel_h - (y - y0) / (y1 - y0) * panel_h;

        let _ = writeln!(
            s,
            r#"<g class="panel" data-title="{}" data-columns="{}" data-min="{min:.8e}" data-max="{max:.8e}">"#,
            escape(panel.title),
            panel.columns.join(",")
        );
        let _ = writeln!(
            s,
            r##"<rect x="{left}" y="{py}" width="{plot_w}" height="{panel_h}" fill="none" stroke="#444444"/>"##
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="12" text-anchor="middle" transform="rotate(-90 {} {})">{}</text>"#,
            18.0,
            py + panel_h / 2.0,
            18.0,
            py + panel_h / 2.0,
            escape(panel.title)
        );
        for (label, value) in [(format!("{max:.3}"), max), (format!("{min:.3}"), min)] {
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{:.2}" font-size="10" text-anchor="end">{label}</text>"#,
                left - 4.0,
                sy(value) + 3.0
            );
        }
        for (i, (name, ys)) in panel.columns.iter().zip(&series).enumerate() {
            let mut points = String::new();
            for idx in (0..ys.len()).step_by(stride).chain(ys.len().checked_sub(1)) {
                let _ = write!(points, "{:.2},{:.2} ", sx(t[idx]), sy(ys[idx]));
            }
            let dash = if name.ends_with("_ref") { r#" stroke-dasharray="5,3""# } else { "" };
            let _ = writeln!(
                s,
                r#"<polyline data-column="{name}" fill="none" stroke="{}" stroke-width="1.2"{dash} points="{}"/>"#,
                COLOURS[i % COLOURS.len()],
                points.trim_end()
            );
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" font-size="11" fill="{}">{name}</text>"#,
                left + plot_w + 8.0,
                py + 14.0 + 14.0 * i as f64,
                COLOURS[i % COLOURS.len()]
            );
        }
        s.push_str("</g>\n");
    }
    let bottom = top + 3.0 * (panel_h + gap) + panel_h;
    let _ = writeln!(s, r#"<text x="{left}" y="{}" font-size="11">{t0:.1}</text>"#, bottom + 14.0);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{t1:.1} s</text>"#,
        left + plot_w,
        bottom + 14.0
    );
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn write_svg(svg: &str, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, svg).map_err(|e| Error::io(path, e))
}
