//! Self-contained SVG line charts from the run CSV files. Output bytes are
//! a pure function of the input CSV.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use dqtsc_core::trainer::driver::{METRICS_CSV_HEADER, TRACE_CSV_HEADER};

use crate::CliError;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_L: f64 = 80.0;
const MARGIN_R: f64 = 25.0;
const MARGIN_T: f64 = 45.0;
const MARGIN_B: f64 = 55.0;

/// Renders every chart a CSV file implies and returns the written paths.
///
/// Metrics CSVs produce one chart per value column against the epoch;
/// reward traces produce a single reward-over-decision chart. Any other
/// header is rejected.
pub fn plot_csv(csv: &Path, out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let text = std::fs::read_to_string(csv)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", csv.display())))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::usage(format!("{}: empty file", csv.display())))?;
    let rows: Vec<&str> = lines.filter(|l| !l.trim().is_empty()).collect();
    if rows.is_empty() {
        return Err(CliError::usage(format!(
            "{}: no data rows to plot",
            csv.display()
        )));
    }
    let stem = csv
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("chart")
        .to_string();

    if header == METRICS_CSV_HEADER {
        let columns: Vec<&str> = header.split(',').collect();
        let parsed = parse_rows(csv, &rows, columns.len())?;
        let mut written = Vec::new();
        // Column 0 is the epoch axis.
        for (ci, name) in columns.iter().enumerate().skip(1) {
            let points: Vec<(f64, f64)> = parsed.iter().map(|r| (r[0], r[ci])).collect();
            let svg = line_chart(&format!("{name} by epoch"), "epoch", name, &points);
            let path = out_dir.join(format!("{stem}_{name}.svg"));
            std::fs::write(&path, svg)?;
            written.push(path);
        }
        Ok(written)
    } else if header == TRACE_CSV_HEADER {
        let parsed = parse_rows(csv, &rows, 2)?;
        let points: Vec<(f64, f64)> = parsed.iter().map(|r| (r[0], r[1])).collect();
        let svg = line_chart("reward by action", "action_index", "reward", &points);
        let path = out_dir.join(format!("{stem}_reward.svg"));
        std::fs::write(&path, svg)?;
        Ok(vec![path])
    } else {
        Err(CliError::usage(format!(
            "{}: unknown CSV schema (header `{header}`)",
            csv.display()
        )))
    }
}

fn parse_rows(csv: &Path, rows: &[&str], width: usize) -> Result<Vec<Vec<f64>>, CliError> {
    rows.iter()
        .enumerate()
        .map(|(i, line)| {
            let vals: Result<Vec<f64>, _> = line.split(',').map(str::parse::<f64>).collect();
            match vals {
                Ok(v) if v.len() == width => Ok(v),
                _ => Err(CliError::usage(format!(
                    "{}: malformed row {}",
                    csv.display(),
                    i + 2
                ))),
            }
        })
        .collect()
}

fn axis_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo == hi {
        lo -= 1.0;
        hi += 1.0;
    }
    (lo, hi)
}

/// One polyline on labeled axes with five ticks per side.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, points: &[(f64, f64)]) -> String {
    let (x_lo, x_hi) = axis_range(points.iter().map(|p| p.0));
    let (y_lo, y_hi) = axis_range(points.iter().map(|p| p.1));
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let px = |x: f64| MARGIN_L + (x - x_lo) / (x_hi - x_lo) * plot_w;
    let py = |y: f64| HEIGHT - MARGIN_B - (y - y_lo) / (y_hi - y_lo) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="25" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    // Axes.
    let x0 = MARGIN_L;
    let y0 = HEIGHT - MARGIN_B;
    let _ = writeln!(
        svg,
        r#"<line x1="{x0:.1}" y1="{y0:.1}" x2="{:.1}" y2="{y0:.1}" stroke="black"/>"#,
        WIDTH - MARGIN_R
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{x0:.1}" y1="{y0:.1}" x2="{x0:.1}" y2="{MARGIN_T:.1}" stroke="black"/>"#
    );
    // Ticks and grid.
    for i in 0..=4 {
        let fx = x_lo + (x_hi - x_lo) * f64::from(i) / 4.0;
        let fy = y_lo + (y_hi - y_lo) * f64::from(i) / 4.0;
        let tx = px(fx);
        let ty = py(fy);
        let _ = writeln!(
            svg,
            r#"<line x1="{tx:.1}" y1="{y0:.1}" x2="{tx:.1}" y2="{:.1}" stroke="black"/>"#,
            y0 + 5.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{tx:.1}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
            y0 + 20.0,
            tick(fx)
        );
        let _ = writeln!(
            svg,
            r#"<line x1="{:.1}" y1="{ty:.1}" x2="{x0:.1}" y2="{ty:.1}" stroke="black"/>"#,
            x0 - 5.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"#,
            x0 - 8.0,
            ty + 4.0,
            tick(fy)
        );
        if i > 0 {
            let _ = writeln!(
                svg,
                r##"<line x1="{x0:.1}" y1="{ty:.1}" x2="{:.1}" y2="{ty:.1}" stroke="#dddddd"/>"##,
                WIDTH - MARGIN_R
            );
        }
    }
    // Axis labels.
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="13" text-anchor="middle">{}</text>"#,
        MARGIN_L + plot_w / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{:.1}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
        MARGIN_T + plot_h / 2.0,
        MARGIN_T + plot_h / 2.0,
        escape(y_label)
    );
    // Data.
    let mut path = String::new();
    for (x, y) in points {
        let _ = write!(path, "{:.2},{:.2} ", px(*x), py(*y));
    }
    let _ = writeln!(
        svg,
        r##"<polyline points="{}" fill="none" stroke="#1f77b4" stroke-width="1.5"/>"##,
        path.trim_end()
    );
    if points.len() == 1 {
        let (x, y) = points[0];
        let _ = writeln!(
            svg,
            r##"<circle cx="{:.2}" cy="{:.2}" r="3" fill="#1f77b4"/>"##,
            px(x),
            py(y)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn tick(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let a = v.abs();
    if a >= 1000.0 {
        format!("{v:.0}")
    } else if a >= 1.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
