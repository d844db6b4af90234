//! Self-contained SVG learning curves: one mean line and a ±std band per file.

use std::fmt::Write as _;
use std::path::Path;

use super::csv::{read_table, write_text, Table};
use crate::error::{Error, Result};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 180.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 60.0;
const TICKS: usize = 5;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Series {
    /// Reads `step`, `return_mean` and `return_std`, which both run and
    /// aggregate CSVs carry.
    pub fn from_table(label: String, table: &Table) -> Result<Self> {
        let col = |name: &str| {
            table.column(name).ok_or_else(|| Error::Malformed {
                what: label.clone(),
                reason: format!("missing column `{name}`"),
            })
        };
        let series = Series {
            x: col("step")?,
            mean: col("return_mean")?,
            std: col("return_std")?,
            label: label.clone(),
        };
        if series.x.is_empty() {
            return Err(Error::Malformed {
                what: label,
                reason: "no data rows".into(),
            });
        }
        Ok(series)
    }

    /// Trailing moving average of mean and std over `window` points.
    pub fn smoothed(&self, window: usize) -> Series {
        let w = window.max(1);
        let smooth = |v: &[f64]| -> Vec<f64> {
            (0..v.len())
                .map(|i| {
                    let lo = (i + 1).saturating_sub(w);
                    v[lo..=i].iter().sum::<f64>() / (i + 1 - lo) as f64
                })
                .collect()
        };
        Series {
            label: self.label.clone(),
            x: self.x.clone(),
            mean: smooth(&self.mean),
            std: smooth(&self.std),
        }
    }
}

/// Loads CSVs that must share one header; labels come from file stems.
pub fn load_series(paths: &[&Path]) -> Result<Vec<Series>> {
    if paths.is_empty() {
        return Err(Error::config("plot needs at least one CSV"));
    }
    let mut header: Option<Vec<String>> = None;
    let mut out = Vec::with_capacity(paths.len());
    for path in paths {
        let table = read_table(path)?;
        match &header {
            None => header = Some(table.header.clone()),
            Some(h) if *h != table.header => {
                return Err(Error::Malformed {
                    what: path.display().to_string(),
                    reason: format!("schema `{}` differs from `{}`", table.header.join(","), h.join(",")),
                })
            }
            Some(_) => {}
        }
        let label = path
            .file_stem()
            .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
        out.push(Series::from_table(label, &table)?);
    }
    Ok(out)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if lo == hi {
        (lo - 1.0, hi + 1.0)
    } else {
        (lo, hi)
    }
}

/// Renders the chart.
pub fn render_svg(series: &[Series], title: &str) -> String {
    let (x0, x1) = range(series.iter().flat_map(|s| s.x.iter().copied()));
    let (y0, y1) = range(
        series
            .iter()
            .flat_map(|s| s.mean.iter().zip(&s.std).flat_map(|(m, d)| [m - d, m + d])),
    );
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let px = |x: f64| MARGIN_LEFT + (x - x0) / (x1 - x0) * plot_w;
    let py = |y: f64| MARGIN_TOP + (y1 - y) / (y1 - y0) * plot_h;

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).unwrap();
    writeln!(
        svg,
        r#"<text x="{:.2}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        escape(title)
    )
    .unwrap();

    // axes and ticks
    let (bottom, right) = (MARGIN_TOP + plot_h, MARGIN_LEFT + plot_w);
    writeln!(
        svg,
        r#"<path d="M{MARGIN_LEFT:.2},{MARGIN_TOP:.2} L{MARGIN_LEFT:.2},{bottom:.2} L{right:.2},{bottom:.2}" fill="none" stroke="black"/>"#
    )
    .unwrap();
    for i in 0..=TICKS {
        let t = i as f64 / TICKS as f64;
        let xv = x0 + t * (x1 - x0);
        let yv = y0 + t * (y1 - y0);
        let (xp, yp) = (px(xv), py(yv));
        writeln!(
            svg,
            r#"<line x1="{xp:.2}" y1="{bottom:.2}" x2="{xp:.2}" y2="{:.2}" stroke="black"/><text x="{xp:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            bottom + 5.0,
            bottom + 20.0,
            tick_label(xv)
        )
        .unwrap();
        writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{yp:.2}" x2="{MARGIN_LEFT:.2}" y2="{yp:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            MARGIN_LEFT - 5.0,
            MARGIN_LEFT - 8.0,
            yp + 4.0,
            tick_label(yv)
        )
        .unwrap();
    }
    writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">step</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 15.0
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">return</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0
    )
    .unwrap();

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let upper: Vec<String> = (0..s.x.len())
            .map(|k| format!("{:.2},{:.2}", px(s.x[k]), py(s.mean[k] + s.std[k])))
            .collect();
        let lower: Vec<String> = (0..s.x.len())
            .rev()
            .map(|k| format!("{:.2},{:.2}", px(s.x[k]), py(s.mean[k] - s.std[k])))
            .collect();
        writeln!(
            svg,
            r#"<polygon points="{} {}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
            upper.join(" "),
            lower.join(" ")
        )
        .unwrap();
        let line: Vec<String> = (0..s.x.len())
            .map(|k| format!("{:.2},{:.2}", px(s.x[k]), py(s.mean[k])))
            .collect();
        writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            line.join(" ")
        )
        .unwrap();
        for k in 0..s.x.len() {
            writeln!(
                svg,
                r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#,
                px(s.x[k]),
                py(s.mean[k])
            )
            .unwrap();
        }
        let ly = MARGIN_TOP + 10.0 + 20.0 * i as f64;
        let lx = right + 15.0;
        writeln!(
            svg,
            r#"<rect x="{lx:.2}" y="{:.2}" width="14" height="4" fill="{color}"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            ly - 2.0,
            lx + 20.0,
            ly + 4.0,
            escape(&s.label)
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    svg
}

fn tick_label(v: f64) -> String {
    if v.abs() >= 1000.0 || v == v.trunc() {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

/// The `plot` subcommand.
pub fn plot(paths: &[&Path], output: &Path, window: Option<usize>) -> Result<()> {
    let mut series = load_series(paths)?;
    if let Some(w) = window {
        series = series.iter().map(|s| s.smoothed(w)).collect();
    }
    write_text(output, &render_svg(&series, "learning curves"))
}
