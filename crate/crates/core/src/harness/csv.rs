//! Metric CSVs: UTF-8, `\n` line endings, shortest round-trip float text.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::{mean_std, MetricRow};

/// Bumped whenever a column is added, removed or reordered.
pub const SCHEMA_VERSION: u32 = 1;

pub fn run_header(styles: usize) -> Vec<String> {
    let mut cols = vec!["step".to_string(), "return_mean".into(), "return_std".into()];
    cols.extend((0..styles).map(|j| format!("style{j}_return")));
    cols.push("controversy".into());
    cols.push("coverage".into());
    cols
}

pub const AGGREGATE_HEADER: [&str; 7] = [
    "step",
    "return_mean",
    "return_std",
    "controversy_mean",
    "controversy_std",
    "coverage_mean",
    "coverage_std",
];

pub fn format_row(row: &MetricRow) -> String {
    let mut line = format!("{},{},{}", row.step, row.return_mean, row.return_std);
    for r in &row.style_returns {
        write!(line, ",{r}").unwrap();
    }
    write!(line, ",{},{}", row.controversy, row.coverage).unwrap();
    line
}

pub fn run_csv(styles: usize, rows: &[MetricRow]) -> String {
    let mut out = run_header(styles).join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&format_row(row));
        out.push('\n');
    }
    out
}

/// A parsed numeric CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|x| x.to_string()).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

pub fn parse_table(text: &str, what: &str) -> Result<Table> {
    let malformed = |reason: String| Error::Malformed {
        what: what.to_string(),
        reason,
    };
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .filter(|h| !h.is_empty())
        .ok_or_else(|| malformed("missing header".into()))?
        .split(',')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|c| c.parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| malformed(format!("line {}: {e}", i + 2)))?;
        if row.len() != header.len() {
            return Err(malformed(format!(
                "line {} has {} fields, header has {}",
                i + 2,
                row.len(),
                header.len()
            )));
        }
        rows.push(row);
    }
    Ok(Table { header, rows })
}

pub fn read_table(path: &Path) -> Result<Table> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_table(&text, &path.display().to_string())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Per-step mean and population std across runs.
///
/// Runs are summed in the order given, so callers that want permutation
/// invariance must pass them in a canonical order (the harness sorts by seed).
pub fn aggregate(runs: &[&[MetricRow]]) -> Result<Table> {
    let first = runs.first().ok_or_else(|| Error::config("nothing to aggregate"))?;
    for r in runs {
        if r.len() != first.len() || r.iter().zip(first.iter()).any(|(a, b)| a.step != b.step) {
            return Err(Error::config("runs disagree on evaluation steps"));
        }
    }
    let mut rows = Vec::with_capacity(first.len());
    for (i, head) in first.iter().enumerate() {
        let col = |f: fn(&MetricRow) -> f64| -> Vec<f64> { runs.iter().map(|r| f(&r[i])).collect() };
        let (rm, rs) = mean_std(&col(|m| m.return_mean));
        let (cm, cs) = mean_std(&col(|m| m.controversy));
        let (vm, vs) = mean_std(&col(|m| m.coverage));
        rows.push(vec![head.step as f64, rm, rs, cm, cs, vm, vs]);
    }
    Ok(Table {
        header: AGGREGATE_HEADER.iter().map(|s| s.to_string()).collect(),
        rows,
    })
}
