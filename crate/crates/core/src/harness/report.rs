//! Study reports and their CSV / JSON forms.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

pub const CSV_HEADER: &str = "M,h,error,order,bound";

/// Where the reference values of a study came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ReferenceSource {
    Exact {
        expression: String,
    },
    FineGrid {
        intervals: usize,
    },
    /// Errors are first-kind residual norms; the reference is zero.
    Residual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    #[serde(rename = "M")]
    pub m: usize,
    pub h: f64,
    pub error: f64,
    /// Observed order against the previous row.
    pub order: Option<f64>,
    pub bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub schema_version: u32,
    pub problem: String,
    pub reference: ReferenceSource,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceReport {
    pub fn new(problem: impl Into<String>, reference: ReferenceSource) -> Self {
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            problem: problem.into(),
            reference,
            rows: Vec::new(),
        }
    }

    pub fn orders(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().filter_map(|r| r.order)
    }

    pub fn max_error(&self) -> f64 {
        self.rows.iter().map(|r| r.error).fold(0.0, f64::max)
    }
}

/// `log(e_prev / e) / log(h_prev / h)`, undefined when either error is 0
/// or the ratio is not finite.
pub fn observed_order(prev: &ConvergenceRow, next: &ConvergenceRow) -> Option<f64> {
    if !(prev.error > 0.0 && next.error > 0.0) {
        return None;
    }
    let p = (prev.error / next.error).ln() / (prev.h / next.h).ln();
    p.is_finite().then_some(p)
}

/// Fills `order` on every row after the first.
pub fn fill_orders(rows: &mut [ConvergenceRow]) {
    if let Some(first) = rows.first_mut() {
        first.order = None;
    }
    for k in 1..rows.len() {
        rows[k].order = observed_order(&rows[k - 1], &rows[k]);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::invalid(format!(
                "unknown report format `{other}`, expected csv or json"
            ))),
        }
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.11e}")).unwrap_or_default()
}

pub fn to_csv(rows: &[ConvergenceRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.m,
            cell(Some(r.h)),
            cell(Some(r.error)),
            cell(r.order),
            cell(r.bound)
        );
    }
    out
}

/// Reads rows written by [`to_csv`].
pub fn parse_csv(src: &str) -> Result<Vec<ConvergenceRow>> {
    let mut lines = src.lines();
    match lines.next() {
        Some(h) if h.trim() == CSV_HEADER => {}
        other => {
            return Err(Error::schema(
                "header",
                format!("expected `{CSV_HEADER}`, found {other:?}"),
            ))
        }
    }
    let num = |s: &str, line: usize, col: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            return Ok(None);
        }
        s.parse()
            .map(Some)
            .map_err(|_| Error::schema(format!("row {line}.{col}"), format!("not a number: `{s}`")))
    };
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 5 {
                return Err(Error::schema(
                    format!("row {}", i + 1),
                    "expected 5 columns",
                ));
            }
            let m = f[0].parse().map_err(|_| {
                Error::schema(
                    format!("row {}.M", i + 1),
                    format!("not an integer: `{}`", f[0]),
                )
            })?;
            let required = |v: Option<f64>, col: &str| {
                v.ok_or_else(|| Error::schema(format!("row {}.{col}", i + 1), "missing value"))
            };
            Ok(ConvergenceRow {
                m,
                h: required(num(f[1], i + 1, "h")?, "h")?,
                error: required(num(f[2], i + 1, "error")?, "error")?,
                order: num(f[3], i + 1, "order")?,
                bound: num(f[4], i + 1, "bound")?,
            })
        })
        .collect()
}

/// The report as CSV (rows only) or JSON (whole structure).
pub fn render_report<R: Serialize + HasRows>(report: &R, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Csv => Ok(to_csv(report.rows())),
        ReportFormat::Json => serde_json::to_string_pretty(report)
            .map(|mut s| {
                s.push('\n');
                s
            })
            .map_err(|e| Error::invalid(format!("cannot serialize report: {e}"))),
    }
}

pub fn emit_report<R: Serialize + HasRows>(
    report: &R,
    format: ReportFormat,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, render_report(report, format)?).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reports whose CSV form is a table of [`ConvergenceRow`]s.
pub trait HasRows {
    fn rows(&self) -> &[ConvergenceRow];
}

impl HasRows for ConvergenceReport {
    fn rows(&self) -> &[ConvergenceRow] {
        &self.rows
    }
}
