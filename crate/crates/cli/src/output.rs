//! The JSON envelope and CSV tables written by every subcommand.

use std::io::Write;

use serde::Serialize;
use serde_json::Value;

use crate::config::{OutputFormat, RunConfig};
use crate::error::CliError;
use linea::{SeriesEstimate, Verdict};

#[derive(Clone, Debug, Default, Serialize)]
pub struct Diagnostics {
    pub verdict: Option<Verdict>,
    pub levels: Option<Vec<f64>>,
    pub residuals: Option<Vec<f64>>,
}

impl Diagnostics {
    pub fn from_series(series: &SeriesEstimate) -> Self {
        Self {
            verdict: Some(series.verdict),
            levels: Some(series.level_sums.clone()),
            residuals: None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ErrorInfo {
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Serialize)]
pub struct Report<'a> {
    pub command: String,
    pub config: &'a RunConfig,
    pub result: Value,
    pub diagnostics: Diagnostics,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorInfo>,
}

/// Rows for `--format csv`; every cell is already formatted.
#[derive(Clone, Debug, Default)]
pub struct Table {
    pub headers: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(headers: &[&'static str]) -> Self {
        Self {
            headers: headers.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    /// Per-level sums of a series, `n,level_sum,partial_sum`.
    pub fn series(series: &SeriesEstimate) -> Self {
        let mut t = Table::new(&["n", "level_sum", "partial_sum"]);
        for (i, (l, s)) in series.level_sums.iter().zip(&series.partial_sums).enumerate() {
            t.push(vec![(i + 1).to_string(), num(*l), num(*s)]);
        }
        t
    }
}

pub struct Outcome {
    pub result: Value,
    pub diagnostics: Diagnostics,
    pub table: Table,
}

pub fn render(report: &Report<'_>, table: Option<&Table>, format: OutputFormat) -> Result<Vec<u8>, CliError> {
    let out_err = |e: &dyn std::fmt::Display| CliError::Output(e.to_string());
    match (format, table) {
        (OutputFormat::Csv, Some(table)) => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(&table.headers).map_err(|e| out_err(&e))?;
            for row in &table.rows {
                w.write_record(row).map_err(|e| out_err(&e))?;
            }
            w.into_inner().map_err(|e| out_err(&e))
        }
        _ => {
            let mut buf = serde_json::to_vec_pretty(report).map_err(|e| out_err(&e))?;
            buf.push(b'\n');
            Ok(buf)
        }
    }
}

pub fn emit(bytes: &[u8], cfg: &RunConfig) -> Result<(), CliError> {
    match &cfg.output_path {
        Some(path) => std::fs::write(path, bytes).map_err(|e| CliError::Output(format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(bytes)
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::Output(e.to_string()))
        }
    }
}

/// Shortest round-trip form, in exponent notation outside `[1e-4, 1e15)`; `-0` prints as `0`.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 {
        "0".to_string()
    } else if !x.is_finite() || (1e-4..1e15).contains(&a) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

pub fn complex_cells(z: linea::Complex64) -> [String; 2] {
    [num(z.re), num(z.im)]
}
