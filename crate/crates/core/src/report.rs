//! Result artifacts: the flat study table and the JSON result document.

use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::adaptive::MseReport;
use crate::error::{Error, Result};
use crate::numeric::NumericPolicy;

/// Column names of the study table, in order.
pub const STUDY_COLUMNS: [&str; 8] = [
    "n",
    "trials",
    "trace_mse",
    "n_trace_mse",
    "mc_stderr",
    "c_bound",
    "sld_bound",
    "n_cn_bound",
];

fn sci(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes one row per report, sorted by n, to `path` as CSV.
///
/// `mc_stderr` is the standard error of `trace_mse`; floats carry 17
/// significant digits so the file reparses to the same values.
pub fn emit_study_table(reports: &[MseReport], path: &Path) -> Result<()> {
    if reports.is_empty() {
        return Err(Error::InvalidOptions("no study reports to emit".into()));
    }
    let mut rows: Vec<&MseReport> = reports.iter().collect();
    rows.sort_by_key(|r| r.n);
    let io = |e: csv::Error| Error::IoError(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(STUDY_COLUMNS).map_err(io)?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.trials.to_string(),
            sci(r.trace_mse),
            sci(r.scaled),
            sci(r.trace_mse_stderr),
            sci(r.c_bound),
            sci(r.sld_bound),
            r.n_cn_bound.map(sci).unwrap_or_default(),
        ])
        .map_err(io)?;
    }
    w.flush()
        .map_err(|e| Error::IoError(format!("{}: {e}", path.display())))
}

/// One parsed row of a study table.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub n: usize,
    pub trials: usize,
    pub trace_mse: f64,
    pub n_trace_mse: f64,
    pub mc_stderr: f64,
    pub c_bound: f64,
    pub sld_bound: f64,
    pub n_cn_bound: Option<f64>,
}

/// Reads a table written by [`emit_study_table`].
pub fn read_study_table(path: &Path) -> Result<Vec<StudyRow>> {
    let bad = |msg: String| Error::IoError(format!("{}: {msg}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let header = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.iter().ne(STUDY_COLUMNS) {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let f = |i: usize| -> Result<f64> {
            rec[i]
                .parse()
                .map_err(|_| bad(format!("bad number `{}`", &rec[i])))
        };
        let u = |i: usize| -> Result<usize> {
            rec[i]
                .parse()
                .map_err(|_| bad(format!("bad integer `{}`", &rec[i])))
        };
        out.push(StudyRow {
            n: u(0)?,
            trials: u(1)?,
            trace_mse: f(2)?,
            n_trace_mse: f(3)?,
            mc_stderr: f(4)?,
            c_bound: f(5)?,
            sld_bound: f(6)?,
            n_cn_bound: if rec[7].is_empty() { None } else { Some(f(7)?) },
        });
    }
    Ok(out)
}

/// The JSON result document of a run.
#[derive(Debug, Clone, Serialize)]
pub struct ResultDocument {
    pub version: String,
    pub numeric_policy: NumericPolicy,
    pub config_echo: Value,
    pub overrides: Vec<String>,
    pub results: Value,
    pub diagnostics: Value,
}

impl ResultDocument {
    pub fn new(config_echo: Value, overrides: Vec<String>) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            numeric_policy: NumericPolicy::current(),
            config_echo,
            overrides,
            results: Value::Null,
            diagnostics: Value::Object(Default::default()),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::IoError(format!("serializing result: {e}")))?;
        fs::write(path, text + "\n").map_err(|e| Error::IoError(format!("{}: {e}", path.display())))
    }
}
