//! Result envelopes and plot tables.

use phonoq::fit::FitResult;
use serde_json::{json, Value};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::CliError;

/// Column-major numeric table written as CSV. Non-finite cells are left empty.
#[derive(Debug, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            for (k, v) in r.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                if v.is_finite() {
                    let _ = write!(out, "{v:e}");
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Input file as recorded in the envelope.
pub struct Input {
    pub label: String,
    pub sha256: String,
}

impl Input {
    pub fn file(path: &Path) -> Result<Self, CliError> {
        if !path.is_file() {
            return Err(CliError::Input(format!("{}: no such file", path.display())));
        }
        Ok(Input { label: path.display().to_string(), sha256: phonoq::io::sha256_file(path)? })
    }

    pub fn files(label: &Path, paths: &[PathBuf]) -> Result<Self, CliError> {
        Ok(Input { label: label.display().to_string(), sha256: phonoq::io::sha256_files(paths)? })
    }
}

pub struct Report {
    pub inputs: Vec<Input>,
    pub result: Value,
    pub plot: Option<Table>,
}

impl Report {
    pub fn envelope(&self, command: &str, seed: u64) -> Value {
        let inputs: Vec<Value> =
            self.inputs.iter().map(|i| json!({ "path": i.label, "sha256": i.sha256 })).collect();
        json!({
            "tool": "phonoq",
            "version": phonoq::VERSION,
            "command": command,
            "seed": seed,
            "inputs": inputs,
            "result": self.result,
        })
    }
}

pub fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values always serialise");
    s.push('\n');
    s
}

pub fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn fit_summary(f: &FitResult) -> Value {
    json!({
        "cost": f.cost,
        "reduced_chi2": f.reduced_chi2(),
        "n_data": f.n_data,
        "n_free": f.n_free,
        "iterations": f.iterations,
        "termination": format!("{:?}", f.termination),
    })
}
