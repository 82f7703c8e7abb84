//! Artifact writers: CSV tables (byte-deterministic), the JSON run summary,
//! and the plain-text matrix dump.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use quenched_core::transfer::UlamMatrix;

use crate::config::ExperimentPlan;

/// One tolerance check of a run; `measured` and `tolerance` are echoed so
/// summaries are self-describing.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    /// `|measured| <= tolerance`.
    pub fn abs_within(name: &str, measured: f64, tolerance: f64) -> Self {
        Check { name: name.into(), measured, tolerance, pass: measured.abs() <= tolerance }
    }

    /// `measured <= tolerance`.
    pub fn at_most(name: &str, measured: f64, tolerance: f64) -> Self {
        Check { name: name.into(), measured, tolerance, pass: measured <= tolerance }
    }

    pub fn boolean(name: &str, ok: bool) -> Self {
        Check { name: name.into(), measured: if ok { 1.0 } else { 0.0 }, tolerance: 1.0, pass: ok }
    }
}

/// The JSON summary of one run: plan echo, wall time, per-check verdicts,
/// artifact list, and warnings.
#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub kind: &'static str,
    pub seed: u64,
    pub passed: bool,
    pub error: Option<String>,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
    pub artifacts: Vec<String>,
    pub wall_time_ms: u128,
    pub payload: serde_json::Value,
    pub plan: ExperimentPlan,
}

impl RunSummary {
    pub fn print_verdicts(&self) {
        for c in &self.checks {
            let tag = if c.pass { "PASS" } else { "FAIL" };
            println!("[{tag}] {}: measured {} (tolerance {})", c.name, c.measured, c.tolerance);
        }
        for w in &self.warnings {
            println!("[WARN] {w}");
        }
        if let Some(e) = &self.error {
            println!("[ERROR] {e}");
        }
    }
}

/// A CSV table with a fixed header; floats are written with the shortest
/// round-trip representation, so identical runs produce identical bytes.
pub struct Csv {
    content: String,
}

impl Csv {
    pub fn new(header: &str) -> Self {
        Csv { content: format!("{header}\n") }
    }

    pub fn row(&mut self, fields: &[CsvField]) {
        let mut first = true;
        for f in fields {
            if !first {
                self.content.push(',');
            }
            first = false;
            match f {
                CsvField::F(x) => self.content.push_str(&x.to_string()),
                CsvField::I(x) => self.content.push_str(&x.to_string()),
                CsvField::U(x) => self.content.push_str(&x.to_string()),
                CsvField::B(x) => self.content.push_str(if *x { "1" } else { "0" }),
            }
        }
        self.content.push('\n');
    }

    pub fn into_string(self) -> String {
        self.content
    }
}

pub enum CsvField {
    F(f64),
    I(i64),
    U(u64),
    B(bool),
}

pub fn write_artifact(dir: &Path, name: &str, content: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, content).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

pub fn write_summary(dir: &Path, name: &str, summary: &RunSummary) -> Result<PathBuf> {
    let json = serde_json::to_string_pretty(summary).context("serializing summary")?;
    write_artifact(dir, name, &json)
}

/// Plain-text triplet dump: header `ulam N=<n_cells> map=<index>`, then one
/// `row col weight` line per entry.
pub fn dump_matrix(matrix: &UlamMatrix, map_index: usize) -> String {
    let mut s = format!("ulam N={} map={}\n", matrix.n_cells(), map_index);
    for (i, j, w) in matrix.triplets() {
        s.push_str(&format!("{i} {j} {w}\n"));
    }
    s
}
