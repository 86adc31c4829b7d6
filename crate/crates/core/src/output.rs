//! Deterministic CSV and JSON artifact writers.
//!
//! Floats are rendered in shortest round-trip scientific notation (always a
//! `.`-decimal, locale-free), so identical runs produce byte-identical files.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::Result;

/// Render a float for CSV: shortest round-trip scientific notation.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:e}")
    }
}

/// An in-memory CSV table with a fixed, documented column order.
pub struct CsvTable {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(columns: Vec<&'static str>) -> Self {
        CsvTable {
            columns,
            rows: vec![],
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row width mismatch");
        self.rows.push(row);
    }

    pub fn to_string(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_string().as_bytes())?;
        Ok(())
    }
}

/// One checked assertion of an experiment run.
#[derive(Debug, Clone, Serialize)]
pub struct Assertion {
    pub id: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

impl Assertion {
    pub fn le(id: impl Into<String>, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Assertion {
            id: id.into(),
            passed: value <= threshold,
            value,
            threshold,
            detail: detail.into(),
        }
    }

    pub fn flag(id: impl Into<String>, ok: bool, detail: impl Into<String>) -> Self {
        Assertion {
            id: id.into(),
            passed: ok,
            value: if ok { 1.0 } else { 0.0 },
            threshold: 1.0,
            detail: detail.into(),
        }
    }
}

/// Machine-readable run summary.
#[derive(Debug, Serialize)]
pub struct Summary {
    pub name: String,
    pub kind: String,
    pub spec_version: u32,
    pub seed: u64,
    pub pass: bool,
    pub reason: String,
    pub assertions: Vec<Assertion>,
    pub artifacts: Vec<String>,
}

impl Summary {
    pub fn write_to(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| crate::Error::Config(format!("summary serialization failed: {e}")))?;
        std::fs::write(path, text)?;
        Ok(())
    }
}

/// Output paths of an experiment.
pub struct ArtifactPaths {
    pub csv: PathBuf,
    pub summary: PathBuf,
}

pub fn artifact_paths(out_dir: &Path, name: &str) -> ArtifactPaths {
    ArtifactPaths {
        csv: out_dir.join(format!("{name}.csv")),
        summary: out_dir.join(format!("{name}.summary.json")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting_is_locale_free_and_roundtrips() {
        assert_eq!(fmt_float(1.5), "1.5e0");
        assert_eq!(fmt_float(0.001), "1e-3");
        let x = 0.9990009990009991;
        let s = fmt_float(x);
        assert_eq!(s.parse::<f64>().unwrap(), x);
    }

    #[test]
    fn csv_rendering_is_stable() {
        let mut t = CsvTable::new(vec!["alpha", "value"]);
        t.push(vec![fmt_float(1.5), fmt_float(2.0 / 3.0)]);
        assert_eq!(t.to_string(), "alpha,value\n1.5e0,6.666666666666666e-1\n");
    }
}
