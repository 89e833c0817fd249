//! CSV tables and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

/// Twelve significant digits in scientific notation.
pub fn num(v: f64) -> String {
    format!("{v:.11e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let io = |e: csv::Error| CliError::io(path, e.to_string());
        let mut w = csv::Writer::from_path(path).map_err(io)?;
        w.write_record(&self.header).map_err(io)?;
        for row in &self.rows {
            w.write_record(row).map_err(io)?;
        }
        w.flush().map_err(|e| CliError::io(path, e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let io = |e: csv::Error| CliError::io(path, e.to_string());
        let mut r = csv::Reader::from_path(path).map_err(io)?;
        let header = r.headers().map_err(io)?.iter().map(String::from).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|rec| rec.iter().map(String::from).collect()))
            .collect::<Result<_, _>>()
            .map_err(io)?;
        Ok(Self { header, rows })
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Numeric column by name.
    pub fn floats(&self, name: &str, path: &Path) -> Result<Vec<f64>, CliError> {
        let k = self
            .column(name)
            .ok_or_else(|| CliError::io(path, format!("missing column `{name}`")))?;
        self.rows
            .iter()
            .map(|r| {
                r[k].parse::<f64>()
                    .map_err(|_| CliError::io(path, format!("non-numeric `{}` in column `{name}`", r[k])))
            })
            .collect()
    }

    /// Value of a `name,value` table entry.
    pub fn lookup(&self, name: &str) -> Option<f64> {
        self.rows.iter().find(|r| r[0] == name).and_then(|r| r[1].parse().ok())
    }
}

/// Record of one command invocation, written last and atomically.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub scenario: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out_dir: PathBuf,
    pub tool_version: String,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<String>,
    pub diagnostics: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &str, scenario: Option<&Path>, out_dir: &Path) -> Self {
        Self {
            command: command.into(),
            scenario: scenario.map(Path::to_path_buf),
            seed: None,
            out_dir: out_dir.to_path_buf(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            wall_clock_seconds: 0.0,
            outputs: Vec::new(),
            diagnostics: BTreeMap::new(),
        }
    }

    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.diagnostics.insert(key.into(), value.to_string());
    }

    /// Writes `table` into the output directory and records it.
    pub fn emit(&mut self, name: &str, table: &Table) -> Result<(), CliError> {
        table.write(&self.out_dir.join(name))?;
        self.outputs.push(name.into());
        Ok(())
    }

    pub fn write(&self) -> Result<(), CliError> {
        let path = self.out_dir.join(MANIFEST);
        let tmp = self.out_dir.join(".manifest.json.tmp");
        let json = serde_json::to_string_pretty(self).expect("manifest serialises");
        fs::write(&tmp, json + "\n").map_err(|e| CliError::io(&tmp, e.to_string()))?;
        fs::rename(&tmp, &path).map_err(|e| CliError::io(&path, e.to_string()))
    }
}

pub const MANIFEST: &str = "manifest.json";

/// Reads the diagnostics map of a manifest, if one is present.
pub fn read_diagnostics(dir: &Path) -> Option<BTreeMap<String, String>> {
    let text = fs::read_to_string(dir.join(MANIFEST)).ok()?;
    let value: serde_json::Value = serde_json::from_str(&text).ok()?;
    let map = value.get("diagnostics")?.as_object()?;
    Some(
        map.iter()
            .filter_map(|(k, v)| v.as_str().map(|s| (k.clone(), s.to_string())))
            .collect(),
    )
}
