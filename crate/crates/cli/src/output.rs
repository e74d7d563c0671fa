//! CSV and summary writers.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// 17 significant digits, enough to round-trip any double.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        // fold -0 into 0 so sign noise never changes bytes
        return "0.0000000000000000e0".to_string();
    }
    format!("{x:.16e}")
}

/// A CSV table whose rows are sorted before writing.
pub struct Table {
    columns: Vec<&'static str>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Sorts rows lexicographically by the first `keys` columns.
    pub fn sort_by_keys(&mut self, keys: usize) {
        self.rows.sort_by(|a, b| {
            a[..keys]
                .iter()
                .zip(&b[..keys])
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
    }

    pub fn render(&self, header: &str) -> String {
        let mut s = String::new();
        s.push_str(header);
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&x| fmt_f64(x)).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }
}

/// Output directory plus bookkeeping for `summary.json`.
pub struct Run {
    pub command: &'static str,
    pub dir: PathBuf,
    hash: String,
    config: RunConfig,
    started: Instant,
    files: Vec<String>,
    checks: Vec<Value>,
    results: serde_json::Map<String, Value>,
}

impl Run {
    pub fn new(command: &'static str, config: &RunConfig) -> Result<Self, CliError> {
        let dir = config.out.clone();
        fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self {
            command,
            dir,
            hash: config.hash(),
            config: config.clone(),
            started: Instant::now(),
            files: Vec::new(),
            checks: Vec::new(),
            results: serde_json::Map::new(),
        })
    }

    pub fn header(&self) -> String {
        format!("# kerrcat {VERSION} command={} config-sha256={}\n", self.command, self.hash)
    }

    pub fn write_table(&mut self, name: &str, table: &Table) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        write(&path, &table.render(&self.header()))?;
        self.files.push(name.to_string());
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        write(&path, &(text + "\n"))?;
        self.files.push(name.to_string());
        Ok(path)
    }

    /// Records an internal cross-check. `pass` is stored alongside the value.
    pub fn check(&mut self, name: &str, value: f64, threshold: f64, pass: bool) {
        if !pass {
            log::warn!("check {name} failed: {value:e} vs {threshold:e}");
        }
        self.checks.push(json!({ "name": name, "value": value, "threshold": threshold, "pass": pass }));
    }

    pub fn result<T: Serialize>(&mut self, key: &str, value: T) {
        self.results
            .insert(key.to_string(), serde_json::to_value(value).expect("result serializes"));
    }

    pub fn finish(mut self) -> Result<PathBuf, CliError> {
        let summary = json!({
            "command": self.command,
            "version": VERSION,
            "config_sha256": self.hash,
            "config": self.config,
            "elapsed_s": self.started.elapsed().as_secs_f64(),
            "files": self.files,
            "checks": self.checks,
            "results": Value::Object(std::mem::take(&mut self.results)),
        });
        let path = self.dir.join("summary.json");
        let text = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Io(e.to_string()))?;
        write(&path, &(text + "\n"))?;
        Ok(path)
    }
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}
