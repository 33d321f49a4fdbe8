//! CSV tables with round-trip float formatting and the per-run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::Config;

/// 17 significant digits, enough to reproduce every `f64` exactly.
pub fn float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "NaN".to_string()
    }
}

/// In-memory CSV table with a fixed header.
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let mut f = fs::File::create(path)?;
        f.write_all(self.render().as_bytes())
    }
}

pub fn config_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub config_hash: String,
    /// Resolved configuration; feeding it back reproduces the run.
    pub parameters: Config,
    pub code_version: String,
    pub wall_clock_seconds: f64,
    pub threads: usize,
    pub seedless: bool,
    pub trunc_error: f64,
    pub convergence: BTreeMap<String, bool>,
    pub warnings: Vec<String>,
    /// Set when an output file could not be written.
    pub partial: bool,
    pub files: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, config: &Config, raw: &str) -> Self {
        Self {
            command: command.to_string(),
            config_hash: config_hash(raw),
            parameters: config.clone(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_clock_seconds: 0.0,
            threads: rayon::current_num_threads(),
            seedless: false,
            trunc_error: 0.0,
            convergence: BTreeMap::new(),
            warnings: Vec::new(),
            partial: false,
            files: Vec::new(),
        }
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(dir.join("manifest.json"), json)
    }
}

/// Output directory that records every file it writes and, on the first
/// failure, marks the manifest partial before surfacing the error.
pub struct OutDir {
    pub root: PathBuf,
    pub manifest: Manifest,
}

impl OutDir {
    pub fn create(root: &Path, manifest: Manifest) -> std::io::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            manifest,
        })
    }

    fn record<T>(&mut self, rel: &str, result: std::io::Result<T>) -> std::io::Result<T> {
        match result {
            Ok(v) => {
                self.manifest.files.push(rel.to_string());
                Ok(v)
            }
            Err(e) => {
                self.manifest.partial = true;
                self.manifest.warnings.push(format!("failed to write {rel}: {e}"));
                let _ = self.manifest.write(&self.root);
                Err(e)
            }
        }
    }

    pub fn table(&mut self, rel: &str, table: &Table) -> std::io::Result<()> {
        let path = self.root.join(rel);
        let r = path.parent().map_or(Ok(()), fs::create_dir_all).and_then(|_| table.write(&path));
        self.record(rel, r)
    }

    pub fn text(&mut self, rel: &str, body: &str) -> std::io::Result<()> {
        let path = self.root.join(rel);
        let r = path.parent().map_or(Ok(()), fs::create_dir_all).and_then(|_| fs::write(&path, body));
        self.record(rel, r)
    }

    pub fn finish(self) -> std::io::Result<Manifest> {
        self.manifest.write(&self.root)?;
        Ok(self.manifest)
    }
}
