//! Self-describing artifacts: CSV files with a `#`-prefixed header block and
//! a JSON manifest per run.

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

/// CSV writer that emits a comment block (config hash, column units) before
/// the header row.
pub struct CsvFile {
    w: BufWriter<File>,
    path: PathBuf,
    columns: usize,
}

impl CsvFile {
    pub fn create(
        dir: &Path,
        name: &str,
        meta: &[(&str, String)],
        columns: &[(&str, &str)],
    ) -> Result<CsvFile> {
        let path = dir.join(name);
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = BufWriter::new(file);
        for (k, v) in meta {
            writeln!(w, "# {k}: {v}")?;
        }
        for (name, unit) in columns {
            writeln!(w, "# column {name}: {unit}")?;
        }
        writeln!(w, "{}", columns.iter().map(|c| c.0).collect::<Vec<_>>().join(","))?;
        Ok(CsvFile { w, path, columns: columns.len() })
    }

    pub fn row(&mut self, fields: &[String]) -> Result<()> {
        debug_assert_eq!(fields.len(), self.columns);
        writeln!(self.w, "{}", fields.join(","))?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<PathBuf> {
        self.w.flush()?;
        Ok(self.path)
    }
}

/// Format a float for CSV: shortest round-trip representation, `nan` spelled
/// out so readers agree.
pub fn fmt(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x}")
    }
}

pub fn sha256_hex(text: &str) -> String {
    let mut h = Sha256::new();
    h.update(text.as_bytes());
    let digest = h.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub task: String,
    pub version: String,
    pub config_sha256: String,
    pub seed: u64,
    pub reproducible: bool,
    pub workers: usize,
    pub wall_time_s: f64,
    pub artifacts: Vec<String>,
    pub warnings: Vec<String>,
    /// Task-specific summary values.
    pub summary: serde_json::Value,
}

impl Manifest {
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(self)?;
        fs::write(&path, text + "\n")?;
        Ok(path)
    }
}

/// Echo the fully resolved config next to the outputs so a run can be
/// reproduced byte-for-byte from its own artifacts.
pub fn write_config_echo(dir: &Path, config_toml: &str) -> Result<PathBuf> {
    let path = dir.join("config_resolved.toml");
    fs::write(&path, config_toml)?;
    Ok(path)
}
