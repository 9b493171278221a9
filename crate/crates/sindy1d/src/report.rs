//! Run reports: a JSON report per run plus CSV side files with plot-ready
//! data. Reports embed the resolved configuration and seed so every run is
//! reproducible from its own report.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::library::MonomialTerm;

#[derive(Debug, Clone, Serialize)]
pub struct LibraryEntry {
    pub name: String,
    pub dim: [i32; 2],
}

pub fn library_manifest(terms: &[MonomialTerm]) -> Vec<LibraryEntry> {
    terms
        .iter()
        .map(|t| LibraryEntry {
            name: t.name.clone(),
            dim: [t.dim.length, t.dim.time],
        })
        .collect()
}

/// Top-level report written as `report.json` in the output directory.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub tool_version: String,
    pub subcommand: String,
    pub seed: u64,
    pub config: BTreeMap<String, BTreeMap<String, String>>,
    pub library: Vec<LibraryEntry>,
    /// Wall-clock stage timings; excluded from reproducibility comparisons.
    pub timings_ms: BTreeMap<String, u128>,
    /// Largest accumulated sample count across all Gram systems of the run.
    pub peak_rows: u64,
    /// max(Gram bytes, largest materialized batch bytes).
    pub peak_memory_bytes: u64,
    pub results: serde_json::Value,
}

impl RunReport {
    pub fn new(subcommand: &str, seed: u64) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            subcommand: subcommand.to_string(),
            seed,
            config: BTreeMap::new(),
            library: Vec::new(),
            timings_ms: BTreeMap::new(),
            peak_rows: 0,
            peak_memory_bytes: 0,
            results: serde_json::Value::Null,
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join("report.json");
        let mut file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(&mut file, self)?;
        file.write_all(b"\n")?;
        Ok(())
    }
}

/// Writes a CSV file with the given header and row formatter.
pub fn write_csv<T>(
    path: &Path,
    header: &str,
    rows: &[T],
    mut format_row: impl FnMut(&T) -> String,
) -> Result<()> {
    let mut out = String::with_capacity(rows.len() * 32 + header.len() + 1);
    out.push_str(header);
    out.push('\n');
    for row in rows {
        out.push_str(&format_row(row));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}
