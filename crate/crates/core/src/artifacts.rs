//! On-disk formats: versioned CSV tables, the manifest, and run directories.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::{ProfileConfig, ReactionConfig};
use crate::error::{KppError, Result};
use crate::frontsim::{FrontGrid, FrontNumerics, FrontRun, SnapshotDiagnostics, Taint};

pub const CSV_HEADER: &str = "# kpp-front schema v1";
pub const MANIFEST_SCHEMA: &str = "kpp-front manifest v1";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SNAPSHOTS_FILE: &str = "snapshots.csv";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";

/// Writes a header comment, a column line and one row per record.
/// Floats use the shortest representation that round-trips.
pub fn write_csv(path: &Path, columns: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut out = String::with_capacity(64 * rows.len());
    out.push_str(CSV_HEADER);
    out.push('\n');
    out.push_str(&columns.join(","));
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn columns(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let bad = |reason: String| KppError::Data {
        series: path.display().to_string(),
        reason,
    };
    if lines.next() != Some(CSV_HEADER) {
        return Err(bad(format!("missing '{CSV_HEADER}' header")));
    }
    let cols: Vec<String> = lines
        .next()
        .ok_or_else(|| bad("missing column line".into()))?
        .split(',')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> = line.split(',').map(|c| c.trim().parse::<f64>()).collect();
        let row = row.map_err(|e| bad(format!("row {}: {e}", k + 1)))?;
        if row.len() != cols.len() {
            return Err(bad(format!(
                "row {} has {} cells, expected {}",
                k + 1,
                row.len(),
                cols.len()
            )));
        }
        rows.push(row);
    }
    Ok((cols, rows))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: String,
    pub tool: String,
    pub experiment: String,
    pub config: Value,
    /// Grid, numerics, taint and similar per-run records.
    pub run: Option<Value>,
    pub pass: Option<bool>,
    pub files: Vec<FileEntry>,
}

impl Manifest {
    pub fn new(experiment: &str, config: Value) -> Self {
        Self {
            schema: MANIFEST_SCHEMA.to_string(),
            tool: format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
            experiment: experiment.to_string(),
            config,
            run: None,
            pass: None,
            files: Vec::new(),
        }
    }

    /// Hashes every file in `names` (relative to `dir`) and writes the manifest.
    pub fn write(mut self, dir: &Path, names: &[String]) -> Result<PathBuf> {
        let mut sorted = names.to_vec();
        sorted.sort();
        sorted.dedup();
        self.files = sorted
            .iter()
            .map(|name| {
                let path = dir.join(name);
                Ok(FileEntry {
                    name: name.clone(),
                    sha256: sha256_file(&path)?,
                    bytes: fs::metadata(&path)?.len(),
                })
            })
            .collect::<Result<_>>()?;
        let path = dir.join(MANIFEST_FILE);
        let mut file = fs::File::create(&path)?;
        let text = serde_json::to_string_pretty(&self).map_err(|e| KppError::Io(e.to_string()))?;
        file.write_all(text.as_bytes())?;
        file.write_all(b"\n")?;
        Ok(path)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
        serde_json::from_str(&text).map_err(|e| KppError::Data {
            series: MANIFEST_FILE.into(),
            reason: e.to_string(),
        })
    }

    /// Recomputes every file hash and reports the first mismatch.
    pub fn verify_hashes(&self, dir: &Path) -> Result<()> {
        for entry in &self.files {
            let actual = sha256_file(&dir.join(&entry.name))?;
            if actual != entry.sha256 {
                return Err(KppError::Data {
                    series: entry.name.clone(),
                    reason: "content hash mismatch".into(),
                });
            }
        }
        Ok(())
    }
}

/// Per-run record stored in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub grid: FrontGrid,
    pub numerics: FrontNumerics,
    pub horizon: f64,
    pub taint: Option<Taint>,
    pub content_hash: String,
    pub reaction: ReactionConfig,
    pub initial_data: ProfileConfig,
}

/// Writes `snapshots.csv` (time, then node values) and `diagnostics.csv`,
/// returning the file names.
pub fn write_run_files(run: &FrontRun, dir: &Path) -> Result<Vec<String>> {
    fs::create_dir_all(dir)?;
    let mut cols = vec!["t".to_string()];
    cols.extend((0..run.nodes()).map(|i| format!("u{i}")));
    let rows: Vec<Vec<f64>> = run
        .times
        .iter()
        .zip(&run.snapshots)
        .map(|(t, s)| std::iter::once(*t).chain(s.iter().copied()).collect())
        .collect();
    write_csv(&dir.join(SNAPSHOTS_FILE), &cols, &rows)?;
    let diag: Vec<Vec<f64>> = run
        .diagnostics
        .iter()
        .map(|d| vec![d.t, d.mass, d.left, d.right])
        .collect();
    write_csv(
        &dir.join(DIAGNOSTICS_FILE),
        &columns(&["t", "mass", "left", "right"]),
        &diag,
    )?;
    Ok(vec![SNAPSHOTS_FILE.into(), DIAGNOSTICS_FILE.into()])
}

pub fn run_record(run: &FrontRun, reaction: &ReactionConfig, initial_data: &ProfileConfig) -> RunRecord {
    RunRecord {
        grid: run.grid,
        numerics: run.numerics,
        horizon: run.horizon,
        taint: run.taint,
        content_hash: run.content_hash(),
        reaction: reaction.clone(),
        initial_data: initial_data.clone(),
    }
}

/// Rebuilds a run from a directory written by the simulate experiment.
pub fn load_run(dir: &Path) -> Result<FrontRun> {
    let manifest = Manifest::read(dir)?;
    let record: RunRecord = manifest
        .run
        .clone()
        .ok_or_else(|| KppError::Data {
            series: MANIFEST_FILE.into(),
            reason: "manifest has no run record".into(),
        })
        .and_then(|v| {
            serde_json::from_value(v).map_err(|e| KppError::Data {
                series: MANIFEST_FILE.into(),
                reason: e.to_string(),
            })
        })?;
    let (_, rows) = read_csv(&dir.join(SNAPSHOTS_FILE))?;
    let (_, diag) = read_csv(&dir.join(DIAGNOSTICS_FILE))?;
    let expected = record.grid.nodes();
    let mut times = Vec::with_capacity(rows.len());
    let mut snapshots = Vec::with_capacity(rows.len());
    for row in rows {
        if row.len() != expected + 1 {
            return Err(KppError::Data {
                series: SNAPSHOTS_FILE.into(),
                reason: format!("row has {} nodes, grid has {expected}", row.len() - 1),
            });
        }
        times.push(row[0]);
        snapshots.push(row[1..].to_vec());
    }
    Ok(FrontRun {
        grid: record.grid,
        numerics: record.numerics,
        horizon: record.horizon,
        times,
        snapshots,
        diagnostics: diag
            .into_iter()
            .map(|r| SnapshotDiagnostics {
                t: r[0],
                mass: r[1],
                left: r[2],
                right: r[3],
            })
            .collect(),
        taint: record.taint,
        reaction: record.reaction.build(dir)?,
        initial_data: record.initial_data.build(dir)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        let rows = vec![vec![0.1, 1e-300, -3.0], vec![f64::MIN_POSITIVE, 2.5, 1.0 / 3.0]];
        write_csv(&path, &columns(&["a", "b", "c"]), &rows).unwrap();
        let (cols, back) = read_csv(&path).unwrap();
        assert_eq!(cols, columns(&["a", "b", "c"]));
        assert_eq!(back, rows);
        assert!(fs::read_to_string(&path).unwrap().starts_with(CSV_HEADER));
    }

    #[test]
    fn manifest_detects_tampering() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("x.txt"), "hello").unwrap();
        Manifest::new("t", Value::Null)
            .write(dir.path(), &["x.txt".into()])
            .unwrap();
        let m = Manifest::read(dir.path()).unwrap();
        assert_eq!(m.files[0].sha256, hex::encode(Sha256::digest(b"hello")));
        m.verify_hashes(dir.path()).unwrap();
        fs::write(dir.path().join("x.txt"), "hellO").unwrap();
        assert!(m.verify_hashes(dir.path()).is_err());
    }
}
