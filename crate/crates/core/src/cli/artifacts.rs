//! Artifact files and the content-hashed manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Version of every JSON report and of the manifest layout.
pub const SCHEMA_VERSION: u32 = 1;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArtifactEntry {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

/// Trajectory dropped from an ensemble, with the reason.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Abort {
    pub trajectory: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub scenario: String,
    /// Effective configuration without the output directory.
    pub config: String,
    pub artifacts: Vec<ArtifactEntry>,
    pub completed_trajectories: Option<u64>,
    pub aborted: Vec<Abort>,
}

/// Writes files into one directory and records their hashes.
#[derive(Debug)]
pub struct ArtifactSet {
    dir: PathBuf,
    entries: Vec<ArtifactEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl ArtifactSet {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::Io(format!("cannot create {}: {e}", dir.display())))?;
        Ok(ArtifactSet { dir: dir.to_path_buf(), entries: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        if name == MANIFEST_NAME || self.entries.iter().any(|e| e.file == name) {
            return Err(Error::InvalidArgument(format!("artifact {name} written twice")));
        }
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::Io(format!("cannot write {}: {e}", path.display())))?;
        self.entries.push(ArtifactEntry { file: name.to_string(), sha256: sha256_hex(bytes), bytes: bytes.len() });
        Ok(())
    }

    /// Writes `value` as pretty JSON with a trailing newline.
    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Schema(e.to_string()))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn entries(&self) -> &[ArtifactEntry] {
        &self.entries
    }

    pub fn finish(self, scenario: &str, config: String, completed: Option<u64>, aborted: Vec<Abort>) -> Result<Manifest> {
        let manifest = Manifest {
            schema_version: SCHEMA_VERSION,
            scenario: scenario.to_string(),
            config,
            artifacts: self.entries,
            completed_trajectories: completed,
            aborted,
        };
        let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Schema(e.to_string()))?;
        text.push('\n');
        let path = self.dir.join(MANIFEST_NAME);
        fs::write(&path, text).map_err(|e| Error::Io(format!("cannot write {}: {e}", path.display())))?;
        Ok(manifest)
    }
}

/// In-memory CSV table with a fixed header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Table { header: header.iter().map(|s| s.as_ref().to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.header.len(), "row width differs from header");
        self.rows.push(row.iter().map(|&x| crate::trajectories::fmt_f64(x)).collect());
    }

    pub fn to_csv(&self) -> Vec<u8> {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s.into_bytes()
    }
}
