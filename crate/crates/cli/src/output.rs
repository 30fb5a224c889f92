//! Output directories with hashed artifact manifests.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub seed: u64,
    pub config: RunConfig,
    pub artifacts: Vec<Artifact>,
}

impl Manifest {
    pub fn artifact(&self, path: &str) -> Option<&Artifact> {
        self.artifacts.iter().find(|a| a.path == path)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Fixed-precision float cell so reruns compare byte for byte.
pub fn fmt_f(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        let s = format!("{v:.6}");
        if s == "-0.000000" {
            "0.000000".into()
        } else {
            s
        }
    }
}

pub struct OutputDir {
    root: PathBuf,
    artifacts: Vec<Artifact>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            artifacts: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.path(name);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.artifacts.retain(|a| a.path != name);
        self.artifacts.push(Artifact {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(path)
    }

    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Data(e.to_string()))?;
        self.write(name, &bytes)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Data(e.to_string()))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Write `<command>.manifest.json` listing every artifact so far.
    pub fn finish(self, command: &str, config: &RunConfig) -> Result<Manifest> {
        let manifest = Manifest {
            command: command.to_string(),
            seed: config.seed,
            config: config.clone(),
            artifacts: self.artifacts,
        };
        let path = self.root.join(format!("{command}.manifest.json"));
        let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Data(e.to_string()))?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(manifest)
    }
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| CliError::io(path, e))
}
