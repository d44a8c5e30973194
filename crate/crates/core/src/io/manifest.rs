//! Run manifest: which files a command wrote, with sizes and hashes.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{read_file, write_file};
use crate::error::{Error, Result};

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputEntry {
    /// Relative to the manifest's directory when possible.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub seed: u64,
    pub config_sha256: String,
    pub outputs: Vec<OutputEntry>,
}

impl Manifest {
    pub fn new(command: &str, seed: u64, config_sha256: String) -> Self {
        Self {
            command: command.to_string(),
            seed,
            config_sha256,
            outputs: Vec::new(),
        }
    }

    /// Hashes `path` and records it, relative to `root` when inside it.
    pub fn record(&mut self, root: &Path, path: &Path) -> Result<()> {
        let bytes = read_file(path)?;
        let shown = path.strip_prefix(root).unwrap_or(path);
        self.outputs.push(OutputEntry {
            path: shown.to_string_lossy().replace('\\', "/"),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    pub fn record_all<'a>(&mut self, root: &Path, paths: impl IntoIterator<Item = &'a PathBuf>) -> Result<()> {
        paths.into_iter().try_for_each(|p| self.record(root, p))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Config(format!("manifest: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        write_file(path, text.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = read_file(path)?;
        serde_json::from_slice(&bytes).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}
