use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::RunError;

/// Everything needed to regenerate a run: the config bytes (by hash), the
/// seed, the subcommand and the build version. Output hashes let a rerun be
/// compared without keeping the old files.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub subcommand: String,
    pub version: String,
    pub config_sha256: String,
    pub master_seed: u64,
    pub status: String,
    pub summary: String,
    pub outputs: Vec<OutputEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputEntry {
    pub file: String,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl Manifest {
    pub fn write(&self, path: &Path) -> Result<(), RunError> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| RunError::Setup(e.to_string()))?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| RunError::io(format!("writing {}", path.display()), e))
    }
}
