use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: PathBuf,
    pub sha256: String,
}

/// Provenance record written next to every command's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Full argument vector after the program name; replaying it reproduces the outputs.
    pub args: Vec<String>,
    /// Resolved configuration as the command saw it.
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
    /// Wall time per stage in milliseconds.
    pub stage_ms: BTreeMap<String, f64>,
    /// Set when some solver stopped at its iteration cap.
    pub nonconverged: bool,
}

impl RunManifest {
    pub fn new(command: &str, args: Vec<String>, config: serde_json::Value, seeds: Vec<u64>) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            args,
            config,
            seeds,
            inputs: Vec::new(),
            outputs: Vec::new(),
            stage_ms: BTreeMap::new(),
            nonconverged: false,
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<(), CliError> {
        self.inputs.push(hash_file(path)?);
        Ok(())
    }

    pub fn add_output(&mut self, path: &Path) -> Result<(), CliError> {
        self.outputs.push(hash_file(path)?);
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text).map_err(|e| CliError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Files whose current hash differs from the recorded one.
    pub fn mismatches(&self) -> Vec<PathBuf> {
        self.inputs
            .iter()
            .chain(&self.outputs)
            .filter(|f| hash_file(&f.path).map_or(true, |h| h.sha256 != f.sha256))
            .map(|f| f.path.clone())
            .collect()
    }
}

pub fn hash_file(path: &Path) -> Result<FileHash, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(FileHash {
        path: path.to_path_buf(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}
