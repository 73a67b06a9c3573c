//! The `run.json` sidecar written next to every run's outputs.

use std::hash::Hasher;
use std::path::{Path, PathBuf};

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::CliError;

pub const METADATA_FILE: &str = "run.json";

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = FnvHasher::default();
    h.write(bytes);
    h.finish()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub role: String,
    pub path: String,
    pub bytes: u64,
    pub fnv1a64: String,
}

impl FileDigest {
    fn of(role: &str, path: &Path) -> Result<Self, CliError> {
        let data = std::fs::read(path)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        Ok(FileDigest {
            role: role.to_string(),
            path: path.display().to_string(),
            bytes: data.len() as u64,
            fnv1a64: format!("{:016x}", fnv1a64(&data)),
        })
    }
}

/// Everything needed to repeat a run: the command, the fully resolved
/// configuration and digests of what went in and came out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub command: String,
    pub version: String,
    pub seed: Option<u64>,
    pub config: Option<RunConfig>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    /// command-specific facts such as split sizes
    pub notes: serde_json::Map<String, serde_json::Value>,
}

impl Metadata {
    pub fn new(command: &str, config: Option<&RunConfig>) -> Self {
        Metadata {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: config.map(|c| c.seed),
            config: config.cloned(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            notes: serde_json::Map::new(),
        }
    }

    pub fn input(&mut self, role: &str, path: &Path) -> Result<(), CliError> {
        self.inputs.push(FileDigest::of(role, path)?);
        Ok(())
    }

    pub fn note(&mut self, key: &str, value: impl Serialize) {
        self.notes.insert(
            key.to_string(),
            serde_json::to_value(value).expect("note serializes"),
        );
    }

    /// Digests the listed output files (relative to `dir`) and writes the
    /// sidecar into `dir`.
    pub fn finish(mut self, dir: &Path, outputs: &[&str]) -> Result<(), CliError> {
        for name in outputs {
            let mut d = FileDigest::of("output", &dir.join(name))?;
            d.path = name.to_string();
            self.outputs.push(d);
        }
        let text = serde_json::to_string_pretty(&self).expect("metadata serializes");
        write_file(&dir.join(METADATA_FILE), text.as_bytes())
    }
}

pub(crate) fn write_file(path: &PathBuf, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes)
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}
