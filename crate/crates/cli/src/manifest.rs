use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::failure::Outcome;

/// Provenance record written next to every command's outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: serde_json::Value,
    /// SHA-256 of every input file read, keyed by path.
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub version: &'static str,
    pub seed: Option<u64>,
    /// Seconds since the Unix epoch. Kept out of the data files so that
    /// reruns produce identical CSVs.
    pub timestamp: u64,
}

impl RunManifest {
    pub fn new(command: &str, parameters: serde_json::Value) -> Self {
        Self {
            command: command.to_string(),
            parameters,
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            version: env!("CARGO_PKG_VERSION"),
            seed: None,
            timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        }
    }

    /// Reads a file and records its hash.
    pub fn read(&mut self, path: &Path) -> Outcome<String> {
        let bytes = fs::read(path)?;
        self.inputs.insert(path.display().to_string(), sha256(&bytes));
        String::from_utf8(bytes).map_err(|e| crate::failure::Failure::Inconsistent(format!("{}: {e}", path.display())))
    }

    /// Writes an output file into `dir` and records it.
    pub fn write(&mut self, dir: &Path, name: &str, bytes: &[u8]) -> Outcome<PathBuf> {
        let path = dir.join(name);
        fs::write(&path, bytes)?;
        self.outputs.push(name.to_string());
        Ok(path)
    }

    pub fn finish(self, dir: &Path) -> Outcome {
        let text = serde_json::to_string_pretty(&self)?;
        fs::write(dir.join("manifest.json"), text + "\n")?;
        Ok(())
    }
}

pub fn sha256(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
