use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::io::{read_bytes, sha256_hex, OutDir};

/// Provenance record written next to every command's outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub version: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub wall_time_secs: f64,
}

/// Collects input digests while a command runs.
pub struct ManifestBuilder {
    command: String,
    inputs: BTreeMap<String, String>,
    start: Instant,
}

impl ManifestBuilder {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            inputs: BTreeMap::new(),
            start: Instant::now(),
        }
    }

    /// Reads an input file and records its digest.
    pub fn read(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = read_bytes(path)?;
        self.inputs
            .insert(path.display().to_string(), sha256_hex(&bytes));
        Ok(bytes)
    }

    /// Reads and parses a JSON input.
    pub fn json<T: DeserializeOwned>(&mut self, path: &Path) -> Result<T> {
        let bytes = self.read(path)?;
        serde_json::from_slice(&bytes).map_err(|source| CliError::Parse {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Like [`Self::json`], falling back to the default when no path is given.
    pub fn json_or_default<T: DeserializeOwned + Default>(
        &mut self,
        path: Option<&Path>,
    ) -> Result<T> {
        path.map_or_else(|| Ok(T::default()), |p| self.json(p))
    }

    pub fn finish(
        self,
        out: &mut OutDir,
        config: serde_json::Value,
        seed: Option<u64>,
    ) -> Result<()> {
        let manifest = RunManifest {
            command: self.command,
            config,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: self.inputs,
            outputs: out.written().iter().cloned().collect(),
            wall_time_secs: self.start.elapsed().as_secs_f64(),
        };
        out.write_json("manifest.json", &manifest)
    }
}
