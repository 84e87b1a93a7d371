//! Run manifests: enough provenance to reproduce any run — the command,
//! resolved configuration, input digests, seed, and outputs.
//!
//! Commands that write files place a manifest next to their primary
//! output as `<out>.manifest.json`; read-only commands embed it in their
//! `--json` report instead.

use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::failure::Failure;

#[derive(Debug, Clone, Serialize)]
pub struct ManifestInput {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: serde_json::Value,
    pub inputs: Vec<ManifestInput>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<String>,
}

/// Hex SHA-256 of a file's bytes.
pub fn sha256_hex(path: &Path) -> Result<String, Failure> {
    let bytes =
        std::fs::read(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(digest.len() * 2);
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    Ok(hex)
}

/// Collects manifest rows as inputs are read.
#[derive(Debug, Default)]
pub struct ManifestBuilder {
    inputs: Vec<ManifestInput>,
    outputs: Vec<String>,
    seed: Option<u64>,
}

impl ManifestBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn input(&mut self, path: &Path) -> Result<(), Failure> {
        self.inputs.push(ManifestInput {
            path: path.display().to_string(),
            sha256: sha256_hex(path)?,
        });
        Ok(())
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn seed(&mut self, seed: u64) {
        self.seed = Some(seed);
    }

    pub fn finish(self, command: &str, config: serde_json::Value, started: Instant) -> RunManifest {
        RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            inputs: self.inputs,
            seed: self.seed,
            wall_clock_seconds: started.elapsed().as_secs_f64(),
            outputs: self.outputs,
        }
    }
}

impl RunManifest {
    /// Default manifest path next to a command's primary output.
    pub fn path_for(out: &Path) -> std::path::PathBuf {
        let mut name = out.as_os_str().to_os_string();
        name.push(".manifest.json");
        std::path::PathBuf::from(name)
    }

    pub fn write(&self, path: &Path) -> Result<(), Failure> {
        let body = serde_json::to_string_pretty(self).expect("manifest serialization cannot fail");
        std::fs::write(path, body + "\n")
            .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
    }

    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("manifest serialization cannot fail")
    }
}
