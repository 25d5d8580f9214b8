use std::fs;
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Provenance of one invocation; written once into its output directory.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub master_seed: Option<u64>,
    pub inputs: Vec<InputDigest>,
    /// Files written by the run, relative to the manifest's directory.
    pub outputs: Vec<String>,
    pub tool_version: String,
    pub started_at: String,
    pub finished_at: String,
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

pub struct ManifestBuilder {
    manifest: RunManifest,
    dir: PathBuf,
}

impl ManifestBuilder {
    pub fn start<C: Serialize>(command: &str, config: &C, master_seed: Option<u64>, dir: &Path) -> Self {
        Self {
            manifest: RunManifest {
                command: command.into(),
                config: serde_json::to_value(config).expect("arguments serialise"),
                master_seed,
                inputs: Vec::new(),
                outputs: Vec::new(),
                tool_version: env!("CARGO_PKG_VERSION").into(),
                started_at: now(),
                finished_at: String::new(),
            },
            dir: dir.to_path_buf(),
        }
    }

    /// Reads an input file, records its digest, and returns its bytes.
    pub fn read_input(&mut self, path: &Path) -> Result<Vec<u8>, CliError> {
        let bytes = fs::read(path).map_err(|e| CliError::io(format!("cannot read {}: {e}", path.display())))?;
        self.manifest.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
        Ok(bytes)
    }

    /// Writes `bytes` as `name` inside the output directory.
    pub fn write_output(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        fs::create_dir_all(&self.dir)
            .map_err(|e| CliError::io(format!("cannot create {}: {e}", self.dir.display())))?;
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))?;
        self.manifest.outputs.push(name.to_string());
        Ok(path)
    }

    pub fn finish(mut self) -> Result<PathBuf, CliError> {
        self.manifest.finished_at = now();
        let text = serde_json::to_string_pretty(&self.manifest).expect("manifest serialises");
        fs::create_dir_all(&self.dir)
            .map_err(|e| CliError::io(format!("cannot create {}: {e}", self.dir.display())))?;
        let path = self.dir.join(MANIFEST_FILE);
        fs::write(&path, text).map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }
}
