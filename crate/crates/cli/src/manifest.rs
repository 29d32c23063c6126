use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use slir_core::io::RunConfig;

use crate::error::CliError;

/// Written as `manifest.json` next to each command's outputs. It holds no
/// timestamps, so identical runs produce identical bytes.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub version: &'static str,
    pub command: String,
    pub seed: u64,
    pub config_sha256: String,
    pub config: RunConfig,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| {
        CliError::new("io", format!("{}: {e}", path.display()))
            .with("path", path.display().to_string())
    })?;
    Ok(sha256_bytes(&bytes))
}

impl Manifest {
    /// The hashed config leaves out `output_dir` so moving a run does not change it.
    pub fn new(command: &str, config: &RunConfig) -> Result<Self, CliError> {
        let config = RunConfig {
            output_dir: None,
            ..config.clone()
        };
        let json =
            serde_json::to_vec(&config).map_err(|e| CliError::new("config", e.to_string()))?;
        Ok(Self {
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            seed: config.seed,
            config_sha256: sha256_bytes(&json),
            config,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        })
    }

    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        self.inputs
            .insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    /// Hashes the listed files in `dir` and writes `manifest.json` there.
    pub fn finish(mut self, dir: &Path, outputs: &[&str]) -> Result<PathBuf, CliError> {
        for name in outputs {
            self.outputs
                .insert(name.to_string(), sha256_file(&dir.join(name))?);
        }
        let path = dir.join("manifest.json");
        let json = serde_json::to_string_pretty(&self)
            .map_err(|e| CliError::new("config", e.to_string()))?;
        std::fs::write(&path, json + "\n")?;
        Ok(path)
    }
}
