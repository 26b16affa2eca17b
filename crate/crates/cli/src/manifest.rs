use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Everything that determines the numerical outputs of a run.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub potential: mml::potential::PotentialSpec,
    pub seed: u64,
    pub params: Value,
}

impl RunConfig {
    pub fn hash(&self) -> Result<String> {
        Ok(sha256_hex(&serde_json::to_vec(self)?))
    }
}

#[derive(Debug, Serialize)]
pub struct OutputFile {
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Versions {
    pub mml_cli: &'static str,
    pub mml_core: &'static str,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub config: RunConfig,
    pub config_hash: String,
    pub versions: Versions,
    pub threads: usize,
    pub elapsed_seconds: f64,
    pub outputs: Vec<OutputFile>,
}

impl Manifest {
    pub fn new(config: RunConfig, dir: &Path, files: &[PathBuf], threads: usize, elapsed_seconds: f64) -> Result<Self> {
        let mut outputs = Vec::new();
        for f in files {
            let bytes = std::fs::read(dir.join(f)).with_context(|| format!("reading back {}", f.display()))?;
            outputs.push(OutputFile { file: f.display().to_string(), bytes: bytes.len() as u64, sha256: sha256_hex(&bytes) });
        }
        Ok(Manifest {
            config_hash: config.hash()?,
            config,
            versions: Versions { mml_cli: env!("CARGO_PKG_VERSION"), mml_core: mml::VERSION },
            threads,
            elapsed_seconds,
            outputs,
        })
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(self)? + "\n").with_context(|| format!("writing {}", path.display()))
    }
}
