//! Reproducibility block written next to every command's outputs.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::manifest::write_atomic;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reproducibility {
    pub command: String,
    pub seed: u64,
    pub deterministic: bool,
    /// The fully resolved configuration after flag overrides.
    pub config: serde_json::Value,
    pub config_hash: String,
    /// SHA-256 of every input file, keyed by the path as given.
    pub inputs: BTreeMap<String, String>,
    pub version: String,
    pub platform: String,
}

impl Reproducibility {
    pub fn new(command: &str, seed: u64, deterministic: bool, config: &impl Serialize) -> Result<Self> {
        let config = serde_json::to_value(config)?;
        Ok(Self {
            command: command.to_string(),
            seed,
            deterministic,
            config_hash: sha256_hex(&serde_json::to_vec(&config)?),
            config,
            inputs: BTreeMap::new(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            platform: format!("{}-{}", std::env::consts::ARCH, std::env::consts::OS),
        })
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        let digest = sha256_hex(&std::fs::read(path)?);
        self.inputs.insert(path.display().to_string(), digest);
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &serde_json::to_vec_pretty(self)?)
    }

    /// True when `path` holds a block for the same command, config and
    /// inputs, i.e. the outputs next to it are already up to date.
    pub fn matches_file(&self, path: &Path) -> bool {
        std::fs::read(path)
            .ok()
            .and_then(|b| serde_json::from_slice::<Reproducibility>(&b).ok())
            .is_some_and(|old| {
                old.command == self.command
                    && old.config_hash == self.config_hash
                    && old.inputs == self.inputs
                    && old.deterministic == self.deterministic
            })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
