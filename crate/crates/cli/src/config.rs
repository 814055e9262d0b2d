//! One JSON document per run; command-line flags override its fields.

use std::path::Path;

use occgen::diffusion::{SampleConfig, ScheduleConfig, TrainConfig};
use occgen::inr::FitConfig;
use occgen::weightspace::DenoiserConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub fit: FitConfig,
    pub train: TrainConfig,
    pub model: DenoiserConfig,
    pub schedule: ScheduleConfig,
    pub sample: SampleConfig,
    /// Marching-cubes lattice size for reconstructions.
    pub resolution: usize,
    /// Surface samples per mesh for Chamfer, NC and F-Score after fitting.
    pub metric_points: usize,
    pub viou_samples: usize,
    /// Surface samples per mesh for set metrics.
    pub set_points: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            fit: FitConfig::default(),
            train: TrainConfig::default(),
            model: DenoiserConfig::default(),
            schedule: ScheduleConfig::default(),
            sample: SampleConfig {
                count: 16,
                ..SampleConfig::default()
            },
            resolution: 128,
            metric_points: 100_000,
            viou_samples: occgen::metrics::DEFAULT_VIOU_SAMPLES,
            set_points: 2048,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let bytes = std::fs::read(p)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
                serde_json::from_slice(&bytes)
                    .map_err(|e| CliError::Usage(format!("config {} is not valid: {e}", p.display())))
            }
        }
    }

    /// One seed for every stage.
    pub fn set_seed(&mut self, seed: u64) {
        self.fit.seed = seed;
        self.train.seed = seed;
        self.model.seed = seed;
        self.sample.seed = seed;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_documents_fill_defaults() {
        let c: RunConfig = serde_json::from_str(r#"{"fit": {"epochs": 5}, "model": {"n_emb": 64, "heads": 4}}"#).unwrap();
        assert_eq!(c.fit.epochs, 5);
        assert_eq!(c.fit.minibatch, FitConfig::default().minibatch);
        assert_eq!(c.model.n_emb, 64);
        assert_eq!(c.model.layers, DenoiserConfig::default().layers);
        assert_eq!(c.resolution, 128);
    }
}
