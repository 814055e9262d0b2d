//! Denoiser checkpoint files.
//!
//! Layout: the 8-byte magic `HDXFMR01`, a little-endian `u32` header length,
//! a UTF-8 JSON [`DenoiserHeader`], then every model parameter as a
//! little-endian `f32` in the layout order documented on
//! [`TransformerDenoiser`].

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::theta::{ShapeSignature, ThetaStats};
use super::transformer::{DenoiserConfig, TransformerDenoiser};
use crate::diffusion::ScheduleConfig;
use crate::error::{Error, Result};
use crate::inr::checkpoint::{push_f32s, read_f32s, read_header, write_atomic, write_header};

pub const MAGIC: &[u8; 8] = b"HDXFMR01";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenoiserHeader {
    pub config: DenoiserConfig,
    pub signature: ShapeSignature,
    pub stats: ThetaStats,
    pub schedule: ScheduleConfig,
    pub epoch: usize,
    pub param_count: usize,
}

/// A trained model with everything needed to sample from it.
#[derive(Debug, Clone)]
pub struct DenoiserCheckpoint {
    pub model: TransformerDenoiser,
    pub stats: ThetaStats,
    pub schedule: ScheduleConfig,
    pub epoch: usize,
}

impl DenoiserCheckpoint {
    pub fn header(&self) -> DenoiserHeader {
        DenoiserHeader {
            config: *self.model.config(),
            signature: self.model.signature().clone(),
            stats: self.stats,
            schedule: self.schedule,
            epoch: self.epoch,
            param_count: self.model.param_count(),
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(self.model.param_count() * 4 + 512);
        write_header(&mut out, MAGIC, &self.header())?;
        push_f32s(&mut out, self.model.params());
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (h, payload): (DenoiserHeader, _) = read_header(bytes, MAGIC)?;
        h.stats.validate()?;
        h.schedule.validate()?;
        let params = read_f32s(payload, h.param_count)?;
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::Checkpoint("non-finite parameter".into()));
        }
        let model = TransformerDenoiser::from_params(h.config, h.signature, params)?;
        Ok(Self {
            model,
            stats: h.stats,
            schedule: h.schedule,
            epoch: h.epoch,
        })
    }
}

pub fn save_denoiser(path: impl AsRef<Path>, ckpt: &DenoiserCheckpoint) -> Result<()> {
    write_atomic(path.as_ref(), &ckpt.to_bytes()?)
}

pub fn load_denoiser(path: impl AsRef<Path>) -> Result<DenoiserCheckpoint> {
    let path = path.as_ref();
    DenoiserCheckpoint::from_bytes(&std::fs::read(path)?).map_err(|e| match e {
        Error::Checkpoint(m) => Error::Checkpoint(format!("{}: {m}", path.display())),
        other => other,
    })
}
