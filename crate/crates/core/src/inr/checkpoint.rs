//! MLP checkpoint files.
//!
//! Layout: the 8-byte magic `INRMLP01`, a little-endian `u32` header length,
//! a UTF-8 JSON [`MlpHeader`], then every parameter as a little-endian `f32`
//! in tensor order `W1 b1 W2 b2 W3 b3 W4 b4`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::encoding::PeConfig;
use super::mlp::{MlpParams, PARAM_COUNT, TENSOR_SIZES};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"INRMLP01";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpHeader {
    pub signature: Vec<usize>,
    pub pe: PeConfig,
    pub seed: u64,
}

impl MlpHeader {
    pub fn new(seed: u64) -> Self {
        Self {
            signature: TENSOR_SIZES.to_vec(),
            pe: PeConfig::default(),
            seed,
        }
    }
}

/// Writes a length-prefixed JSON header after `magic`.
pub(crate) fn write_header<H: Serialize>(out: &mut Vec<u8>, magic: &[u8; 8], header: &H) -> Result<()> {
    let json = serde_json::to_vec(header)?;
    out.extend_from_slice(magic);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    Ok(())
}

/// Parses magic and header; returns the header and the remaining payload.
pub(crate) fn read_header<'b, H: for<'de> Deserialize<'de>>(bytes: &'b [u8], magic: &[u8; 8]) -> Result<(H, &'b [u8])> {
    if bytes.len() < 12 || &bytes[..8] != magic {
        return Err(Error::Checkpoint(format!(
            "missing magic {}",
            String::from_utf8_lossy(magic)
        )));
    }
    let len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = &bytes[12..];
    if body.len() < len {
        return Err(Error::Checkpoint("truncated header".into()));
    }
    let header = serde_json::from_slice(&body[..len])?;
    Ok((header, &body[len..]))
}

pub(crate) fn push_f32s(out: &mut Vec<u8>, values: &[f32]) {
    out.reserve(values.len() * 4);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub(crate) fn read_f32s(payload: &[u8], expected: usize) -> Result<Vec<f32>> {
    if payload.len() != expected * 4 {
        return Err(Error::Checkpoint(format!(
            "payload holds {} bytes, expected {}",
            payload.len(),
            expected * 4
        )));
    }
    Ok(payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

/// Writes `bytes` next to `path` and renames, so readers never see a
/// partial file.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn mlp_to_bytes(params: &MlpParams, header: &MlpHeader) -> Result<Vec<u8>> {
    params.validate()?;
    let mut out = Vec::with_capacity(PARAM_COUNT * 4 + 256);
    write_header(&mut out, MAGIC, header)?;
    for t in &params.tensors {
        push_f32s(&mut out, t);
    }
    Ok(out)
}

pub fn mlp_from_bytes(bytes: &[u8]) -> Result<(MlpParams, MlpHeader)> {
    let (header, payload): (MlpHeader, _) = read_header(bytes, MAGIC)?;
    if header.signature != TENSOR_SIZES {
        return Err(Error::Checkpoint(format!(
            "unsupported shape signature {:?}",
            header.signature
        )));
    }
    if header.pe != PeConfig::default() {
        return Err(Error::Checkpoint("unsupported positional encoding".into()));
    }
    let params = MlpParams::from_flat(&read_f32s(payload, PARAM_COUNT)?)?;
    params.validate()?;
    Ok((params, header))
}

pub fn save_mlp(path: impl AsRef<Path>, params: &MlpParams, header: &MlpHeader) -> Result<()> {
    write_atomic(path.as_ref(), &mlp_to_bytes(params, header)?)
}

pub fn load_mlp(path: impl AsRef<Path>) -> Result<(MlpParams, MlpHeader)> {
    let path = path.as_ref();
    mlp_from_bytes(&std::fs::read(path)?).map_err(|e| match e {
        Error::Checkpoint(m) => Error::Checkpoint(format!("{}: {m}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn round_trip_is_bitwise() {
        let p = MlpParams::init(&mut seeded(3));
        let bytes = mlp_to_bytes(&p, &MlpHeader::new(3)).unwrap();
        assert_eq!(&bytes[..8], MAGIC);
        let (q, h) = mlp_from_bytes(&bytes).unwrap();
        assert_eq!(p, q);
        assert_eq!(h.seed, 3);
    }

    #[test]
    fn truncation_and_bad_magic_fail() {
        let bytes = mlp_to_bytes(&MlpParams::zeros(), &MlpHeader::new(0)).unwrap();
        assert!(mlp_from_bytes(&bytes[..bytes.len() - 4]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(mlp_from_bytes(&bad), Err(Error::Checkpoint(_))));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a/b.mlp");
        let p = MlpParams::init(&mut seeded(4));
        save_mlp(&path, &p, &MlpHeader::new(4)).unwrap();
        assert_eq!(load_mlp(&path).unwrap().0, p);
    }
}
