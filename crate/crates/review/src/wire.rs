//! Binary mesh payload: `u32` vertex count, `u32` face count, vertices as
//! `3 × f32`, faces as `3 × u32`, all little-endian.

use occgen::geometry::{TriMesh, Vec3};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub fn encode_mesh(mesh: &TriMesh) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 12 * (mesh.vertices.len() + mesh.faces.len()));
    out.extend_from_slice(&(mesh.vertices.len() as u32).to_le_bytes());
    out.extend_from_slice(&(mesh.faces.len() as u32).to_le_bytes());
    for v in &mesh.vertices {
        for c in v.iter() {
            out.extend_from_slice(&(*c as f32).to_le_bytes());
        }
    }
    for f in &mesh.faces {
        for i in f {
            out.extend_from_slice(&i.to_le_bytes());
        }
    }
    out
}

/// Inverse of [`encode_mesh`], with vertex positions widened back to f64.
pub fn decode_mesh(bytes: &[u8]) -> Result<TriMesh> {
    let word = |i: usize| -> Result<[u8; 4]> {
        bytes
            .get(4 * i..4 * i + 4)
            .map(|w| w.try_into().unwrap())
            .ok_or_else(|| Error::Wire(format!("truncated at word {i} of {} bytes", bytes.len())))
    };
    let nv = u32::from_le_bytes(word(0)?) as usize;
    let nf = u32::from_le_bytes(word(1)?) as usize;
    let expected = 8 + 12 * (nv + nf);
    if bytes.len() != expected {
        return Err(Error::Wire(format!("expected {expected} bytes, got {}", bytes.len())));
    }
    let mut vertices = Vec::with_capacity(nv);
    for i in 0..nv {
        let c = |k| f32::from_le_bytes(word(2 + 3 * i + k).unwrap()) as f64;
        vertices.push(Vec3::new(c(0), c(1), c(2)));
    }
    let base = 2 + 3 * nv;
    let mut faces = Vec::with_capacity(nf);
    for i in 0..nf {
        let c = |k| u32::from_le_bytes(word(base + 3 * i + k).unwrap());
        faces.push([c(0), c(1), c(2)]);
    }
    Ok(TriMesh::new(vertices, faces)?)
}

/// Hex SHA-256 of a payload.
pub fn mesh_hash(payload: &[u8]) -> String {
    hex::encode(Sha256::digest(payload))
}

#[cfg(test)]
mod tests {
    use super::*;
    use occgen::geometry::primitives::icosphere;

    #[test]
    fn icosphere_payload_size_and_round_trip() {
        let mesh = icosphere(4, 0.4);
        let bytes = encode_mesh(&mesh);
        assert_eq!(bytes.len(), 8 + 2562 * 12 + 5120 * 12);
        let back = decode_mesh(&bytes).unwrap();
        assert_eq!(back.faces, mesh.faces);
        assert_eq!(encode_mesh(&back), bytes);
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let bytes = encode_mesh(&icosphere(1, 0.4));
        assert!(decode_mesh(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode_mesh(&bytes[..6]).is_err());
    }
}
