use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::geometry::Vec3;

/// Positional-encoding settings.
///
/// The encoding of a point `p` is laid out as
/// `[p, sin(f₀p), cos(f₀p), sin(f₁p), cos(f₁p), …]` where every block is the
/// three coordinates in x, y, z order and `f_k = 2ᵏ·base`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeConfig {
    pub num_frequencies: usize,
    pub include_input: bool,
    pub base: f64,
}

impl Default for PeConfig {
    fn default() -> Self {
        Self {
            num_frequencies: 4,
            include_input: true,
            base: PI,
        }
    }
}

impl PeConfig {
    pub fn encoded_dim(&self) -> usize {
        let raw = if self.include_input { 3 } else { 0 };
        raw + 3 * 2 * self.num_frequencies
    }

    /// Writes the encoding of `p` into `out[..encoded_dim()]`.
    pub fn encode_into(&self, p: &Vec3, out: &mut [f32]) {
        let mut o = 0;
        if self.include_input {
            for a in 0..3 {
                out[o + a] = p[a] as f32;
            }
            o += 3;
        }
        // Higher octaves by the double-angle identities, in f64.
        let mut sc = [(0.0, 0.0); 3];
        for (a, v) in sc.iter_mut().enumerate() {
            *v = (self.base * p[a]).sin_cos();
        }
        for _ in 0..self.num_frequencies {
            for (a, v) in sc.iter_mut().enumerate() {
                out[o + a] = v.0 as f32;
                out[o + 3 + a] = v.1 as f32;
                *v = (2.0 * v.0 * v.1, v.1 * v.1 - v.0 * v.0);
            }
            o += 6;
        }
    }
}

pub fn positional_encode(p: &Vec3, cfg: &PeConfig) -> Vec<f32> {
    let mut out = vec![0.0; cfg.encoded_dim()];
    cfg.encode_into(p, &mut out);
    out
}
