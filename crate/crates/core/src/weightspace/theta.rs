//! Flattened MLP weights and their global standardization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inr::mlp::{MlpParams, TENSOR_NAMES, TENSOR_SIZES};

/// Element counts of the tensors that make up a flattened network, in order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShapeSignature(pub Vec<usize>);

impl Default for ShapeSignature {
    fn default() -> Self {
        Self(TENSOR_SIZES.to_vec())
    }
}

impl ShapeSignature {
    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Start offset of every tensor in the flat vector.
    pub fn offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.0
            .iter()
            .map(|&n| {
                let o = acc;
                acc += n;
                o
            })
            .collect()
    }
}

/// Concatenates the tensors in signature order.
pub fn flatten(params: &MlpParams) -> Result<Vec<f32>> {
    if params.tensors.len() != TENSOR_SIZES.len() {
        return Err(Error::ShapeMismatch {
            tensor: "tensor list".into(),
            expected: TENSOR_SIZES.len(),
            actual: params.tensors.len(),
        });
    }
    for (i, (t, &n)) in params.tensors.iter().zip(&TENSOR_SIZES).enumerate() {
        if t.len() != n {
            return Err(Error::ShapeMismatch {
                tensor: TENSOR_NAMES[i].into(),
                expected: n,
                actual: t.len(),
            });
        }
    }
    Ok(params.to_flat())
}

pub fn unflatten(theta: &[f32], sig: &ShapeSignature) -> Result<MlpParams> {
    if sig.0 != TENSOR_SIZES {
        return Err(Error::invalid(format!("unsupported signature {:?}", sig.0)));
    }
    MlpParams::from_flat(theta)
}

/// Scalar mean and standard deviation over every entry of a theta set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaStats {
    pub mean: f64,
    pub std: f64,
}

impl Default for ThetaStats {
    fn default() -> Self {
        Self { mean: 0.0, std: 1.0 }
    }
}

impl ThetaStats {
    pub fn fit(thetas: &[Vec<f32>]) -> Result<Self> {
        let n: usize = thetas.iter().map(Vec::len).sum();
        if n == 0 {
            return Err(Error::invalid("no values to fit statistics on"));
        }
        let mean = thetas.iter().flatten().map(|&v| v as f64).sum::<f64>() / n as f64;
        let var = thetas.iter().flatten().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n as f64;
        let stats = Self { mean, std: var.sqrt() };
        stats.validate()?;
        Ok(stats)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.std > 0.0 && self.std.is_finite() && self.mean.is_finite()) {
            return Err(Error::invalid(format!("bad theta statistics {self:?}")));
        }
        Ok(())
    }

    pub fn standardize(&self, theta: &[f32]) -> Vec<f32> {
        theta.iter().map(|&v| ((v as f64 - self.mean) / self.std) as f32).collect()
    }

    pub fn destandardize(&self, theta: &[f32]) -> Vec<f32> {
        theta.iter().map(|&v| (v as f64 * self.std + self.mean) as f32).collect()
    }
}

/// Sinusoidal embedding of a diffusion step: `dim/2` sines followed by
/// `dim/2` cosines at frequencies `10000^(−2k/dim)`. Odd `dim` pads a zero.
pub fn timestep_embedding(t: usize, dim: usize) -> Vec<f32> {
    let half = dim / 2;
    let mut out = vec![0.0f32; dim];
    for k in 0..half {
        let freq = 10000f64.powf(-2.0 * k as f64 / dim as f64);
        let (s, c) = (t as f64 * freq).sin_cos();
        out[k] = s as f32;
        out[half + k] = c as f32;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inr::mlp::PARAM_COUNT;
    use crate::rng::seeded;
    use rand::Rng;

    #[test]
    fn flatten_round_trip() {
        let p = MlpParams::init(&mut seeded(1));
        let theta = flatten(&p).unwrap();
        assert_eq!(theta.len(), PARAM_COUNT);
        assert_eq!(unflatten(&theta, &ShapeSignature::default()).unwrap(), p);
        let zero = unflatten(&vec![0.0; PARAM_COUNT], &ShapeSignature::default()).unwrap();
        assert_eq!(zero, MlpParams::zeros());
        assert!(unflatten(&vec![0.0; PARAM_COUNT - 1], &ShapeSignature::default()).is_err());
    }

    #[test]
    fn resized_tensor_is_named() {
        let mut p = MlpParams::zeros();
        p.tensors[2].push(0.0);
        let err = flatten(&p).unwrap_err().to_string();
        assert!(err.contains("W2"), "{err}");
    }

    #[test]
    fn standardization_inverts() {
        let mut rng = seeded(2);
        let thetas: Vec<Vec<f32>> = (0..3).map(|_| (0..100).map(|_| rng.random_range(-0.3..0.7)).collect()).collect();
        let stats = ThetaStats::fit(&thetas).unwrap();
        let z: Vec<Vec<f32>> = thetas.iter().map(|t| stats.standardize(t)).collect();
        let zs = ThetaStats::fit(&z).unwrap();
        assert!(zs.mean.abs() < 1e-6 && (zs.std - 1.0).abs() < 1e-6);
        // f32 storage of z bounds the round trip relative to the vector, not each entry
        for (t, zt) in thetas.iter().zip(&z) {
            let back = stats.destandardize(zt);
            let err: f64 = t.iter().zip(&back).map(|(a, b)| ((a - b) as f64).powi(2)).sum::<f64>().sqrt();
            let norm: f64 = t.iter().map(|a| (*a as f64).powi(2)).sum::<f64>().sqrt();
            assert!(err / norm < 1e-6, "relative error {}", err / norm);
        }
        assert_eq!(ThetaStats::default().standardize(&thetas[0]), thetas[0]);
    }

    #[test]
    fn embedding_shape_and_origin() {
        let e = timestep_embedding(0, 64);
        assert_eq!(e.len(), 64);
        assert!(e[..32].iter().all(|&v| v == 0.0));
        assert!(e[32..].iter().all(|&v| v == 1.0));
    }

    #[test]
    fn embeddings_of_distinct_steps_differ() {
        let dim = 64;
        let all: Vec<Vec<f32>> = (1..=1000).map(|t| timestep_embedding(t, dim)).collect();
        let mut min = f32::INFINITY;
        for i in 0..all.len() {
            for j in i + 1..all.len() {
                let d: f32 = all[i].iter().zip(&all[j]).map(|(a, b)| (a - b).powi(2)).sum();
                min = min.min(d);
            }
        }
        assert!(min > 0.0);
    }
}
