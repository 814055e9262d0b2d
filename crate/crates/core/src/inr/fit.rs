//! Per-shape fitting: sample once, label by winding number, then Adam over
//! shuffled minibatches.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::encoding::PeConfig;
use super::mlp::{backward_flat, bce_with_targets, encode_points, forward_gathered, MlpParams, MlpWorkspace, PARAM_COUNT};
use crate::error::{Error, Result};
use crate::geometry::sampling::NEAR_SURFACE_SIGMA;
use crate::geometry::{occupancy_labels, qa, sample_near_surface, sample_volume_points, LabeledPointSet, TriMesh};
use crate::optim::{Adam, AdamConfig};
use crate::rng::derive;
use crate::tensor::FlushSubnormals;

const STREAM_INIT: u64 = 0;
const STREAM_SAMPLES: u64 = 1;
const STREAM_SHUFFLE: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub epochs: usize,
    pub minibatch: usize,
    pub volume_points: usize,
    pub surface_points: usize,
    pub near_surface_sigma: f64,
    pub optimizer: AdamConfig,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            epochs: 1000,
            minibatch: 2048,
            volume_points: 20_000,
            surface_points: 20_000,
            near_surface_sigma: NEAR_SURFACE_SIGMA,
            optimizer: AdamConfig::adam(1e-4),
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be >= 1"));
        }
        let total = self.volume_points + self.surface_points;
        if self.minibatch == 0 || self.minibatch > total {
            return Err(Error::invalid(format!(
                "minibatch {} must be in 1..={total}",
                self.minibatch
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitLog {
    /// Mean minibatch loss per epoch.
    pub epoch_losses: Vec<f64>,
    pub steps: usize,
    pub points: usize,
    pub occupied_fraction: f64,
    pub watertight_input: bool,
}

impl FitLog {
    pub fn final_loss(&self) -> Option<f64> {
        self.epoch_losses.last().copied()
    }
}

/// Fits an occupancy MLP to a normalized mesh.
///
/// Open meshes are accepted with a warning; their labels come from the
/// winding number as usual.
pub fn fit_mlp(mesh: &TriMesh, cfg: &FitConfig) -> Result<(MlpParams, FitLog)> {
    cfg.validate()?;
    if mesh.is_empty() {
        return Err(Error::EmptyMesh("cannot fit an empty mesh".into()));
    }
    let watertight = qa::boundary_edge_count(mesh) == 0;
    if !watertight {
        log::warn!("fitting a mesh that is not watertight; labels may be degraded");
    }
    let data = sample_training_points(mesh, cfg)?;
    let (params, mut log) = fit_labeled(&data, cfg)?;
    log.watertight_input = watertight;
    Ok((params, log))
}

/// The fixed point set a fit trains on: volume points then near-surface
/// points, labelled by winding number.
pub fn sample_training_points(mesh: &TriMesh, cfg: &FitConfig) -> Result<LabeledPointSet> {
    let mut rng = derive(cfg.seed, STREAM_SAMPLES);
    let mut points = sample_volume_points(cfg.volume_points, &mut rng);
    points.extend(sample_near_surface(mesh, cfg.surface_points, cfg.near_surface_sigma, &mut rng)?);
    let labels = occupancy_labels(mesh, &points);
    LabeledPointSet::new(points, labels)
}

/// Trains from an explicit labelled set. Only `epochs`, `minibatch`,
/// `optimizer` and `seed` of the config apply.
pub fn fit_labeled(data: &LabeledPointSet, cfg: &FitConfig) -> Result<(MlpParams, FitLog)> {
    if cfg.epochs == 0 {
        return Err(Error::invalid("epochs must be >= 1"));
    }
    if data.is_empty() || cfg.minibatch == 0 || cfg.minibatch > data.len() {
        return Err(Error::invalid(format!(
            "minibatch {} must be in 1..={}",
            cfg.minibatch,
            data.len()
        )));
    }
    let _ftz = FlushSubnormals::new();
    let pe = PeConfig::default();
    let mut theta = MlpParams::init(&mut derive(cfg.seed, STREAM_INIT)).to_flat();
    let mut shuffle_rng = derive(cfg.seed, STREAM_SHUFFLE);
    let mut opt = Adam::new(cfg.optimizer, PARAM_COUNT);
    let mut ws = MlpWorkspace::default();
    let mut grad = vec![0.0f32; PARAM_COUNT];
    let mut order: Vec<usize> = (0..data.len()).collect();
    let encoded = encode_points(&data.points, &pe);
    let mut batch_targets: Vec<f32> = Vec::with_capacity(cfg.minibatch);
    let mut d_logits = vec![0.0f32; cfg.minibatch];
    let mut log = FitLog {
        points: data.len(),
        occupied_fraction: data.labels.iter().map(|&l| l as f64).sum::<f64>() / data.len() as f64,
        ..FitLog::default()
    };

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut sum = 0.0;
        let mut batches = 0;
        for (step, idx) in order.chunks(cfg.minibatch).enumerate() {
            batch_targets.clear();
            batch_targets.extend(idx.iter().map(|&i| data.labels[i] as f32));
            let d = &mut d_logits[..idx.len()];
            let loss = {
                let logits = forward_gathered(&theta, &encoded, idx, &mut ws);
                bce_with_targets(logits, &batch_targets, d)
            };
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!("loss {loss} at epoch {epoch}, step {step}")));
            }
            backward_flat(&theta, &mut ws, d, &mut grad);
            opt.step(&mut theta, &grad);
            sum += loss;
            batches += 1;
        }
        log.epoch_losses.push(sum / batches as f64);
        log.steps += batches;
        if (epoch + 1) % 100 == 0 {
            log::debug!("epoch {}: loss {:.5}", epoch + 1, sum / batches as f64);
        }
    }
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("parameters after training".into()));
    }
    Ok((MlpParams::from_flat(&theta)?, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::primitives::icosphere;

    fn small_cfg() -> FitConfig {
        FitConfig {
            epochs: 3,
            minibatch: 256,
            volume_points: 500,
            surface_points: 500,
            seed: 11,
            ..FitConfig::default()
        }
    }

    #[test]
    fn zero_epochs_rejected() {
        let cfg = FitConfig {
            epochs: 0,
            ..small_cfg()
        };
        assert!(fit_mlp(&icosphere(2, 0.4), &cfg).is_err());
    }

    #[test]
    fn oversized_minibatch_rejected() {
        let cfg = FitConfig {
            minibatch: 1001,
            ..small_cfg()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn same_seed_is_bitwise_identical() {
        let m = icosphere(2, 0.4);
        let (a, la) = fit_mlp(&m, &small_cfg()).unwrap();
        let (b, lb) = fit_mlp(&m, &small_cfg()).unwrap();
        assert_eq!(a.to_flat().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                   b.to_flat().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        assert_eq!(la, lb);
        assert_eq!(la.steps, 3 * 4);
        assert!(la.watertight_input);
    }

    #[test]
    fn loss_goes_down() {
        let cfg = FitConfig {
            epochs: 30,
            optimizer: AdamConfig::adam(1e-3),
            ..small_cfg()
        };
        let (_, log) = fit_mlp(&icosphere(2, 0.4), &cfg).unwrap();
        assert!(log.final_loss().unwrap() < log.epoch_losses[0]);
    }
}
