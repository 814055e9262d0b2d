//! Denoiser training on standardized weight vectors.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::schedule::{q_sample, DiffusionSchedule, ScheduleConfig};
use super::Denoiser;
use crate::error::{Error, Result};
use crate::optim::{Adam, AdamConfig};
use crate::rng::{derive, SeededRng};
use crate::tensor::FlushSubnormals;
use crate::weightspace::{DenoiserCheckpoint, DenoiserConfig, ShapeSignature, ThetaStats, TransformerDenoiser};

const STREAM_SHUFFLE: u64 = 1;
const STREAM_NOISE: u64 = 2;
const STREAM_VALIDATION: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch: usize,
    pub lr: f32,
    pub weight_decay: f32,
    pub seed: u64,
    /// Validation loss is computed every this many epochs.
    pub val_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 6000,
            batch: 32,
            lr: 2e-4,
            weight_decay: 0.01,
            seed: 0,
            val_every: 100,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    /// Mean minibatch loss per epoch.
    pub train_loss: Vec<f64>,
    /// `(epoch, loss)` on the validation set.
    pub val_loss: Vec<(usize, f64)>,
    pub best_epoch: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub last: DenoiserCheckpoint,
    /// Lowest validation loss seen; the last state when there is no
    /// validation set.
    pub best: DenoiserCheckpoint,
    pub log: TrainLog,
}

/// Mean squared error of `denoise(q_sample(θ₀, t, ε), t)` against `θ₀` over
/// a row-major batch.
pub fn training_loss<D: Denoiser + ?Sized>(
    model: &D,
    theta0: &[f32],
    ts: &[usize],
    noise: &[f32],
    sched: &DiffusionSchedule,
) -> Result<f64> {
    let n = model.theta_len();
    if theta0.len() != ts.len() * n || noise.len() != theta0.len() {
        return Err(Error::invalid("batch shapes are inconsistent"));
    }
    let noisy = noisy_batch(theta0, ts, noise, n, sched)?;
    let pred = model.predict(&noisy, ts)?;
    let total: f64 = pred.iter().zip(theta0).map(|(&p, &y)| ((p - y) as f64).powi(2)).sum();
    Ok(total / theta0.len() as f64)
}

fn noisy_batch(theta0: &[f32], ts: &[usize], noise: &[f32], n: usize, sched: &DiffusionSchedule) -> Result<Vec<f32>> {
    let mut out = Vec::with_capacity(theta0.len());
    for (k, &t) in ts.iter().enumerate() {
        out.extend(q_sample(&theta0[k * n..(k + 1) * n], t, &noise[k * n..(k + 1) * n], sched)?);
    }
    Ok(out)
}

fn draw_noise(rng: &mut SeededRng, len: usize) -> Vec<f32> {
    (0..len).map(|_| rng.sample::<f32, _>(StandardNormal)).collect()
}

/// Fixed steps and noise for the validation set, so losses are comparable
/// across epochs.
struct Validation {
    theta0: Vec<f32>,
    ts: Vec<usize>,
    noise: Vec<f32>,
}

fn stack(thetas: &[Vec<f32>], stats: &ThetaStats) -> Vec<f32> {
    thetas.iter().flat_map(|t| stats.standardize(t)).collect()
}

/// Trains a fresh denoiser.
///
/// Thetas are standardized with statistics of the training set, which are
/// stored in the returned checkpoints.
pub fn train(
    train_set: &[Vec<f32>],
    val_set: &[Vec<f32>],
    cfg: &TrainConfig,
    model_cfg: &DenoiserConfig,
    schedule: &ScheduleConfig,
) -> Result<TrainOutcome> {
    if train_set.len() < 2 {
        return Err(Error::invalid(format!(
            "training needs at least 2 thetas, got {}",
            train_set.len()
        )));
    }
    if cfg.epochs == 0 || cfg.batch == 0 {
        return Err(Error::invalid("epochs and batch must be >= 1"));
    }
    let signature = ShapeSignature::default();
    let n = signature.total();
    if let Some(bad) = train_set.iter().chain(val_set).find(|t| t.len() != n) {
        return Err(Error::ShapeMismatch {
            tensor: "theta".into(),
            expected: n,
            actual: bad.len(),
        });
    }
    let _ftz = FlushSubnormals::new();
    let sched = schedule.build()?;
    let stats = ThetaStats::fit(train_set)?;
    let data = stack(train_set, &stats);
    let mut model = TransformerDenoiser::new(*model_cfg, signature)?;
    let mut opt = Adam::new(AdamConfig::adamw(cfg.lr, cfg.weight_decay), model.param_count());
    let mut grad = vec![0.0f32; model.param_count()];
    let mut shuffle_rng = derive(cfg.seed, STREAM_SHUFFLE);
    let mut noise_rng = derive(cfg.seed, STREAM_NOISE);
    let timesteps = sched.timesteps();

    let validation = (!val_set.is_empty()).then(|| {
        let mut rng = derive(cfg.seed, STREAM_VALIDATION);
        let ts: Vec<usize> = val_set.iter().map(|_| rng.random_range(1..=timesteps)).collect();
        let noise = draw_noise(&mut rng, val_set.len() * n);
        Validation {
            theta0: stack(val_set, &stats),
            ts,
            noise,
        }
    });

    let checkpoint = |model: &TransformerDenoiser, epoch: usize| DenoiserCheckpoint {
        model: model.clone(),
        stats,
        schedule: *schedule,
        epoch,
    };
    let mut log = TrainLog::default();
    let mut best: Option<(f64, DenoiserCheckpoint)> = None;
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut theta0 = Vec::new();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut sum = 0.0;
        let mut steps = 0;
        for (step, idx) in order.chunks(cfg.batch).enumerate() {
            theta0.clear();
            for &i in idx {
                theta0.extend_from_slice(&data[i * n..(i + 1) * n]);
            }
            let ts: Vec<usize> = idx.iter().map(|_| noise_rng.random_range(1..=timesteps)).collect();
            let noise = draw_noise(&mut noise_rng, theta0.len());
            let noisy = noisy_batch(&theta0, &ts, &noise, n, &sched)?;
            let loss = model.loss_and_grad(&noisy, &ts, &theta0, &mut grad)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!("training loss at epoch {epoch}, step {step}")));
            }
            opt.step(model.params_mut(), &grad);
            sum += loss;
            steps += 1;
        }
        log.train_loss.push(sum / steps as f64);

        if let Some(v) = &validation {
            if epoch % cfg.val_every.max(1) == 0 || epoch == cfg.epochs {
                let loss = training_loss(&model, &v.theta0, &v.ts, &v.noise, &sched)?;
                log.val_loss.push((epoch, loss));
                log::info!("epoch {epoch}: train {:.5} val {loss:.5}", sum / steps as f64);
                if best.as_ref().is_none_or(|(b, _)| loss < *b) {
                    best = Some((loss, checkpoint(&model, epoch)));
                    log.best_epoch = epoch;
                }
            }
        } else if epoch % cfg.val_every.max(1) == 0 {
            log::info!("epoch {epoch}: train {:.5}", sum / steps as f64);
        }
    }
    let last = checkpoint(&model, cfg.epochs);
    let best = match best {
        Some((_, b)) => b,
        None => {
            log.best_epoch = cfg.epochs;
            last.clone()
        }
    };
    Ok(TrainOutcome { last, best, log })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Oracle(Vec<f32>);

    impl Denoiser for Oracle {
        fn theta_len(&self) -> usize {
            self.0.len()
        }
        fn predict(&self, _: &[f32], ts: &[usize]) -> Result<Vec<f32>> {
            Ok(self.0.repeat(ts.len()))
        }
    }

    #[test]
    fn oracle_and_zero_model_losses() {
        let sched = ScheduleConfig::default().build().unwrap();
        let mut rng = derive(1, 0);
        let theta = draw_noise(&mut rng, 5000);
        let noise = draw_noise(&mut rng, 5000);
        let exact = training_loss(&Oracle(theta.clone()), &theta, &[300], &noise, &sched).unwrap();
        assert_eq!(exact, 0.0);
        let zero = training_loss(&Oracle(vec![0.0; 5000]), &theta, &[300], &noise, &sched).unwrap();
        let second_moment = theta.iter().map(|&v| (v as f64).powi(2)).sum::<f64>() / 5000.0;
        assert!((zero - second_moment).abs() < 1e-9);
    }

    #[test]
    fn single_theta_rejected() {
        let one = vec![vec![0.0f32; ShapeSignature::default().total()]];
        let err = train(&one, &[], &TrainConfig::default(), &DenoiserConfig::desk(), &ScheduleConfig::default());
        assert!(err.is_err());
    }
}
