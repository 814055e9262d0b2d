//! DDIM sampling with an x₀-predicting denoiser.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::schedule::DiffusionSchedule;
use super::Denoiser;
use crate::error::{Error, Result};
use crate::rng::derive;
use crate::weightspace::ThetaStats;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SampleConfig {
    pub ddim_steps: usize,
    pub eta: f64,
    pub count: usize,
    pub seed: u64,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            ddim_steps: 100,
            eta: 0.0,
            count: 1,
            seed: 0,
        }
    }
}

impl SampleConfig {
    pub fn validate(&self, timesteps: usize) -> Result<()> {
        if self.ddim_steps == 0 || self.ddim_steps > timesteps {
            return Err(Error::invalid(format!(
                "ddim_steps {} must be in 1..={timesteps}",
                self.ddim_steps
            )));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::invalid(format!("eta {} must be in [0, 1]", self.eta)));
        }
        Ok(())
    }
}

/// Descending, uniformly spaced steps `T, T − T/S, …` (S of them, all ≥ 1).
pub fn ddim_timesteps(timesteps: usize, steps: usize) -> Vec<usize> {
    (0..steps).map(|i| timesteps - i * timesteps / steps).collect()
}

/// One update from step `t` to `t_prev` given the current estimate `x0`.
///
/// Returns the deterministic part of `θ_{t_prev}` and the noise scale σ.
pub fn ddim_step(sched: &DiffusionSchedule, t: usize, t_prev: usize, eta: f64, theta_t: &[f32], x0: &[f32]) -> (Vec<f64>, f64) {
    let (ab, ab_prev) = (sched.alpha_bar(t), sched.alpha_bar(t_prev));
    let sigma = eta * ((1.0 - ab_prev) / (1.0 - ab)).sqrt() * (1.0 - ab / ab_prev).sqrt();
    let dir = (1.0 - ab_prev - sigma * sigma).max(0.0).sqrt();
    let (a, s) = (ab.sqrt(), (1.0 - ab).sqrt());
    let mean = theta_t
        .iter()
        .zip(x0)
        .map(|(&xt, &x0)| {
            let eps = (xt as f64 - a * x0 as f64) / s;
            ab_prev.sqrt() * x0 as f64 + dir * eps
        })
        .collect();
    (mean, sigma)
}

/// Draws `count` samples together. Sample `i` takes its noise from stream
/// `i` of `seed`, so a sample does not depend on how many are drawn.
/// Returns destandardized weight vectors, one per sample.
pub fn ddim_sample_batch<D: Denoiser + ?Sized>(
    model: &D,
    sched: &DiffusionSchedule,
    stats: &ThetaStats,
    cfg: &SampleConfig,
) -> Result<Vec<Vec<f32>>> {
    cfg.validate(sched.timesteps())?;
    let n = model.theta_len();
    let count = cfg.count;
    if count == 0 {
        return Ok(Vec::new());
    }
    let mut rngs: Vec<_> = (0..count).map(|i| derive(cfg.seed, i as u64)).collect();
    let mut x: Vec<f32> = rngs
        .iter_mut()
        .flat_map(|r| (0..n).map(|_| r.sample::<f32, _>(StandardNormal)).collect::<Vec<_>>())
        .collect();
    let steps = ddim_timesteps(sched.timesteps(), cfg.ddim_steps);
    let mut x0 = Vec::new();
    for (k, &t) in steps.iter().enumerate() {
        let t_prev = steps.get(k + 1).copied().unwrap_or(0);
        x0 = model.predict(&x, &vec![t; count])?;
        if let Some(i) = x0.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("denoiser output at step {t} (element {i})")));
        }
        for (s, rng) in rngs.iter_mut().enumerate() {
            let rows = s * n..(s + 1) * n;
            let (mean, sigma) = ddim_step(sched, t, t_prev, cfg.eta, &x[rows.clone()], &x0[rows.clone()]);
            for (xv, m) in x[rows].iter_mut().zip(mean) {
                let z = if sigma > 0.0 { rng.sample::<f64, _>(StandardNormal) } else { 0.0 };
                *xv = (m + sigma * z) as f32;
            }
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("sample state at step {t} (element {i})")));
        }
    }
    Ok(x0.chunks_exact(n).map(|row| stats.destandardize(row)).collect())
}

/// A single sample; see [`ddim_sample_batch`].
pub fn ddim_sample<D: Denoiser + ?Sized>(
    model: &D,
    sched: &DiffusionSchedule,
    stats: &ThetaStats,
    cfg: &SampleConfig,
) -> Result<Vec<f32>> {
    let cfg = SampleConfig { count: 1, ..*cfg };
    Ok(ddim_sample_batch(model, sched, stats, &cfg)?.remove(0))
}
