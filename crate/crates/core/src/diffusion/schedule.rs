//! Linear β schedule and the closed-form forward process.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScheduleConfig {
    pub timesteps: usize,
    pub beta_min: f64,
    pub beta_max: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            timesteps: 1000,
            beta_min: 1e-4,
            beta_max: 0.02,
        }
    }
}

impl ScheduleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.timesteps == 0 {
            return Err(Error::invalid("schedule needs at least one step"));
        }
        if !(0.0 < self.beta_min && self.beta_min < self.beta_max && self.beta_max < 1.0) {
            return Err(Error::invalid(format!(
                "need 0 < beta_min < beta_max < 1, got {} and {}",
                self.beta_min, self.beta_max
            )));
        }
        Ok(())
    }

    pub fn build(&self) -> Result<DiffusionSchedule> {
        make_schedule(self.timesteps, self.beta_min, self.beta_max)
    }
}

/// β, α and ᾱ for steps `1..=T`. Step 0 means clean data (ᾱ₀ = 1).
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionSchedule {
    pub config: ScheduleConfig,
    betas: Vec<f64>,
    alpha_bars: Vec<f64>,
}

pub fn make_schedule(timesteps: usize, beta_min: f64, beta_max: f64) -> Result<DiffusionSchedule> {
    let config = ScheduleConfig {
        timesteps,
        beta_min,
        beta_max,
    };
    config.validate()?;
    let betas: Vec<f64> = (0..timesteps)
        .map(|i| {
            if timesteps == 1 {
                beta_min
            } else {
                beta_min + (beta_max - beta_min) * i as f64 / (timesteps - 1) as f64
            }
        })
        .collect();
    let mut acc = 1.0;
    let alpha_bars = betas
        .iter()
        .map(|b| {
            acc *= 1.0 - b;
            acc
        })
        .collect();
    Ok(DiffusionSchedule {
        config,
        betas,
        alpha_bars,
    })
}

impl DiffusionSchedule {
    pub fn timesteps(&self) -> usize {
        self.betas.len()
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t - 1]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        1.0 - self.beta(t)
    }

    /// ᾱₜ, with ᾱ₀ = 1.
    pub fn alpha_bar(&self, t: usize) -> f64 {
        if t == 0 {
            1.0
        } else {
            self.alpha_bars[t - 1]
        }
    }

    fn check_step(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.timesteps() {
            return Err(Error::invalid(format!("step {t} outside 1..={}", self.timesteps())));
        }
        Ok(())
    }
}

/// `θₜ = √ᾱₜ·θ₀ + √(1−ᾱₜ)·ε`.
pub fn q_sample(theta0: &[f32], t: usize, noise: &[f32], sched: &DiffusionSchedule) -> Result<Vec<f32>> {
    sched.check_step(t)?;
    if noise.len() != theta0.len() {
        return Err(Error::ShapeMismatch {
            tensor: "noise".into(),
            expected: theta0.len(),
            actual: noise.len(),
        });
    }
    let ab = sched.alpha_bar(t);
    let (a, s) = (ab.sqrt(), (1.0 - ab).sqrt());
    Ok(theta0
        .iter()
        .zip(noise)
        .map(|(&x, &e)| (a * x as f64 + s * e as f64) as f32)
        .collect())
}

/// Noise implied by an x₀ estimate: `ε̂ = (θₜ − √ᾱₜ·x̂₀)/√(1−ᾱₜ)`.
pub fn predicted_noise(theta_t: &[f32], x0: &[f32], t: usize, sched: &DiffusionSchedule) -> Vec<f32> {
    let ab = sched.alpha_bar(t);
    let (a, s) = (ab.sqrt(), (1.0 - ab).sqrt());
    theta_t
        .iter()
        .zip(x0)
        .map(|(&xt, &x0)| ((xt as f64 - a * x0 as f64) / s) as f32)
        .collect()
}
