//! Forward noising, the x₀-prediction objective, training and DDIM sampling
//! over flattened weight vectors.

pub mod ddim;
pub mod generate;
pub mod schedule;
pub mod train;

pub use ddim::{ddim_sample, ddim_sample_batch, ddim_step, ddim_timesteps, SampleConfig};
pub use generate::{generate, write_generation, GeneratedShape, GenerationEntry};
pub use schedule::{make_schedule, predicted_noise, q_sample, DiffusionSchedule, ScheduleConfig};
pub use train::{train, training_loss, TrainConfig, TrainLog, TrainOutcome};

use crate::error::Result;
use crate::weightspace::TransformerDenoiser;

/// Anything that predicts clean (standardized) weights from noisy ones.
pub trait Denoiser {
    fn theta_len(&self) -> usize;

    /// Predictions for a row-major batch of inputs, one step per row.
    fn predict(&self, thetas: &[f32], ts: &[usize]) -> Result<Vec<f32>>;
}

impl Denoiser for TransformerDenoiser {
    fn theta_len(&self) -> usize {
        TransformerDenoiser::theta_len(self)
    }

    fn predict(&self, thetas: &[f32], ts: &[usize]) -> Result<Vec<f32>> {
        TransformerDenoiser::predict(self, thetas, ts)
    }
}
