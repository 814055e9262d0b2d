//! Occupancy-field shape modelling: per-shape MLP fitting, diffusion over the
//! flattened MLP weights, mesh processing and generative-shape metrics.

pub mod diffusion;
pub mod error;
pub mod geometry;
pub mod inr;
pub mod metrics;
pub mod optim;
pub mod rng;
pub mod tensor;
pub mod weightspace;

pub use error::{Error, Result};
