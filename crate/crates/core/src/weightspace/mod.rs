//! Weight-space representation: flattening, standardization, tokenization
//! and the Transformer denoiser.

pub mod checkpoint;
pub mod theta;
pub mod transformer;

pub use checkpoint::{load_denoiser, save_denoiser, DenoiserCheckpoint, DenoiserHeader};
pub use theta::{flatten, timestep_embedding, unflatten, ShapeSignature, ThetaStats};
pub use transformer::{DenoiserConfig, TransformerDenoiser};
