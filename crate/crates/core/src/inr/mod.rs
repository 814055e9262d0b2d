//! The per-shape occupancy network: encoding, MLP, fitting, grid evaluation
//! and mesh reconstruction.

pub mod checkpoint;
pub mod encoding;
pub mod fit;
pub mod mlp;
pub mod recon;

pub use checkpoint::{load_mlp, save_mlp, MlpHeader};
pub use encoding::{positional_encode, PeConfig};
pub use fit::{fit_labeled, fit_mlp, FitConfig, FitLog};
pub use mlp::{bce_loss, mlp_forward, mlp_gradients, sigmoid, MlpParams, PARAM_COUNT, TENSOR_SIZES};
pub use recon::{evaluate_grid, evaluate_logit_grid, reconstruct, reconstruct_in, Reconstruction, DEFAULT_RESOLUTION};
