//! HTTP backend for a blinded shape survey: reviewers see one mesh at a
//! time and classify it as real, fake or not sure.
//!
//! Ground truth is loaded with the survey manifest but never leaves the
//! process except through the token-protected results reveal.

mod error;
pub mod server;
pub mod store;
pub mod survey;
pub mod wire;

pub use error::{Error, Result};
pub use server::{load_state, router, serve, AppState, ServeConfig, HASH_HEADER};
pub use store::{aggregate, Choice, LabelRecord, LabelStore, SurveySummary};
pub use survey::{GroundTruth, ReviewItem, Survey, SurveyEntry, SurveyManifest};
pub use wire::{decode_mesh, encode_mesh, mesh_hash};
