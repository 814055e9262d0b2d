//! Sampling new networks and reconstructing their surfaces.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ddim::{ddim_sample_batch, SampleConfig};
use crate::error::Result;
use crate::geometry::write_obj;
use crate::inr::{reconstruct, save_mlp, MlpHeader, MlpParams, Reconstruction};
use crate::weightspace::{unflatten, DenoiserCheckpoint};

#[derive(Debug, Clone)]
pub struct GeneratedShape {
    pub theta: Vec<f32>,
    pub params: MlpParams,
    pub reconstruction: Reconstruction,
}

/// One line of a generation manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationEntry {
    pub id: String,
    pub theta_file: String,
    pub mesh_file: String,
    pub seed: u64,
    pub stream: u64,
    pub steps: usize,
    pub eta: f64,
    pub empty_surface: bool,
}

/// Samples `cfg.count` networks and reconstructs each at `resolution`.
/// Empty reconstructions are kept and flagged.
pub fn generate(ckpt: &DenoiserCheckpoint, cfg: &SampleConfig, resolution: usize) -> Result<Vec<GeneratedShape>> {
    let sched = ckpt.schedule.build()?;
    let thetas = ddim_sample_batch(&ckpt.model, &sched, &ckpt.stats, cfg)?;
    thetas
        .into_iter()
        .map(|theta| {
            let params = unflatten(&theta, ckpt.model.signature())?;
            let reconstruction = reconstruct(&params, resolution)?;
            Ok(GeneratedShape {
                theta,
                params,
                reconstruction,
            })
        })
        .collect()
}

/// Writes `sample_NNN.mlp`, `sample_NNN.obj` and `generation.json` into
/// `dir` and returns the manifest entries.
pub fn write_generation(dir: &Path, shapes: &[GeneratedShape], cfg: &SampleConfig) -> Result<Vec<GenerationEntry>> {
    std::fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(shapes.len());
    for (i, s) in shapes.iter().enumerate() {
        let id = format!("sample_{i:03}");
        let theta_file = format!("{id}.mlp");
        let mesh_file = format!("{id}.obj");
        save_mlp(dir.join(&theta_file), &s.params, &MlpHeader::new(cfg.seed))?;
        write_obj(&s.reconstruction.mesh, dir.join(&mesh_file))?;
        entries.push(GenerationEntry {
            id,
            theta_file,
            mesh_file,
            seed: cfg.seed,
            stream: i as u64,
            steps: cfg.ddim_steps,
            eta: cfg.eta,
            empty_surface: s.reconstruction.empty_surface,
        });
    }
    std::fs::write(dir.join("generation.json"), serde_json::to_vec_pretty(&entries)?)?;
    Ok(entries)
}
