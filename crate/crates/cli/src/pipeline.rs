//! `fit`, `train`, `sample` and `eval`: thin wrappers over the library
//! that read the manifest, write artifacts and a reproducibility block.

use std::path::{Path, PathBuf};

use occgen::diffusion::{generate, train, write_generation, GenerationEntry};
use occgen::geometry::{load_mesh, surface_sample, Status, TriMesh};
use occgen::inr::{fit_mlp, load_mlp, reconstruct, save_mlp, MlpHeader};
use occgen::metrics::{set_metrics, shape_metrics, PointCloud, SetMetricsReport, ShapeMetrics};
use occgen::rng::derive;
use occgen::weightspace::{flatten, load_denoiser, save_denoiser};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::manifest::{manifest_dir, relativize, resolve, write_atomic, Manifest, Split};
use crate::repro::Reproducibility;

pub const DENOISER_FILE: &str = "denoiser.ckpt";
pub const DENOISER_LAST_FILE: &str = "denoiser_last.ckpt";
pub const GENERATION_FILE: &str = "generation.json";
pub const EVAL_FILE: &str = "eval.json";

/// Loads a mesh and rescales it into the unit cube used for fitting.
pub fn load_normalized(path: &Path) -> Result<TriMesh> {
    Ok(load_mesh(path)?.normalize_to_unit_cube()?)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FitSummary {
    pub fitted: usize,
    pub skipped: usize,
    pub failed: Vec<(String, String)>,
}

struct Fitted {
    checkpoint: PathBuf,
    metrics: std::result::Result<ShapeMetrics, String>,
}

fn fit_one(mesh_path: &Path, checkpoint: &Path, cfg: &RunConfig) -> Result<Fitted> {
    let mesh = load_normalized(mesh_path)?;
    let (params, log) = fit_mlp(&mesh, &cfg.fit)?;
    save_mlp(checkpoint, &params, &MlpHeader::new(cfg.fit.seed))?;
    log::info!("{}: final loss {:.5}", mesh_path.display(), log.final_loss().unwrap_or(f64::NAN));
    let recon = reconstruct(&params, cfg.resolution)?;
    let metrics = if recon.empty_surface {
        Err("reconstruction has no surface".to_string())
    } else {
        shape_metrics(&recon.mesh, &mesh, cfg.metric_points, cfg.viou_samples, cfg.fit.seed).map_err(|e| e.to_string())
    };
    Ok(Fitted {
        checkpoint: checkpoint.to_path_buf(),
        metrics,
    })
}

/// Fits every Usable entry that has no checkpoint yet. Per-shape failures
/// are recorded in the manifest and do not stop the run.
pub fn run_fit(manifest_path: &Path, out_dir: &Path, cfg: &RunConfig, deterministic: bool) -> Result<FitSummary> {
    cfg.fit.validate()?;
    let mut manifest = Manifest::load(manifest_path)?;
    let base = manifest_dir(manifest_path).to_path_buf();
    let mlp_dir = out_dir.join("mlps");
    std::fs::create_dir_all(&mlp_dir)?;
    let mut summary = FitSummary::default();
    let mut pending = Vec::new();
    for (i, e) in manifest.entries.iter_mut().enumerate() {
        if e.status() != Status::Usable {
            continue;
        }
        let ckpt = mlp_dir.join(format!("{}.mlp", e.id));
        if ckpt.exists() {
            e.mlp.get_or_insert_with(|| relativize(&base, &ckpt));
            summary.skipped += 1;
        } else {
            pending.push((i, resolve(&base, &e.mesh), ckpt));
        }
    }
    let work = |(i, mesh, ckpt): &(usize, PathBuf, PathBuf)| (*i, fit_one(mesh, ckpt, cfg));
    let results: Vec<(usize, Result<Fitted>)> = if deterministic {
        pending.iter().map(work).collect()
    } else {
        pending.par_iter().map(work).collect()
    };
    for (i, r) in results {
        let e = &mut manifest.entries[i];
        match r {
            Ok(f) => {
                e.mlp = Some(relativize(&base, &f.checkpoint));
                e.fit_error = None;
                match f.metrics {
                    Ok(m) => e.metrics = Some(m),
                    Err(msg) => e.fit_error = Some(msg),
                }
                summary.fitted += 1;
            }
            Err(err) => {
                log::warn!("fit of {} failed: {err}", e.id);
                e.fit_error = Some(err.to_string());
                summary.failed.push((e.id.clone(), err.to_string()));
            }
        }
    }
    manifest.save(manifest_path)?;
    let mut repro = Reproducibility::new("fit", cfg.fit.seed, deterministic, &(&cfg.fit, cfg.resolution))?;
    repro.add_input(manifest_path)?;
    repro.save(&out_dir.join("fit.repro.json"))?;
    Ok(summary)
}

fn thetas_of(manifest: &Manifest, base: &Path, split: Split) -> Result<(Vec<Vec<f32>>, Vec<PathBuf>)> {
    let mut thetas = Vec::new();
    let mut paths = Vec::new();
    for e in manifest.in_split(split) {
        let Some(rel) = &e.mlp else {
            return Err(CliError::data(format!(
                "entry {:?} has no MLP checkpoint; run `occgen fit` first",
                e.id
            )));
        };
        let path = resolve(base, rel);
        let (params, _) = load_mlp(&path)
            .map_err(|err| CliError::data(format!("MLP checkpoint {} for {:?}: {err}", path.display(), e.id)))?;
        thetas.push(flatten(&params)?);
        paths.push(path);
    }
    Ok((thetas, paths))
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Done,
    UpToDate,
}

/// Trains on the `train` split, validating on `val` when present. Writes
/// the best and the last checkpoint plus the loss log.
pub fn run_train(manifest_path: &Path, out_dir: &Path, cfg: &RunConfig, deterministic: bool) -> Result<RunStatus> {
    let manifest = Manifest::load(manifest_path)?;
    let base = manifest_dir(manifest_path);
    if manifest.in_split(Split::Train).next().is_none() {
        return Err(CliError::data(format!(
            "manifest {} has no entries with split=train; run `occgen split` first",
            manifest_path.display()
        )));
    }
    let (train_set, train_paths) = thetas_of(&manifest, base, Split::Train)?;
    let (val_set, val_paths) = thetas_of(&manifest, base, Split::Val)?;

    let mut repro = Reproducibility::new("train", cfg.train.seed, deterministic, &(&cfg.train, &cfg.model, &cfg.schedule))?;
    for p in train_paths.iter().chain(&val_paths) {
        repro.add_input(p)?;
    }
    let repro_path = out_dir.join("train.repro.json");
    if out_dir.join(DENOISER_FILE).exists() && repro.matches_file(&repro_path) {
        return Ok(RunStatus::UpToDate);
    }
    let outcome = train(&train_set, &val_set, &cfg.train, &cfg.model, &cfg.schedule)?;
    std::fs::create_dir_all(out_dir)?;
    save_denoiser(out_dir.join(DENOISER_FILE), &outcome.best)?;
    save_denoiser(out_dir.join(DENOISER_LAST_FILE), &outcome.last)?;
    write_atomic(&out_dir.join("train_log.json"), &serde_json::to_vec_pretty(&outcome.log)?)?;
    repro.save(&repro_path)?;
    Ok(RunStatus::Done)
}

/// Samples `cfg.sample.count` shapes from a denoiser checkpoint.
pub fn run_sample(checkpoint: &Path, out_dir: &Path, cfg: &RunConfig, deterministic: bool) -> Result<(RunStatus, Vec<GenerationEntry>)> {
    if !checkpoint.exists() {
        return Err(CliError::data(format!(
            "denoiser checkpoint {} does not exist; run `occgen train` first",
            checkpoint.display()
        )));
    }
    let mut repro = Reproducibility::new("sample", cfg.sample.seed, deterministic, &(&cfg.sample, cfg.resolution))?;
    repro.add_input(checkpoint)?;
    let repro_path = out_dir.join("sample.repro.json");
    let manifest_path = out_dir.join(GENERATION_FILE);
    if manifest_path.exists() && repro.matches_file(&repro_path) {
        let entries = serde_json::from_slice(&std::fs::read(&manifest_path)?)?;
        return Ok((RunStatus::UpToDate, entries));
    }
    let ckpt = load_denoiser(checkpoint)?;
    let shapes = generate(&ckpt, &cfg.sample, cfg.resolution)?;
    let entries = write_generation(out_dir, &shapes, &cfg.sample)?;
    repro.save(&repro_path)?;
    Ok((RunStatus::Done, entries))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub set: SetMetricsReport,
    pub generated: usize,
    pub empty_generated: usize,
    pub reference: usize,
    pub points: usize,
}

fn clouds(meshes: &[TriMesh], points: usize, seed: u64, stream_offset: u64) -> Result<Vec<PointCloud>> {
    meshes
        .iter()
        .enumerate()
        .map(|(i, m)| Ok(surface_sample(m, points, &mut derive(seed, stream_offset + i as u64))?))
        .collect()
}

/// Set metrics of a generation directory against one split of the manifest.
pub fn run_eval(generated: &Path, manifest_path: &Path, split: Split, out_dir: &Path, cfg: &RunConfig, seed: u64) -> Result<EvalReport> {
    let gen_manifest = generated.join(GENERATION_FILE);
    let entries: Vec<GenerationEntry> = serde_json::from_slice(&std::fs::read(&gen_manifest).map_err(|e| {
        CliError::data(format!("{}: {e}; run `occgen sample` first", gen_manifest.display()))
    })?)?;
    let mut gen_meshes = Vec::new();
    let mut empty = 0;
    for e in &entries {
        if e.empty_surface {
            empty += 1;
        } else {
            gen_meshes.push(load_mesh(generated.join(&e.mesh_file))?);
        }
    }
    let manifest = Manifest::load(manifest_path)?;
    let base = manifest_dir(manifest_path);
    let ref_meshes: Vec<TriMesh> = manifest
        .in_split(split)
        .map(|e| load_normalized(&resolve(base, &e.mesh)))
        .collect::<Result<_>>()?;
    if gen_meshes.len() < 2 || ref_meshes.len() < 2 {
        return Err(CliError::data(format!(
            "set metrics need at least 2 shapes per side; have {} generated (non-empty) and {} reference",
            gen_meshes.len(),
            ref_meshes.len()
        )));
    }
    let points = cfg.set_points;
    let g = clouds(&gen_meshes, points, seed, 0)?;
    let r = clouds(&ref_meshes, points, seed, 1 << 32)?;
    let report = EvalReport {
        set: set_metrics(&g, &r, seed)?,
        generated: gen_meshes.len(),
        empty_generated: empty,
        reference: ref_meshes.len(),
        points,
    };
    std::fs::create_dir_all(out_dir)?;
    write_atomic(&out_dir.join(EVAL_FILE), &serde_json::to_vec_pretty(&report)?)?;
    let mut repro = Reproducibility::new("eval", seed, false, &(points, split))?;
    repro.add_input(&gen_manifest)?;
    repro.add_input(manifest_path)?;
    repro.save(&out_dir.join("eval.repro.json"))?;
    Ok(report)
}
