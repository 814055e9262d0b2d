//! Dense grid evaluation of a fitted MLP and iso-surface reconstruction.

use rayon::prelude::*;

use super::encoding::PeConfig;
use super::mlp::{forward_flat, sigmoid, MlpParams, MlpWorkspace};
use crate::error::{Error, Result};
use crate::geometry::grid::lattice_points;
use crate::geometry::{marching_cubes, Extent, OccupancyGrid, TriMesh};

pub const DEFAULT_RESOLUTION: usize = 128;
const CHUNK: usize = 8192;
const BORDER_LOGIT: f32 = -30.0;

/// Occupancy probabilities at the `R³` lattice points of `extent`.
pub fn evaluate_grid(params: &MlpParams, resolution: usize, extent: Extent) -> Result<OccupancyGrid> {
    evaluate_with(params, resolution, extent, sigmoid)
}

/// Raw logits at the `R³` lattice points of `extent`; the surface is the 0 level.
pub fn evaluate_logit_grid(params: &MlpParams, resolution: usize, extent: Extent) -> Result<OccupancyGrid> {
    evaluate_with(params, resolution, extent, |z| z)
}

fn evaluate_with(params: &MlpParams, resolution: usize, extent: Extent, map: fn(f32) -> f32) -> Result<OccupancyGrid> {
    params.validate()?;
    if resolution < 2 {
        return Err(Error::invalid(format!("grid resolution must be >= 2, got {resolution}")));
    }
    let theta = params.to_flat();
    let pe = PeConfig::default();
    let points = lattice_points(resolution, &extent);
    let mut values = vec![0.0f32; points.len()];
    values
        .par_chunks_mut(CHUNK)
        .zip(points.par_chunks(CHUNK))
        .for_each_init(MlpWorkspace::default, |ws, (out, pts)| {
            let logits = forward_flat(&theta, pts, &pe, ws);
            for (o, &z) in out.iter_mut().zip(logits) {
                *o = map(z);
            }
        });
    OccupancyGrid::new(resolution, extent, values)
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub mesh: TriMesh,
    /// True when the field never crosses the iso level.
    pub empty_surface: bool,
}

/// Evaluates the field over the unit cube and extracts the 0.5 level set.
pub fn reconstruct(params: &MlpParams, resolution: usize) -> Result<Reconstruction> {
    reconstruct_in(params, resolution, Extent::default())
}

/// Reconstruction over an explicit extent.
///
/// Extraction runs on the logit grid at level 0. This is the same surface as
/// probability 0.5, but a fitted field is nearly a step at lattice scale and
/// interpolating its probabilities snaps vertices to edge midpoints.
///
/// The outermost lattice layer is forced to "outside" before extraction.
/// Training shapes are normalized strictly inside the cube, so this only
/// removes spurious occupancy at the border and guarantees a closed mesh.
pub fn reconstruct_in(params: &MlpParams, resolution: usize, extent: Extent) -> Result<Reconstruction> {
    let mut grid = evaluate_logit_grid(params, resolution, extent)?;
    grid.fill_boundary(BORDER_LOGIT);
    let mesh = marching_cubes(&grid, 0.0);
    let empty_surface = mesh.is_empty();
    if empty_surface {
        log::warn!("reconstruction produced an empty surface");
    }
    Ok(Reconstruction { mesh, empty_surface })
}
