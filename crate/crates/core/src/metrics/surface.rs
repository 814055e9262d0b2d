//! Per-shape reconstruction metrics: VIoU, Chamfer-L1, normal consistency
//! and F-score.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kdtree::KdTree;
use super::PointCloud;
use crate::error::{Error, Result};
use crate::geometry::{Aabb, TriMesh, Vec3, WindingTree};
use crate::geometry::winding::OCCUPANCY_THRESHOLD;

pub const DEFAULT_VIOU_SAMPLES: usize = 100_000;
pub const DEFAULT_FSCORE_TAU: f64 = 0.01;

/// Nearest neighbour in `to` of every point of `from`: `(index, distance)`.
pub fn nearest_neighbours(from: &[Vec3], to: &KdTree) -> Vec<(usize, f64)> {
    from.par_iter()
        .map(|p| {
            let (i, d2) = to.nearest(p);
            (i, d2.sqrt())
        })
        .collect()
}

fn nonempty(c: &PointCloud, name: &str) -> Result<()> {
    if c.is_empty() {
        return Err(Error::invalid(format!("point cloud {name} is empty")));
    }
    Ok(())
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let mut n = 0usize;
    let mut s = 0.0;
    for v in values {
        s += v;
        n += 1;
    }
    s / n as f64
}

/// Nearest-neighbour correspondences in both directions.
#[derive(Debug, Clone)]
pub struct Correspondence {
    pub a_to_b: Vec<(usize, f64)>,
    pub b_to_a: Vec<(usize, f64)>,
}

impl Correspondence {
    pub fn new(a: &PointCloud, b: &PointCloud) -> Result<Self> {
        nonempty(a, "A")?;
        nonempty(b, "B")?;
        Ok(Self::with_trees(a, &KdTree::new(&a.points), b, &KdTree::new(&b.points)))
    }

    /// Like [`Correspondence::new`] with prebuilt trees over both clouds.
    pub fn with_trees(a: &PointCloud, ta: &KdTree, b: &PointCloud, tb: &KdTree) -> Self {
        Self {
            a_to_b: nearest_neighbours(&a.points, tb),
            b_to_a: nearest_neighbours(&b.points, ta),
        }
    }

    pub fn chamfer_l1(&self) -> f64 {
        let ab = mean(self.a_to_b.iter().map(|x| x.1));
        let ba = mean(self.b_to_a.iter().map(|x| x.1));
        0.5 * (ab + ba)
    }

    pub fn f_score(&self, tau: f64) -> f64 {
        let precision = mean(self.a_to_b.iter().map(|x| f64::from(u8::from(x.1 <= tau))));
        let recall = mean(self.b_to_a.iter().map(|x| f64::from(u8::from(x.1 <= tau))));
        if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        }
    }

    pub fn normal_consistency(&self, a: &PointCloud, b: &PointCloud) -> Result<f64> {
        let (na, nb) = (a.require_normals()?, b.require_normals()?);
        let ab = mean(self.a_to_b.iter().enumerate().map(|(i, &(j, _))| na[i].dot(&nb[j]).abs()));
        let ba = mean(self.b_to_a.iter().enumerate().map(|(i, &(j, _))| nb[i].dot(&na[j]).abs()));
        Ok(0.5 * (ab + ba))
    }
}

/// Symmetric mean nearest-neighbour distance.
pub fn chamfer_l1(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    Ok(Correspondence::new(a, b)?.chamfer_l1())
}

/// Mean absolute cosine between each normal and its nearest neighbour's.
pub fn normal_consistency(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    a.require_normals()?;
    b.require_normals()?;
    Correspondence::new(a, b)?.normal_consistency(a, b)
}

/// Harmonic mean of precision (A near B) and recall (B near A) at `tau`.
pub fn f_score(a: &PointCloud, b: &PointCloud, tau: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::invalid(format!("tau must be positive, got {tau}")));
    }
    Ok(Correspondence::new(a, b)?.f_score(tau))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeIou {
    pub value: f64,
    /// Binomial standard error of the Monte-Carlo estimate.
    pub std_error: f64,
    pub samples: usize,
}

/// Monte-Carlo volumetric IoU over the joint bounding box.
pub fn viou<R: Rng + ?Sized>(a: &TriMesh, b: &TriMesh, n_samples: usize, rng: &mut R) -> Result<VolumeIou> {
    if n_samples == 0 {
        return Err(Error::invalid("viou needs at least one sample"));
    }
    let boxes: Vec<Aabb> = [a, b].iter().filter_map(|m| m.bounding_box()).collect();
    let Some(bbox) = boxes.iter().copied().reduce(|x, y| x.union(&y)) else {
        return Err(Error::EmptyMesh("both meshes are empty".into()));
    };
    let extent = bbox.extent();
    let points: Vec<Vec3> = (0..n_samples)
        .map(|_| bbox.min + Vec3::new(rng.random(), rng.random(), rng.random()).component_mul(&extent))
        .collect();
    let (ta, tb) = (WindingTree::new(a), WindingTree::new(b));
    let inside = |t: &WindingTree, m: &TriMesh| -> Vec<bool> {
        if m.is_empty() {
            vec![false; points.len()]
        } else {
            t.query_batch(&points).into_iter().map(|w| w > OCCUPANCY_THRESHOLD).collect()
        }
    };
    let (ia, ib) = (inside(&ta, a), inside(&tb, b));
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in ia.iter().zip(&ib) {
        inter += usize::from(x && y);
        union += usize::from(x || y);
    }
    if union == 0 {
        return Err(Error::Degenerate("no sample falls inside either mesh".into()));
    }
    let value = inter as f64 / union as f64;
    Ok(VolumeIou {
        value,
        std_error: (value * (1.0 - value) / union as f64).sqrt(),
        samples: n_samples,
    })
}

/// The four per-shape numbers reported for a reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeMetrics {
    pub viou: f64,
    pub viou_std_error: f64,
    pub chamfer_l1: f64,
    pub nc: f64,
    pub fscore: f64,
    pub seed: u64,
}

/// Compares a reconstruction against a reference mesh using `points`
/// surface samples per mesh and `viou_samples` volume samples.
pub fn shape_metrics(
    reconstruction: &TriMesh,
    reference: &TriMesh,
    points: usize,
    viou_samples: usize,
    seed: u64,
) -> Result<ShapeMetrics> {
    use crate::geometry::surface_sample;
    use crate::rng::derive;
    let a = surface_sample(reconstruction, points, &mut derive(seed, 0))?;
    let b = surface_sample(reference, points, &mut derive(seed, 1))?;
    let c = Correspondence::new(&a, &b)?;
    let v = viou(reconstruction, reference, viou_samples, &mut derive(seed, 2))?;
    Ok(ShapeMetrics {
        viou: v.value,
        viou_std_error: v.std_error,
        chamfer_l1: c.chamfer_l1(),
        nc: c.normal_consistency(&a, &b)?,
        fscore: c.f_score(DEFAULT_FSCORE_TAU),
        seed,
    })
}
