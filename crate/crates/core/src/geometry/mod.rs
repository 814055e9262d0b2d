//! Mesh I/O, normalization, sampling, inside/outside oracle, iso-surface
//! extraction and quality analysis.

pub mod grid;
pub mod io;
pub mod marching_cubes;
mod mc_table;
pub mod mesh;
pub mod primitives;
pub mod qa;
pub mod sampling;
pub mod winding;

pub use grid::{Extent, OccupancyGrid};
pub use io::{load_mesh, write_obj};
pub use marching_cubes::{marching_cubes, DEFAULT_ISO};
pub use mesh::{Aabb, TriMesh, Vec3};
pub use qa::{qa_report, QaReport, Status};
pub use sampling::{sample_near_surface, sample_volume_points, surface_sample};
pub use winding::{occupancy_labels, winding_number, winding_numbers, WindingTree};

/// Sample coordinates paired with ground-truth occupancy bits.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledPointSet {
    pub points: Vec<Vec3>,
    pub labels: Vec<u8>,
}

impl LabeledPointSet {
    pub fn new(points: Vec<Vec3>, labels: Vec<u8>) -> crate::Result<Self> {
        if points.len() != labels.len() {
            return Err(crate::Error::ShapeMismatch {
                tensor: "labels".into(),
                expected: points.len(),
                actual: labels.len(),
            });
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(crate::Error::invalid("occupancy labels must be 0 or 1"));
        }
        Ok(Self { points, labels })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}
