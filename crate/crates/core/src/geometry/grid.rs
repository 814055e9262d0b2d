use super::mesh::{Vec3, UNIT_HALF};
use crate::error::{Error, Result};

/// Axis-aligned box a grid spans.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extent {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Extent {
    pub fn cube(half: f64) -> Self {
        Self {
            min: [-half; 3],
            max: [half; 3],
        }
    }

    fn validate(&self) -> Result<()> {
        for a in 0..3 {
            if !(self.min[a].is_finite() && self.max[a].is_finite() && self.min[a] < self.max[a]) {
                return Err(Error::invalid(format!("bad extent on axis {a}: {self:?}")));
            }
        }
        Ok(())
    }
}

impl Default for Extent {
    /// The normalization cube. Normalized shapes span at most 0.95 of it, so
    /// the outer lattice layer sits beyond every surface.
    fn default() -> Self {
        Self::cube(UNIT_HALF)
    }
}

/// `R³` samples of an occupancy field over a lattice covering `extent`,
/// corners included.
///
/// Layout: x is the slowest axis, z the fastest, i.e. the value at lattice
/// index `(i, j, k)` is `values[(i * R + j) * R + k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    resolution: usize,
    extent: Extent,
    values: Vec<f32>,
}

impl OccupancyGrid {
    pub fn new(resolution: usize, extent: Extent, values: Vec<f32>) -> Result<Self> {
        if resolution < 2 {
            return Err(Error::invalid(format!("grid resolution must be >= 2, got {resolution}")));
        }
        extent.validate()?;
        let expected = resolution.pow(3);
        if values.len() != expected {
            return Err(Error::ShapeMismatch {
                tensor: "grid values".into(),
                expected,
                actual: values.len(),
            });
        }
        Ok(Self {
            resolution,
            extent,
            values,
        })
    }

    /// Samples `f` at every lattice point.
    pub fn from_fn(resolution: usize, extent: Extent, f: impl Fn(&Vec3) -> f32) -> Result<Self> {
        if resolution < 2 {
            return Err(Error::invalid(format!("grid resolution must be >= 2, got {resolution}")));
        }
        extent.validate()?;
        let values = lattice_points(resolution, &extent).iter().map(f).collect();
        Self::new(resolution, extent, values)
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn extent(&self) -> &Extent {
        &self.extent
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f32] {
        &mut self.values
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.resolution + j) * self.resolution + k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f32 {
        self.values[self.index(i, j, k)]
    }

    pub fn spacing(&self) -> Vec3 {
        spacing(self.resolution, &self.extent)
    }

    pub fn point(&self, i: usize, j: usize, k: usize) -> Vec3 {
        let h = self.spacing();
        Vec3::new(
            self.extent.min[0] + h.x * i as f64,
            self.extent.min[1] + h.y * j as f64,
            self.extent.min[2] + h.z * k as f64,
        )
    }

    /// Sets the outermost lattice layer to `value`.
    pub fn fill_boundary(&mut self, value: f32) {
        let r = self.resolution;
        for i in 0..r {
            for j in 0..r {
                for k in 0..r {
                    if i == 0 || j == 0 || k == 0 || i == r - 1 || j == r - 1 || k == r - 1 {
                        let idx = self.index(i, j, k);
                        self.values[idx] = value;
                    }
                }
            }
        }
    }
}

fn spacing(resolution: usize, extent: &Extent) -> Vec3 {
    let d = (resolution - 1) as f64;
    Vec3::new(
        (extent.max[0] - extent.min[0]) / d,
        (extent.max[1] - extent.min[1]) / d,
        (extent.max[2] - extent.min[2]) / d,
    )
}

/// Lattice coordinates in grid layout order.
pub fn lattice_points(resolution: usize, extent: &Extent) -> Vec<Vec3> {
    let h = spacing(resolution, extent);
    let mut out = Vec::with_capacity(resolution.pow(3));
    for i in 0..resolution {
        for j in 0..resolution {
            for k in 0..resolution {
                out.push(Vec3::new(
                    extent.min[0] + h.x * i as f64,
                    extent.min[1] + h.y * j as f64,
                    extent.min[2] + h.z * k as f64,
                ));
            }
        }
    }
    out
}
