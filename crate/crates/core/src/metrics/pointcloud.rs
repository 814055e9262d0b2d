use crate::error::{Error, Result};
use crate::geometry::Vec3;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub normals: Option<Vec<Vec3>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Self {
        Self { points, normals: None }
    }

    /// Attaches normals, renormalizing each to unit length.
    pub fn with_normals(points: Vec<Vec3>, normals: Vec<Vec3>) -> Self {
        assert_eq!(points.len(), normals.len(), "one normal per point");
        let normals = normals
            .into_iter()
            .map(|n| {
                let l = n.norm();
                if l > 0.0 {
                    n / l
                } else {
                    n
                }
            })
            .collect();
        Self {
            points,
            normals: Some(normals),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub(crate) fn require_normals(&self) -> Result<&[Vec3]> {
        self.normals
            .as_deref()
            .ok_or_else(|| Error::invalid("point cloud has no normals"))
    }

    pub fn transformed(&self, rotation: &nalgebra::Rotation3<f64>, translation: Vec3) -> PointCloud {
        PointCloud {
            points: self.points.iter().map(|p| rotation * p + translation).collect(),
            normals: self
                .normals
                .as_ref()
                .map(|ns| ns.iter().map(|n| rotation * n).collect()),
        }
    }
}
