use nalgebra::Vector3;

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Half-width of the cube every shape is normalized into.
pub const UNIT_HALF: f64 = 0.5;

/// Fraction of the unit cube the longest bounding-box axis spans after
/// normalization. The margin keeps iso-surfaces off the grid boundary.
pub const NORMALIZE_SPAN: f64 = 0.95;

/// Indexed triangle surface. Faces are counter-clockwise when seen from
/// outside, so face normals point out of the solid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[u32; 3]>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn volume(&self) -> f64 {
        let e = self.extent();
        e.x * e.y * e.z
    }
}

impl TriMesh {
    /// Builds a mesh, checking index bounds and rejecting degenerate faces.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>) -> Result<Self> {
        let n = vertices.len();
        for (fi, f) in faces.iter().enumerate() {
            if f.iter().any(|&i| i as usize >= n) {
                return Err(Error::Degenerate(format!(
                    "face {fi} references vertex out of range (have {n})"
                )));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::Degenerate(format!("face {fi} repeats a vertex: {f:?}")));
            }
        }
        if let Some(i) = vertices.iter().position(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::NonFinite(format!("vertex {i}")));
        }
        Ok(Self { vertices, faces })
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn triangle(&self, face: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[face];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    /// Unnormalized normal; its length is twice the face area.
    pub fn face_cross(&self, face: usize) -> Vec3 {
        let [a, b, c] = self.triangle(face);
        (b - a).cross(&(c - a))
    }

    pub fn face_normal(&self, face: usize) -> Vec3 {
        let n = self.face_cross(face);
        let len = n.norm();
        if len > 0.0 {
            n / len
        } else {
            Vec3::zeros()
        }
    }

    pub fn face_areas(&self) -> Vec<f64> {
        (0..self.faces.len())
            .map(|f| 0.5 * self.face_cross(f).norm())
            .collect()
    }

    pub fn surface_area(&self) -> f64 {
        self.face_areas().iter().sum()
    }

    /// Signed enclosed volume via the divergence theorem. Positive for a
    /// closed mesh with outward-facing triangles.
    pub fn signed_volume(&self) -> f64 {
        self.faces
            .iter()
            .map(|&[a, b, c]| {
                let (a, b, c) = (
                    self.vertices[a as usize],
                    self.vertices[b as usize],
                    self.vertices[c as usize],
                );
                a.dot(&b.cross(&c))
            })
            .sum::<f64>()
            / 6.0
    }

    pub fn bounding_box(&self) -> Option<Aabb> {
        let first = *self.vertices.first()?;
        let (min, max) = self
            .vertices
            .iter()
            .fold((first, first), |(lo, hi), v| (lo.inf(v), hi.sup(v)));
        Some(Aabb { min, max })
    }

    /// Centers the bounding box at the origin and scales uniformly so the
    /// longest axis spans `NORMALIZE_SPAN`.
    pub fn normalize_to_unit_cube(&self) -> Result<TriMesh> {
        let bbox = self
            .bounding_box()
            .ok_or_else(|| Error::EmptyMesh("cannot normalize a mesh without vertices".into()))?;
        let longest = bbox.extent().max();
        if !(longest > 0.0) {
            return Err(Error::Degenerate("mesh has zero extent".into()));
        }
        let center = bbox.center();
        let scale = NORMALIZE_SPAN / longest;
        Ok(self.map_vertices(|v| (v - center) * scale))
    }

    pub fn map_vertices(&self, f: impl Fn(&Vec3) -> Vec3) -> TriMesh {
        TriMesh {
            vertices: self.vertices.iter().map(f).collect(),
            faces: self.faces.clone(),
        }
    }

    pub fn translated(&self, offset: Vec3) -> TriMesh {
        self.map_vertices(|v| v + offset)
    }

    pub fn scaled(&self, s: Vec3) -> TriMesh {
        self.map_vertices(|v| v.component_mul(&s))
    }

    /// Disjoint union; indices of `other` are shifted.
    pub fn merged(&self, other: &TriMesh) -> TriMesh {
        let shift = self.vertices.len() as u32;
        let mut out = self.clone();
        out.vertices.extend_from_slice(&other.vertices);
        out.faces
            .extend(other.faces.iter().map(|f| [f[0] + shift, f[1] + shift, f[2] + shift]));
        out
    }

    pub fn without_face(&self, face: usize) -> TriMesh {
        let mut out = self.clone();
        out.faces.remove(face);
        out
    }

    /// Sub-mesh holding only the given faces, sharing the full vertex list.
    pub fn with_faces(&self, faces: &[[u32; 3]]) -> TriMesh {
        TriMesh {
            vertices: self.vertices.clone(),
            faces: faces.to_vec(),
        }
    }

    pub fn flipped(&self) -> TriMesh {
        TriMesh {
            vertices: self.vertices.clone(),
            faces: self.faces.iter().map(|&[a, b, c]| [a, c, b]).collect(),
        }
    }
}
