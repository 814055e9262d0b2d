//! Generalized winding numbers by exact solid-angle summation.
//!
//! Each triangle `(a, b, c)` seen from `p` subtends the signed solid angle
//! `Ω = 2·atan2(a·(b×c), |a||b||c| + (a·b)|c| + (b·c)|a| + (c·a)|b|)` with the
//! vertices taken relative to `p` (Van Oosterom and Strackee). The winding
//! number is `ΣΩ / 4π`.
//!
//! [`WindingTree`] answers the same query in sublinear time without
//! approximation. For a cluster of faces whose bounding box excludes `p`,
//! the cluster and a fan over its boundary loop (apex inside the box) bound
//! a region not containing `p`, so both subtend the same solid angle. The
//! fan has one triangle per boundary edge, far fewer than the cluster.

use std::f64::consts::PI;

use rayon::prelude::*;

use super::mesh::{TriMesh, Vec3};

/// Winding numbers above this count as inside.
pub const OCCUPANCY_THRESHOLD: f64 = 0.5;

#[inline]
fn solid_angle(a: &Vec3, b: &Vec3, c: &Vec3, la: f64, lb: f64, lc: f64) -> f64 {
    let det = a.dot(&b.cross(c));
    let den = la * lb * lc + a.dot(b) * lc + b.dot(c) * la + c.dot(a) * lb;
    2.0 * det.atan2(den)
}

pub fn winding_number(mesh: &TriMesh, point: &Vec3) -> f64 {
    let mut rel = Vec::new();
    let mut len = Vec::new();
    winding_with_scratch(mesh, point, &mut rel, &mut len)
}

fn winding_with_scratch(mesh: &TriMesh, p: &Vec3, rel: &mut Vec<Vec3>, len: &mut Vec<f64>) -> f64 {
    rel.clear();
    len.clear();
    rel.extend(mesh.vertices.iter().map(|v| v - p));
    len.extend(rel.iter().map(|r| r.norm()));
    let mut total = 0.0;
    for &[i, j, k] in &mesh.faces {
        let (i, j, k) = (i as usize, j as usize, k as usize);
        total += solid_angle(&rel[i], &rel[j], &rel[k], len[i], len[j], len[k]);
    }
    total / (4.0 * PI)
}

/// Batch query; results are in input order.
pub fn winding_numbers(mesh: &TriMesh, points: &[Vec3]) -> Vec<f64> {
    points
        .par_iter()
        .map_init(
            || (Vec::new(), Vec::new()),
            |(rel, len), p| winding_with_scratch(mesh, p, rel, len),
        )
        .collect()
}

/// Ground-truth occupancy bits: 1 where the winding number exceeds 0.5.
///
/// Meant for closed, consistently oriented meshes. Open meshes still produce
/// labels, with a warning, since the winding number degrades smoothly.
pub fn occupancy_labels(mesh: &TriMesh, points: &[Vec3]) -> Vec<u8> {
    let boundary = super::qa::boundary_edge_count(mesh);
    if boundary > 0 {
        log::warn!("occupancy labels on a mesh with {boundary} boundary edges");
    }
    WindingTree::new(mesh)
        .query_batch(points)
        .into_iter()
        .map(|w| u8::from(w > OCCUPANCY_THRESHOLD))
        .collect()
}

const LEAF_FACES: usize = 8;

#[derive(Debug)]
struct Node {
    min: Vec3,
    max: Vec3,
    /// Face range into `WindingTree::order`.
    start: usize,
    end: usize,
    children: Option<(usize, usize)>,
    /// Uncancelled directed edges of the cluster, used when the fan is
    /// cheaper than the faces.
    boundary: Vec<[u32; 2]>,
}

/// Bounding-volume hierarchy for exact winding-number queries.
#[derive(Debug)]
pub struct WindingTree<'m> {
    mesh: &'m TriMesh,
    order: Vec<u32>,
    nodes: Vec<Node>,
}

fn cancel_edges(mut edges: Vec<[u32; 2]>) -> Vec<[u32; 2]> {
    // Net multiplicity per undirected edge, keyed with the smaller index first.
    edges.sort_unstable_by_key(|&[a, b]| (a.min(b), a.max(b)));
    let mut out = Vec::new();
    let mut i = 0;
    while i < edges.len() {
        let key = (edges[i][0].min(edges[i][1]), edges[i][0].max(edges[i][1]));
        let mut net = 0i64;
        let mut j = i;
        while j < edges.len() && (edges[j][0].min(edges[j][1]), edges[j][0].max(edges[j][1])) == key {
            net += if edges[j][0] == key.0 { 1 } else { -1 };
            j += 1;
        }
        let e = if net > 0 { [key.0, key.1] } else { [key.1, key.0] };
        out.extend(std::iter::repeat_n(e, net.unsigned_abs() as usize));
        i = j;
    }
    out
}

impl<'m> WindingTree<'m> {
    pub fn new(mesh: &'m TriMesh) -> Self {
        let mut tree = Self {
            mesh,
            order: (0..mesh.faces.len() as u32).collect(),
            nodes: Vec::new(),
        };
        if !mesh.faces.is_empty() {
            let centroids: Vec<Vec3> = (0..mesh.faces.len())
                .map(|f| {
                    let [a, b, c] = mesh.triangle(f);
                    (a + b + c) / 3.0
                })
                .collect();
            tree.build(0, mesh.faces.len(), &centroids);
        }
        tree
    }

    fn build(&mut self, start: usize, end: usize, centroids: &[Vec3]) -> usize {
        let mesh = self.mesh;
        let mut min = Vec3::repeat(f64::INFINITY);
        let mut max = Vec3::repeat(f64::NEG_INFINITY);
        for &f in &self.order[start..end] {
            for &v in &mesh.faces[f as usize] {
                let p = mesh.vertices[v as usize];
                min = min.inf(&p);
                max = max.sup(&p);
            }
        }
        let id = self.nodes.len();
        self.nodes.push(Node {
            min,
            max,
            start,
            end,
            children: None,
            boundary: Vec::new(),
        });
        let edges = if end - start <= LEAF_FACES {
            self.order[start..end]
                .iter()
                .flat_map(|&f| {
                    let [a, b, c] = mesh.faces[f as usize];
                    [[a, b], [b, c], [c, a]]
                })
                .collect()
        } else {
            let axis = (max - min).imax();
            let mid = (start + end) / 2;
            self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
                centroids[a as usize][axis].total_cmp(&centroids[b as usize][axis])
            });
            let l = self.build(start, mid, centroids);
            let r = self.build(mid, end, centroids);
            self.nodes[id].children = Some((l, r));
            let mut e = self.nodes[l].boundary.clone();
            e.extend_from_slice(&self.nodes[r].boundary);
            e
        };
        self.nodes[id].boundary = cancel_edges(edges);
        id
    }

    pub fn query(&self, p: &Vec3) -> f64 {
        if self.nodes.is_empty() {
            return 0.0;
        }
        let verts = &self.mesh.vertices;
        let tri = |a: Vec3, b: Vec3, c: Vec3| {
            let (a, b, c) = (a - p, b - p, c - p);
            solid_angle(&a, &b, &c, a.norm(), b.norm(), c.norm())
        };
        let mut total = 0.0;
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            let faces = node.end - node.start;
            let margin = 1e-9 * (node.max - node.min).amax().max(1e-300);
            let outside = (0..3).any(|a| p[a] < node.min[a] - margin || p[a] > node.max[a] + margin);
            if outside && node.boundary.len() < faces {
                let apex = (node.min + node.max) * 0.5;
                for &[a, b] in &node.boundary {
                    total += tri(apex, verts[a as usize], verts[b as usize]);
                }
            } else if let Some((l, r)) = node.children {
                stack.push(r);
                stack.push(l);
            } else {
                for &f in &self.order[node.start..node.end] {
                    let [a, b, c] = self.mesh.faces[f as usize];
                    total += tri(verts[a as usize], verts[b as usize], verts[c as usize]);
                }
            }
        }
        total / (4.0 * PI)
    }

    /// Batch query; results are in input order.
    pub fn query_batch(&self, points: &[Vec3]) -> Vec<f64> {
        points.par_iter().map(|p| self.query(p)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::primitives::{cube, icosphere};
    use crate::geometry::sampling::{sample_near_surface, sample_volume_points};
    use crate::rng::seeded;

    #[test]
    fn interior_point_of_closed_sphere_is_one() {
        let m = icosphere(4, 0.4);
        assert!((winding_number(&m, &Vec3::zeros()) - 1.0).abs() < 1e-6);
        assert!(winding_number(&m, &Vec3::new(0.49, 0.49, 0.49)).abs() < 1e-6);
    }

    #[test]
    fn in_plane_point_of_single_triangle_is_zero() {
        let m = TriMesh::new(vec![Vec3::zeros(), Vec3::x(), Vec3::y()], vec![[0, 1, 2]]).unwrap();
        assert!(winding_number(&m, &Vec3::new(2.0, 2.0, 0.0)).abs() < 1e-9);
    }

    #[test]
    fn additive_over_face_partitions() {
        let m = icosphere(3, 0.4);
        let (lo, hi) = m.faces.split_at(m.faces.len() / 2);
        let (a, b) = (m.with_faces(lo), m.with_faces(hi));
        for p in sample_volume_points(50, &mut seeded(9)) {
            let whole = winding_number(&m, &p);
            let parts = winding_number(&a, &p) + winding_number(&b, &p);
            assert!((whole - parts).abs() < 1e-9);
        }
    }

    #[test]
    fn labels_match_analytic_sphere() {
        let m = icosphere(4, 0.4);
        let pts = sample_volume_points(1000, &mut seeded(4));
        let labels = occupancy_labels(&m, &pts);
        for (p, l) in pts.iter().zip(&labels) {
            let r = p.norm();
            if (r - 0.4).abs() > 1e-3 {
                assert_eq!(*l, u8::from(r < 0.4), "r = {r}");
            }
        }
    }

    #[test]
    fn cube_center_and_far_corner() {
        let m = cube(0.5);
        assert_eq!(occupancy_labels(&m, &[Vec3::zeros()]), vec![1]);
        assert_eq!(occupancy_labels(&m, &vec![Vec3::new(0.49, 0.49, 0.49); 5]), vec![0; 5]);
    }

    #[test]
    fn surface_point_is_finite() {
        let m = cube(0.5);
        let w = winding_number(&m, &Vec3::new(0.25, 0.1, -0.05));
        assert!(w.is_finite());
    }

    #[test]
    fn tree_agrees_with_exact_sum() {
        let sphere = icosphere(4, 0.4);
        let holed = sphere.without_face(7);
        let boxes = cube(0.5).merged(&icosphere(2, 0.1).translated(Vec3::new(0.3, 0.3, 0.3)));
        let mut pts = sample_volume_points(300, &mut seeded(31));
        pts.extend(sample_near_surface(&sphere, 300, 0.01, &mut seeded(32)).unwrap());
        for m in [&sphere, &holed, &boxes] {
            let tree = WindingTree::new(m);
            for p in &pts {
                let exact = winding_number(m, p);
                assert!((tree.query(p) - exact).abs() < 1e-9, "{p:?}");
            }
        }
    }

    #[test]
    fn batch_matches_single_queries_in_order() {
        let m = icosphere(2, 0.4);
        let pts = sample_volume_points(64, &mut seeded(12));
        let batch = winding_numbers(&m, &pts);
        for (p, w) in pts.iter().zip(&batch) {
            assert_eq!(*w, winding_number(&m, p));
        }
    }
}
