//! Mesh-quality analysis and the dataset status taxonomy.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::io::WELD_TOLERANCE;
use super::mesh::TriMesh;

/// Review status of a dataset object. `NoFullShape` and `NotSure` are only
/// ever assigned by a human reviewer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
pub enum Status {
    Usable,
    NoFullShape,
    NotUsable,
    NotSure,
    RequiresEditing,
}

impl Status {
    pub const ALL: [Status; 5] = [
        Status::Usable,
        Status::NoFullShape,
        Status::NotUsable,
        Status::NotSure,
        Status::RequiresEditing,
    ];

    /// Display label used in reports.
    pub fn label(self) -> &'static str {
        match self {
            Status::Usable => "Usable",
            Status::NoFullShape => "No full shape",
            Status::NotUsable => "Not usable",
            Status::NotSure => "Not sure",
            Status::RequiresEditing => "Requires editing",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// More components than this suggests the object is not a single organ.
pub const MAX_COMPONENTS: usize = 3;
/// Boundary-edge fraction above which the surface is considered broken.
pub const MAX_BOUNDARY_RATIO: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaReport {
    pub boundary_edge_count: usize,
    pub connected_components: usize,
    pub watertight: bool,
    pub bbox_extent: [f64; 3],
    pub duplicate_vertex_count: usize,
    pub suggested_status: Status,
}

/// Face incidence per undirected edge.
fn edge_incidence(mesh: &TriMesh) -> HashMap<(u32, u32), u32> {
    let mut edges: HashMap<(u32, u32), u32> = HashMap::with_capacity(mesh.faces.len() * 3 / 2);
    for f in &mesh.faces {
        for e in 0..3 {
            let (a, b) = (f[e], f[(e + 1) % 3]);
            *edges.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
    }
    edges
}

/// Edges not shared by exactly two faces.
pub fn boundary_edge_count(mesh: &TriMesh) -> usize {
    edge_incidence(mesh).values().filter(|&&n| n != 2).count()
}

struct DisjointSet {
    parent: Vec<u32>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
        }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let p = self.parent[x as usize];
            self.parent[x as usize] = self.parent[p as usize];
            x = p;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb) as usize] = ra.min(rb);
        }
    }
}

/// Number of face groups connected through shared vertices.
pub fn connected_components(mesh: &TriMesh) -> usize {
    let mut ds = DisjointSet::new(mesh.vertices.len());
    for f in &mesh.faces {
        ds.union(f[0], f[1]);
        ds.union(f[1], f[2]);
    }
    let mut roots: Vec<u32> = mesh.faces.iter().map(|f| ds.find(f[0])).collect();
    roots.sort_unstable();
    roots.dedup();
    roots.len()
}

fn duplicate_vertex_count(mesh: &TriMesh) -> usize {
    let (unique, _) = super::io::weld(&mesh.vertices, WELD_TOLERANCE);
    mesh.vertices.len() - unique.len()
}

pub fn suggest_status(boundary_edges: usize, edges: usize, components: usize) -> Status {
    let ratio = if edges == 0 {
        1.0
    } else {
        boundary_edges as f64 / edges as f64
    };
    if components > MAX_COMPONENTS || ratio > MAX_BOUNDARY_RATIO || edges == 0 {
        Status::NotUsable
    } else if boundary_edges > 0 {
        Status::RequiresEditing
    } else {
        Status::Usable
    }
}

pub fn qa_report(mesh: &TriMesh) -> QaReport {
    let incidence = edge_incidence(mesh);
    let boundary = incidence.values().filter(|&&n| n != 2).count();
    let components = connected_components(mesh);
    let bbox_extent = mesh
        .bounding_box()
        .map(|b| {
            let e = b.extent();
            [e.x, e.y, e.z]
        })
        .unwrap_or([0.0; 3]);
    QaReport {
        boundary_edge_count: boundary,
        connected_components: components,
        watertight: boundary == 0 && !mesh.is_empty(),
        bbox_extent,
        duplicate_vertex_count: duplicate_vertex_count(mesh),
        suggested_status: suggest_status(boundary, incidence.len(), components),
    }
}
