//! Iso-surface extraction with the classic 256-case cube table.
//!
//! Corner `c` of a cell sets bit `c` of the case index when its value is
//! at or below the iso level (outside). Vertices live on lattice edges and are
//! shared between neighbouring cells, so closed iso-surfaces come out as
//! closed indexed meshes. Triangles are emitted counter-clockwise seen from
//! the low-value side: normals point from inside (high) to outside (low).

use std::collections::HashMap;

use super::grid::OccupancyGrid;
use super::mc_table::TRI_TABLE;
use super::mesh::{TriMesh, Vec3};

pub const DEFAULT_ISO: f32 = 0.5;

/// Corner offsets in table order.
const CORNERS: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [1, 1, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [1, 1, 1],
    [0, 1, 1],
];

/// Corner pairs for the 12 cell edges in table order.
const EDGES: [[usize; 2]; 12] = [
    [0, 1],
    [1, 2],
    [2, 3],
    [3, 0],
    [4, 5],
    [5, 6],
    [6, 7],
    [7, 4],
    [0, 4],
    [1, 5],
    [2, 6],
    [3, 7],
];

/// Extracts the `iso` level set. Returns an empty mesh when the grid has no
/// crossing.
pub fn marching_cubes(grid: &OccupancyGrid, iso: f32) -> TriMesh {
    let r = grid.resolution();
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut faces: Vec<[u32; 3]> = Vec::new();
    // Key: (lower lattice endpoint, axis) of a lattice edge.
    let mut edge_vertex: HashMap<(usize, u8), u32> = HashMap::new();

    let mut vals = [0f32; 8];
    for i in 0..r - 1 {
        for j in 0..r - 1 {
            for k in 0..r - 1 {
                let mut case = 0usize;
                for (c, off) in CORNERS.iter().enumerate() {
                    vals[c] = grid.get(i + off[0], j + off[1], k + off[2]);
                    if vals[c] <= iso {
                        case |= 1 << c;
                    }
                }
                if case == 0 || case == 255 {
                    continue;
                }
                let row = &TRI_TABLE[case];
                let mut edge_ids = [u32::MAX; 12];
                for tri in row.chunks(3).take_while(|t| t[0] >= 0) {
                    let mut ids = [0u32; 3];
                    for (slot, &e) in ids.iter_mut().zip(tri) {
                        let e = e as usize;
                        if edge_ids[e] == u32::MAX {
                            let [c0, c1] = EDGES[e];
                            let (o0, o1) = (CORNERS[c0], CORNERS[c1]);
                            let lo = if o0 <= o1 { o0 } else { o1 };
                            let axis = (0..3).find(|&a| o0[a] != o1[a]).unwrap() as u8;
                            let key = ((i + lo[0]) * r * r + (j + lo[1]) * r + (k + lo[2]), axis);
                            edge_ids[e] = *edge_vertex.entry(key).or_insert_with(|| {
                                let p0 = grid.point(i + o0[0], j + o0[1], k + o0[2]);
                                let p1 = grid.point(i + o1[0], j + o1[1], k + o1[2]);
                                let (v0, v1) = (vals[c0] as f64, vals[c1] as f64);
                                let t = ((iso as f64 - v0) / (v1 - v0)).clamp(0.0, 1.0);
                                vertices.push(p0 + (p1 - p0) * t);
                                (vertices.len() - 1) as u32
                            });
                        }
                        *slot = edge_ids[e];
                    }
                    faces.push(ids);
                }
            }
        }
    }
    TriMesh { vertices, faces }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::grid::Extent;
    use crate::geometry::qa::qa_report;
    use crate::geometry::winding::winding_number;
    use crate::rng::seeded;
    use rand::Rng;
    use std::f64::consts::PI;

    fn sphere_grid(r: usize) -> OccupancyGrid {
        OccupancyGrid::from_fn(r, Extent::default(), |p| if p.norm() < 0.4 { 1.0 } else { 0.0 }).unwrap()
    }

    #[test]
    fn constant_grid_gives_empty_mesh() {
        let g = OccupancyGrid::new(8, Extent::default(), vec![0.0; 512]).unwrap();
        assert!(marching_cubes(&g, 0.5).is_empty());
        let g = OccupancyGrid::new(8, Extent::default(), vec![1.0; 512]).unwrap();
        assert!(marching_cubes(&g, 0.5).is_empty());
    }

    #[test]
    fn sphere_is_closed_and_outward() {
        let m = marching_cubes(&sphere_grid(32), 0.5);
        assert!(m.signed_volume() > 0.0);
        assert!((winding_number(&m, &Vec3::zeros()) - 1.0).abs() < 1e-9);
        let qa = qa_report(&m);
        assert_eq!(qa.boundary_edge_count, 0);
        assert_eq!(qa.connected_components, 1);
    }

    #[test]
    fn single_inside_corner_makes_one_outward_triangle() {
        let mut values = vec![0.0f32; 8];
        values[0] = 1.0;
        let g = OccupancyGrid::new(2, Extent::default(), values).unwrap();
        let m = marching_cubes(&g, 0.5);
        assert_eq!(m.faces.len(), 1);
        // Normal points away from the inside corner at (-0.5, -0.5, -0.5).
        assert!(m.face_normal(0).dot(&Vec3::new(1.0, 1.0, 1.0)) > 0.0);
    }

    #[test]
    fn random_fields_with_outside_border_are_watertight() {
        let mut rng = seeded(21);
        for _ in 0..20 {
            let r = 10;
            let values = (0..r * r * r).map(|_| rng.random::<f32>()).collect();
            let mut g = OccupancyGrid::new(r, Extent::default(), values).unwrap();
            g.fill_boundary(0.0);
            let m = marching_cubes(&g, 0.5);
            let qa = qa_report(&m);
            assert_eq!(qa.boundary_edge_count, 0);
            assert!(m.faces.iter().all(|f| f[0] != f[1] && f[1] != f[2] && f[0] != f[2]));
        }
    }

    #[test]
    fn sphere_volume_and_area_at_128() {
        let (v0, a0) = (4.0 / 3.0 * PI * 0.064, 4.0 * PI * 0.16);
        let m = marching_cubes(&sphere_grid(128), 0.5);
        let (vol, area) = (m.signed_volume(), m.surface_area());
        eprintln!("binary: vol {vol} ({v0}) area {area} ({a0})");
        assert!((vol - v0).abs() / v0 < 0.02);

        let h = 1.0 / 127.0;
        let g = OccupancyGrid::from_fn(128, Extent::default(), |p| {
            (0.5 + (0.4 - p.norm()) / h).clamp(0.0, 1.0) as f32
        })
        .unwrap();
        let m = marching_cubes(&g, 0.5);
        let (vol, area) = (m.signed_volume(), m.surface_area());
        eprintln!("ramp: vol {vol} ({v0}) area {area} ({a0})");
        assert!((vol - v0).abs() / v0 < 0.02);
        assert!((area - a0).abs() / a0 < 0.02);
        assert_eq!(qa_report(&m).boundary_edge_count, 0);
    }
}
