//! Analytic fixture shapes: icospheres, ellipsoids and boxes.

use std::collections::HashMap;

use super::mesh::{TriMesh, Vec3};

/// Icosahedron refined `subdivisions` times with vertices projected to the
/// sphere. Has `10·4ⁿ+2` vertices and `20·4ⁿ` faces.
pub fn icosphere(subdivisions: u32, radius: f64) -> TriMesh {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = [
        (-1.0, phi, 0.0),
        (1.0, phi, 0.0),
        (-1.0, -phi, 0.0),
        (1.0, -phi, 0.0),
        (0.0, -1.0, phi),
        (0.0, 1.0, phi),
        (0.0, -1.0, -phi),
        (0.0, 1.0, -phi),
        (phi, 0.0, -1.0),
        (phi, 0.0, 1.0),
        (-phi, 0.0, -1.0),
        (-phi, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];

    for _ in 0..subdivisions {
        let mut midpoints: HashMap<(u32, u32), u32> = HashMap::new();
        let mut midpoint = |a: u32, b: u32, vertices: &mut Vec<Vec3>| -> u32 {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                let m = (vertices[a as usize] + vertices[b as usize]).normalize();
                vertices.push(m);
                (vertices.len() - 1) as u32
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for &[a, b, c] in &faces {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }

    TriMesh {
        vertices: vertices.into_iter().map(|v| v * radius).collect(),
        faces,
    }
}

/// Icosphere stretched to the given semi-axes.
pub fn ellipsoid(subdivisions: u32, semi_axes: Vec3) -> TriMesh {
    icosphere(subdivisions, 1.0).scaled(semi_axes)
}

/// Axis-aligned cube of the given side length centered at the origin.
pub fn cube(side: f64) -> TriMesh {
    let h = side / 2.0;
    let vertices = (0..8)
        .map(|i| {
            Vec3::new(
                if i & 1 == 0 { -h } else { h },
                if i & 2 == 0 { -h } else { h },
                if i & 4 == 0 { -h } else { h },
            )
        })
        .collect();
    let faces = vec![
        // -z
        [0, 2, 3],
        [0, 3, 1],
        // +z
        [4, 5, 7],
        [4, 7, 6],
        // -y
        [0, 1, 5],
        [0, 5, 4],
        // +y
        [2, 6, 7],
        [2, 7, 3],
        // -x
        [0, 4, 6],
        [0, 6, 2],
        // +x
        [1, 3, 7],
        [1, 7, 5],
    ];
    TriMesh { vertices, faces }
}

/// Box with the given half-extents centered at the origin.
pub fn cuboid(half_extents: Vec3) -> TriMesh {
    cube(2.0).scaled(half_extents)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icosphere_counts_follow_subdivision_formula() {
        for n in 0..=4u32 {
            let m = icosphere(n, 1.0);
            assert_eq!(m.vertices.len(), 10 * 4usize.pow(n) + 2);
            assert_eq!(m.faces.len(), 20 * 4usize.pow(n));
        }
    }

    #[test]
    fn primitives_are_outward_oriented() {
        assert!(icosphere(0, 1.0).signed_volume() > 0.0);
        assert!(icosphere(2, 1.0).signed_volume() > 0.0);
        assert!(cube(1.0).signed_volume() > 0.0);
        for f in 0..12 {
            let m = cube(1.0);
            let [a, b, c] = m.triangle(f);
            let centroid = (a + b + c) / 3.0;
            assert!(m.face_normal(f).dot(&centroid) > 0.0, "face {f}");
        }
    }

    #[test]
    fn icosphere_vertices_lie_on_sphere() {
        let m = icosphere(3, 0.4);
        for v in &m.vertices {
            assert!((v.norm() - 0.4).abs() < 1e-12);
        }
    }
}
