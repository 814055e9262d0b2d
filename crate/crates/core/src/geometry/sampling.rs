//! Point sampling inside the unit cube and on/near mesh surfaces.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::mesh::{TriMesh, Vec3, UNIT_HALF};
use crate::error::{Error, Result};
use crate::metrics::PointCloud;

/// Default standard deviation of the near-surface offsets.
pub const NEAR_SURFACE_SIGMA: f64 = 0.02;

/// `n` points i.i.d. uniform over `[-0.5, 0.5]³`.
pub fn sample_volume_points<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<Vec3> {
    (0..n)
        .map(|_| {
            Vec3::new(
                rng.random::<f64>() - UNIT_HALF,
                rng.random::<f64>() - UNIT_HALF,
                rng.random::<f64>() - UNIT_HALF,
            )
        })
        .collect()
}

/// Area-weighted face picker.
struct FaceSampler {
    cumulative: Vec<f64>,
}

impl FaceSampler {
    fn new(mesh: &TriMesh) -> Result<Self> {
        if mesh.is_empty() {
            return Err(Error::EmptyMesh("cannot sample an empty surface".into()));
        }
        let mut acc = 0.0;
        let cumulative: Vec<f64> = mesh
            .face_areas()
            .into_iter()
            .map(|a| {
                acc += a;
                acc
            })
            .collect();
        if !(acc > 0.0) {
            return Err(Error::Degenerate("surface has zero area".into()));
        }
        Ok(Self { cumulative })
    }

    fn pick<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.cumulative.last().unwrap();
        let u = rng.random::<f64>() * total;
        let i = self.cumulative.partition_point(|&c| c <= u);
        i.min(self.cumulative.len() - 1)
    }
}

fn point_in_triangle<R: Rng + ?Sized>(tri: &[Vec3; 3], rng: &mut R) -> Vec3 {
    let r1 = rng.random::<f64>().sqrt();
    let r2 = rng.random::<f64>();
    tri[0] * (1.0 - r1) + tri[1] * (r1 * (1.0 - r2)) + tri[2] * (r1 * r2)
}

/// `n` area-weighted uniform surface points carrying their face normals.
pub fn surface_sample<R: Rng + ?Sized>(mesh: &TriMesh, n: usize, rng: &mut R) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::invalid("surface_sample needs n > 0"));
    }
    let sampler = FaceSampler::new(mesh)?;
    let mut points = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    for _ in 0..n {
        let f = sampler.pick(rng);
        points.push(point_in_triangle(&mesh.triangle(f), rng));
        normals.push(mesh.face_normal(f));
    }
    Ok(PointCloud::with_normals(points, normals))
}

/// Surface points displaced by isotropic Gaussian noise of std `sigma`,
/// clamped to the unit cube.
pub fn sample_near_surface<R: Rng + ?Sized>(
    mesh: &TriMesh,
    n: usize,
    sigma: f64,
    rng: &mut R,
) -> Result<Vec<Vec3>> {
    if !(sigma > 0.0) {
        return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
    }
    let sampler = FaceSampler::new(mesh)?;
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::invalid(e.to_string()))?;
    Ok((0..n)
        .map(|_| {
            let f = sampler.pick(rng);
            let p = point_in_triangle(&mesh.triangle(f), rng);
            let offset = Vec3::new(normal.sample(rng), normal.sample(rng), normal.sample(rng));
            (p + offset).map(|c| c.clamp(-UNIT_HALF, UNIT_HALF))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::primitives::icosphere;
    use crate::rng::seeded;

    #[test]
    fn volume_points_are_in_cube_and_deterministic() {
        let a = sample_volume_points(20_000, &mut seeded(1));
        let b = sample_volume_points(20_000, &mut seeded(1));
        assert_eq!(a.len(), 20_000);
        assert_eq!(a, b);
        assert!(a.iter().all(|p| p.iter().all(|c| (-0.5..=0.5).contains(c))));
    }

    #[test]
    fn volume_points_have_centered_means() {
        let n = 1_000_000;
        let pts = sample_volume_points(n, &mut seeded(7));
        let mean = pts.iter().fold(Vec3::zeros(), |a, p| a + p) / n as f64;
        for c in mean.iter() {
            assert!(c.abs() < 0.002, "mean {mean:?}");
        }
    }

    #[test]
    fn near_surface_concentrates_at_radius() {
        let mesh = icosphere(4, 0.4);
        let pts = sample_near_surface(&mesh, 20_000, 0.02, &mut seeded(3)).unwrap();
        let close = pts.iter().filter(|p| (p.norm() - 0.4).abs() < 0.08).count();
        assert!(close as f64 >= 0.99 * 20_000.0, "{close}");
        let again = sample_near_surface(&mesh, 20_000, 0.02, &mut seeded(3)).unwrap();
        assert_eq!(pts, again);
    }

    #[test]
    fn vanishing_sigma_stays_on_surface() {
        let mesh = icosphere(2, 0.4);
        let pts = sample_near_surface(&mesh, 2000, 1e-9, &mut seeded(5)).unwrap();
        for p in &pts {
            let d = (0..mesh.faces.len())
                .map(|f| plane_distance(&mesh, f, p))
                .fold(f64::INFINITY, f64::min);
            assert!(d < 1e-6);
        }
    }

    fn plane_distance(mesh: &TriMesh, f: usize, p: &Vec3) -> f64 {
        let [a, _, _] = mesh.triangle(f);
        (p - a).dot(&mesh.face_normal(f)).abs()
    }

    #[test]
    fn area_weighting_splits_square_evenly() {
        let mesh = TriMesh::new(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(1.0, 1.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap();
        let n = 100_000;
        let cloud = surface_sample(&mesh, n, &mut seeded(11)).unwrap();
        // Points below the diagonal y < x belong to the first triangle.
        let first = cloud.points.iter().filter(|p| p.y < p.x).count() as f64 / n as f64;
        assert!((first - 0.5).abs() < 0.01, "{first}");
    }

    #[test]
    fn single_surface_sample_lies_on_a_face_plane() {
        let mesh = icosphere(2, 0.4);
        let cloud = surface_sample(&mesh, 1, &mut seeded(2)).unwrap();
        let p = cloud.points[0];
        let d = (0..mesh.faces.len())
            .map(|f| plane_distance(&mesh, f, &p))
            .fold(f64::INFINITY, f64::min);
        assert!(d < 1e-9);
        let again = surface_sample(&mesh, 1, &mut seeded(2)).unwrap();
        assert_eq!(cloud.points, again.points);
    }
}
