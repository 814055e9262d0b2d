//! Fréchet distance between Gaussian fits of per-cloud geometric
//! descriptors.
//!
//! The descriptor of a cloud, after centring it, is 51 numbers: the three
//! covariance eigenvalues in descending order, the 6 second-order and 10
//! third-order central moments, and a 32-bin histogram of `‖p‖` over
//! `[0, 0.9]` normalized to sum 1 (radii beyond 0.9 fall in the last bin).

use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen};

use super::PointCloud;
use crate::error::{Error, Result};
use crate::geometry::Vec3;

pub const DESCRIPTOR_DIM: usize = 51;
pub const RADIAL_BINS: usize = 32;
pub const RADIAL_MAX: f64 = 0.9;

/// Exponent triples of the third-order monomials.
const CUBIC: [[i32; 3]; 10] = [
    [3, 0, 0],
    [0, 3, 0],
    [0, 0, 3],
    [2, 1, 0],
    [2, 0, 1],
    [1, 2, 0],
    [0, 2, 1],
    [1, 0, 2],
    [0, 1, 2],
    [1, 1, 1],
];

pub fn descriptor(cloud: &PointCloud) -> Result<Vec<f64>> {
    if cloud.is_empty() {
        return Err(Error::invalid("descriptor of an empty cloud"));
    }
    let n = cloud.len() as f64;
    let centroid = cloud.points.iter().sum::<Vec3>() / n;
    let centred: Vec<Vec3> = cloud.points.iter().map(|p| p - centroid).collect();

    let mut cov = Matrix3::<f64>::zeros();
    for p in &centred {
        cov += p * p.transpose();
    }
    cov /= n;
    let mut eig: Vec<f64> = cov.symmetric_eigenvalues().iter().copied().collect();
    eig.sort_by(|a, b| b.total_cmp(a));

    let mut out = Vec::with_capacity(DESCRIPTOR_DIM);
    out.extend(eig);
    out.extend([cov[(0, 0)], cov[(1, 1)], cov[(2, 2)], cov[(0, 1)], cov[(0, 2)], cov[(1, 2)]]);
    for e in CUBIC {
        let m = centred
            .iter()
            .map(|p| p.x.powi(e[0]) * p.y.powi(e[1]) * p.z.powi(e[2]))
            .sum::<f64>()
            / n;
        out.push(m);
    }
    let mut hist = [0.0; RADIAL_BINS];
    for p in &centred {
        let b = ((p.norm() / RADIAL_MAX) * RADIAL_BINS as f64) as usize;
        hist[b.min(RADIAL_BINS - 1)] += 1.0;
    }
    out.extend(hist.iter().map(|h| h / n));
    debug_assert_eq!(out.len(), DESCRIPTOR_DIM);
    Ok(out)
}

/// Sample mean and unbiased covariance of row vectors.
pub fn gaussian_fit(features: &[Vec<f64>]) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if features.len() < 2 {
        return Err(Error::invalid("a covariance needs at least two samples"));
    }
    let dim = features[0].len();
    let n = features.len() as f64;
    let mut mu = DVector::zeros(dim);
    for f in features {
        mu += DVector::from_column_slice(f);
    }
    mu /= n;
    let mut cov = DMatrix::zeros(dim, dim);
    for f in features {
        let d = DVector::from_column_slice(f) - &mu;
        cov += &d * d.transpose();
    }
    cov /= n - 1.0;
    Ok((mu, cov))
}

fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// `‖μ₁−μ₂‖² + Tr(Σ₁ + Σ₂ − 2(Σ₁Σ₂)^½)`.
///
/// The trace of `(Σ₁Σ₂)^½` equals that of `(S Σ₂ S)^½` with `S = Σ₁^½`,
/// which is symmetric, so only symmetric eigendecompositions are needed.
/// Negative eigenvalues from round-off are clamped to zero.
pub fn frechet_distance(mu1: &DVector<f64>, s1: &DMatrix<f64>, mu2: &DVector<f64>, s2: &DMatrix<f64>) -> f64 {
    let s = psd_sqrt(s1);
    let m = &s * s2 * &s;
    let m = (&m + m.transpose()) * 0.5;
    let cross: f64 = SymmetricEigen::new(m).eigenvalues.iter().map(|l| l.max(0.0).sqrt()).sum();
    let value = (mu1 - mu2).norm_squared() + s1.trace() + s2.trace() - 2.0 * cross;
    value.max(0.0)
}

/// Fréchet distance between descriptor populations of two sets of clouds.
pub fn frechet_from_features(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    let (m1, s1) = gaussian_fit(a)?;
    let (m2, s2) = gaussian_fit(b)?;
    Ok(frechet_distance(&m1, &s1, &m2, &s2))
}

pub fn frechet_geom_distance(generated: &[PointCloud], reference: &[PointCloud]) -> Result<f64> {
    let fa = generated.iter().map(descriptor).collect::<Result<Vec<_>>>()?;
    let fb = reference.iter().map(descriptor).collect::<Result<Vec<_>>>()?;
    frechet_from_features(&fa, &fb)
}
