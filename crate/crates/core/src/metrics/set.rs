//! Set-level generative metrics under the Chamfer-L1 distance.
//!
//! Every function takes the distance matrix as input so that one matrix over
//! `Sg ∪ Sr` can serve all of them. Ties resolve to the lowest index.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fgd::frechet_geom_distance;
use super::kdtree::KdTree;
use super::surface::Correspondence;
use super::PointCloud;
use crate::error::{Error, Result};

/// Dense row-major distance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl DistanceMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }
}

/// Chamfer-L1 between every `a ∈ rows` and `b ∈ cols`.
pub fn chamfer_matrix(rows: &[PointCloud], cols: &[PointCloud]) -> Result<DistanceMatrix> {
    if rows.iter().chain(cols).any(|c| c.is_empty()) {
        return Err(Error::invalid("empty point cloud in set"));
    }
    let row_trees: Vec<KdTree> = rows.par_iter().map(|c| KdTree::new(&c.points)).collect();
    let col_trees: Vec<KdTree> = cols.par_iter().map(|c| KdTree::new(&c.points)).collect();
    let values = (0..rows.len() * cols.len())
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / cols.len(), k % cols.len());
            Correspondence::with_trees(&rows[i], &row_trees[i], &cols[j], &col_trees[j]).chamfer_l1()
        })
        .collect();
    Ok(DistanceMatrix {
        rows: rows.len(),
        cols: cols.len(),
        values,
    })
}

fn check_sets(g: usize, r: usize, min: usize) -> Result<()> {
    if g < min || r < min {
        return Err(Error::invalid(format!("each set needs at least {min} clouds, got {g} and {r}")));
    }
    Ok(())
}

/// Mean over references of the distance to the closest generated sample.
/// `d` has generated samples as rows and references as columns.
pub fn mmd(d: &DistanceMatrix) -> Result<f64> {
    check_sets(d.rows, d.cols, 1)?;
    let mut total = 0.0;
    for r in 0..d.cols {
        let mut best = f64::INFINITY;
        for g in 0..d.rows {
            best = best.min(d.get(g, r));
        }
        total += best;
    }
    Ok(total / d.cols as f64)
}

/// Percentage of references that are the nearest reference of at least one
/// generated sample.
pub fn coverage(d: &DistanceMatrix) -> Result<f64> {
    check_sets(d.rows, d.cols, 1)?;
    let mut hit = vec![false; d.cols];
    for g in 0..d.rows {
        let mut best = (0, f64::INFINITY);
        for r in 0..d.cols {
            if d.get(g, r) < best.1 {
                best = (r, d.get(g, r));
            }
        }
        hit[best.0] = true;
    }
    Ok(100.0 * hit.iter().filter(|&&h| h).count() as f64 / d.cols as f64)
}

/// Leave-one-out 1-NN accuracy over `Sg ∪ Sr`. `d` is the square matrix over
/// the union with the `n_generated` generated samples first.
pub fn one_nna(d: &DistanceMatrix, n_generated: usize) -> Result<f64> {
    if d.rows != d.cols || n_generated > d.rows {
        return Err(Error::invalid("one_nna needs a square union matrix"));
    }
    check_sets(n_generated, d.rows - n_generated, 2)?;
    let mut correct = 0;
    for i in 0..d.rows {
        let mut best = (usize::MAX, f64::INFINITY);
        for j in (0..d.cols).filter(|&j| j != i) {
            if d.get(i, j) < best.1 {
                best = (j, d.get(i, j));
            }
        }
        correct += usize::from((best.0 < n_generated) == (i < n_generated));
    }
    Ok(100.0 * correct as f64 / d.rows as f64)
}

/// Generated-versus-reference set comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SetMetricsReport {
    pub mmd: f64,
    pub mmd_x100: f64,
    pub cov_pct: f64,
    pub one_nna_pct: f64,
    pub fgd: f64,
    pub seed: u64,
}

/// All four set metrics from one union distance matrix.
pub fn set_metrics(generated: &[PointCloud], reference: &[PointCloud], seed: u64) -> Result<SetMetricsReport> {
    check_sets(generated.len(), reference.len(), 2)?;
    let union: Vec<PointCloud> = generated.iter().chain(reference).cloned().collect();
    let full = chamfer_matrix(&union, &union)?;
    let ng = generated.len();
    let cross = DistanceMatrix {
        rows: ng,
        cols: reference.len(),
        values: (0..ng)
            .flat_map(|g| (0..reference.len()).map(move |r| (g, ng + r)))
            .map(|(i, j)| full.get(i, j))
            .collect(),
    };
    let mmd = mmd(&cross)?;
    Ok(SetMetricsReport {
        mmd,
        mmd_x100: mmd * 100.0,
        cov_pct: coverage(&cross)?,
        one_nna_pct: one_nna(&full, ng)?,
        fgd: frechet_geom_distance(generated, reference)?,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{sample_volume_points, Vec3};
    use crate::rng::seeded;

    fn blob(center: Vec3, seed: u64) -> PointCloud {
        PointCloud::new(sample_volume_points(64, &mut seeded(seed)).into_iter().map(|p| p * 0.1 + center).collect())
    }

    #[test]
    fn identical_sets() {
        let s: Vec<PointCloud> = (0..5).map(|i| blob(Vec3::new(i as f64, 0.0, 0.0), i)).collect();
        let d = chamfer_matrix(&s, &s).unwrap();
        assert_eq!(mmd(&d).unwrap(), 0.0);
        assert_eq!(coverage(&d).unwrap(), 100.0);
    }

    #[test]
    fn mmd_is_not_symmetric() {
        let x = blob(Vec3::zeros(), 1);
        let y = blob(Vec3::new(1.0, 0.0, 0.0), 2);
        let d = chamfer_matrix(&[x.clone()], &[x.clone(), y.clone()]).unwrap();
        let xy = chamfer_matrix(&[x.clone()], &[y.clone()]).unwrap().get(0, 0);
        assert_eq!(mmd(&d).unwrap(), xy / 2.0);
        let rev = chamfer_matrix(&[x.clone(), y], &[x]).unwrap();
        assert_ne!(mmd(&d).unwrap(), mmd(&rev).unwrap());
    }

    #[test]
    fn coverage_collapses_to_one_reference() {
        let r: Vec<PointCloud> = (0..4).map(|i| blob(Vec3::new(i as f64, 0.0, 0.0), i)).collect();
        let g: Vec<PointCloud> = (0..6).map(|i| blob(Vec3::new(-0.2, 0.0, 0.0), 10 + i)).collect();
        assert_eq!(coverage(&chamfer_matrix(&g, &r).unwrap()).unwrap(), 25.0);
    }

    #[test]
    fn one_nna_separated_and_interleaved() {
        let g: Vec<PointCloud> = (0..4).map(|i| blob(Vec3::zeros(), i)).collect();
        let r: Vec<PointCloud> = (0..4).map(|i| blob(Vec3::new(10.0, 0.0, 0.0), 20 + i)).collect();
        let u: Vec<PointCloud> = g.iter().chain(&r).cloned().collect();
        assert_eq!(one_nna(&chamfer_matrix(&u, &u).unwrap(), 4).unwrap(), 100.0);

        // g0 at 0, r0 at 1, g1 at 5, r1 at 6: every nearest neighbour crosses.
        let at = |x: f64| PointCloud::new(vec![Vec3::new(x, 0.0, 0.0)]);
        let u = vec![at(0.0), at(5.0), at(1.0), at(6.0)];
        assert_eq!(one_nna(&chamfer_matrix(&u, &u).unwrap(), 2).unwrap(), 0.0);
    }

    #[test]
    fn one_nna_symmetric_in_argument_order() {
        let g: Vec<PointCloud> = (0..5).map(|i| blob(Vec3::new(0.05 * i as f64, 0.0, 0.0), i)).collect();
        let r: Vec<PointCloud> = (0..6).map(|i| blob(Vec3::new(0.0, 0.05 * i as f64, 0.0), 30 + i)).collect();
        let a = set_metrics(&g, &r, 0).unwrap();
        let b = set_metrics(&r, &g, 0).unwrap();
        assert_eq!(a.one_nna_pct, b.one_nna_pct);
    }
}
