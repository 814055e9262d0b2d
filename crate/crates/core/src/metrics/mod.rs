//! Reconstruction and generative-set metrics over meshes and point clouds.

pub mod fgd;
pub mod kdtree;
mod pointcloud;
pub mod set;
pub mod surface;

pub use fgd::{descriptor, frechet_distance, frechet_from_features, frechet_geom_distance};
pub use kdtree::KdTree;
pub use pointcloud::PointCloud;
pub use set::{chamfer_matrix, coverage, mmd, one_nna, set_metrics, DistanceMatrix, SetMetricsReport};
pub use surface::{
    chamfer_l1, f_score, normal_consistency, shape_metrics, viou, Correspondence, ShapeMetrics, VolumeIou,
    DEFAULT_FSCORE_TAU, DEFAULT_VIOU_SAMPLES,
};
