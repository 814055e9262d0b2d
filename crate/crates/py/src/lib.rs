//! Python bindings: meshes, per-shape occupancy MLPs, the weight-space
//! denoiser and the evaluation metrics.

use occgen::diffusion::{generate, train, SampleConfig, ScheduleConfig, TrainConfig};
use occgen::geometry::{self, primitives, TriMesh, Vec3};
use occgen::inr::{self, FitConfig, MlpHeader, MlpParams};
use occgen::metrics::{self, PointCloud};
use occgen::rng::seeded;
use occgen::weightspace::{self, DenoiserCheckpoint, DenoiserConfig};
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

type Point = (f64, f64, f64);

fn to_py(e: occgen::Error) -> PyErr {
    match e {
        occgen::Error::Io(io) => PyIOError::new_err(io.to_string()),
        e if e.is_numeric() => PyRuntimeError::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

fn vec3(p: &Point) -> Vec3 {
    Vec3::new(p.0, p.1, p.2)
}

fn cloud(points: &[Point]) -> PointCloud {
    PointCloud::new(points.iter().map(vec3).collect())
}

#[pyclass(name = "Mesh", module = "occgen_py", from_py_object)]
#[derive(Clone)]
struct PyMesh {
    inner: TriMesh,
}

#[pymethods]
impl PyMesh {
    #[new]
    fn new(vertices: Vec<Point>, faces: Vec<[u32; 3]>) -> PyResult<Self> {
        let inner = TriMesh::new(vertices.iter().map(vec3).collect(), faces).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn icosphere(subdivisions: u32, radius: f64) -> Self {
        Self {
            inner: primitives::icosphere(subdivisions, radius),
        }
    }

    #[staticmethod]
    fn ellipsoid(subdivisions: u32, a: f64, b: f64, c: f64) -> Self {
        Self {
            inner: primitives::ellipsoid(subdivisions, Vec3::new(a, b, c)),
        }
    }

    /// OBJ or binary STL.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: geometry::load_mesh(path).map_err(to_py)?,
        })
    }

    fn save_obj(&self, path: &str) -> PyResult<()> {
        geometry::write_obj(&self.inner, path).map_err(to_py)
    }

    #[getter]
    fn vertices(&self) -> Vec<Point> {
        self.inner.vertices.iter().map(|v| (v.x, v.y, v.z)).collect()
    }

    #[getter]
    fn faces(&self) -> Vec<[u32; 3]> {
        self.inner.faces.clone()
    }

    fn surface_area(&self) -> f64 {
        self.inner.surface_area()
    }

    fn volume(&self) -> f64 {
        self.inner.signed_volume()
    }

    fn normalized(&self) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.normalize_to_unit_cube().map_err(to_py)?,
        })
    }

    /// Quality report as a dict; `suggested_status` is the display label.
    fn qa<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let r = geometry::qa_report(&self.inner);
        let d = PyDict::new(py);
        d.set_item("boundary_edge_count", r.boundary_edge_count)?;
        d.set_item("connected_components", r.connected_components)?;
        d.set_item("watertight", r.watertight)?;
        d.set_item("bbox_extent", r.bbox_extent.to_vec())?;
        d.set_item("duplicate_vertex_count", r.duplicate_vertex_count)?;
        d.set_item("suggested_status", r.suggested_status.label())?;
        Ok(d)
    }

    /// Inside test by generalized winding number.
    fn contains(&self, points: Vec<Point>) -> Vec<bool> {
        let pts: Vec<Vec3> = points.iter().map(vec3).collect();
        geometry::occupancy_labels(&self.inner, &pts).into_iter().map(|l| l == 1).collect()
    }

    #[pyo3(signature = (n, seed = 0))]
    fn sample_surface(&self, n: usize, seed: u64) -> PyResult<Vec<Point>> {
        let c = geometry::surface_sample(&self.inner, n, &mut seeded(seed)).map_err(to_py)?;
        Ok(c.points.iter().map(|v| (v.x, v.y, v.z)).collect())
    }

    fn __len__(&self) -> usize {
        self.inner.faces.len()
    }

    fn __repr__(&self) -> String {
        format!("Mesh(vertices={}, faces={})", self.inner.vertices.len(), self.inner.faces.len())
    }
}

/// One occupancy network.
#[pyclass(name = "Mlp", module = "occgen_py", from_py_object)]
#[derive(Clone)]
struct PyMlp {
    inner: MlpParams,
}

#[pymethods]
impl PyMlp {
    #[classattr]
    const PARAM_COUNT: usize = inr::PARAM_COUNT;

    /// Fits a mesh already normalized to the unit cube. Returns the network
    /// and its final epoch loss.
    #[staticmethod]
    #[pyo3(signature = (mesh, epochs = 1000, seed = 0, minibatch = 2048))]
    fn fit(py: Python<'_>, mesh: &PyMesh, epochs: usize, seed: u64, minibatch: usize) -> PyResult<(Self, f64)> {
        let cfg = FitConfig {
            epochs,
            seed,
            minibatch,
            ..FitConfig::default()
        };
        let mesh = mesh.inner.clone();
        let (params, log) = py.detach(|| inr::fit_mlp(&mesh, &cfg)).map_err(to_py)?;
        Ok((Self { inner: params }, log.final_loss().unwrap_or(f64::NAN)))
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: inr::load_mlp(path).map_err(to_py)?.0,
        })
    }

    #[pyo3(signature = (path, seed = 0))]
    fn save(&self, path: &str, seed: u64) -> PyResult<()> {
        inr::save_mlp(path, &self.inner, &MlpHeader::new(seed)).map_err(to_py)
    }

    /// Flat weight vector in W1, b1, ..., W4, b4 order.
    fn theta(&self) -> PyResult<Vec<f32>> {
        weightspace::flatten(&self.inner).map_err(to_py)
    }

    #[staticmethod]
    fn from_theta(theta: Vec<f32>) -> PyResult<Self> {
        Ok(Self {
            inner: weightspace::unflatten(&theta, &Default::default()).map_err(to_py)?,
        })
    }

    /// Occupancy probabilities at the given points.
    fn occupancy(&self, points: Vec<Point>) -> PyResult<Vec<f32>> {
        let pts: Vec<Vec3> = points.iter().map(vec3).collect();
        let logits = inr::mlp_forward(&self.inner, &pts).map_err(to_py)?;
        Ok(logits.into_iter().map(inr::sigmoid).collect())
    }

    /// Marching cubes at the 0.5 level; an empty mesh when nothing is occupied.
    #[pyo3(signature = (resolution = 128))]
    fn reconstruct(&self, py: Python<'_>, resolution: usize) -> PyResult<PyMesh> {
        let params = self.inner.clone();
        let r = py.detach(|| inr::reconstruct(&params, resolution)).map_err(to_py)?;
        Ok(PyMesh { inner: r.mesh })
    }
}

/// A trained weight-space denoiser with its standardization and schedule.
#[pyclass(name = "Denoiser", module = "occgen_py", from_py_object)]
#[derive(Clone)]
struct PyDenoiser {
    inner: DenoiserCheckpoint,
}

#[pymethods]
impl PyDenoiser {
    /// Trains the small preset (or `n_emb`/`layers`/`heads` overrides) on
    /// networks fitted with a shared initialization.
    #[staticmethod]
    #[pyo3(signature = (networks, epochs = 2000, batch = 32, seed = 0, n_emb = 256, layers = 4, heads = 4))]
    fn train(
        py: Python<'_>,
        networks: Vec<PyMlp>,
        epochs: usize,
        batch: usize,
        seed: u64,
        n_emb: usize,
        layers: usize,
        heads: usize,
    ) -> PyResult<Self> {
        let thetas: Vec<Vec<f32>> = networks
            .iter()
            .map(|n| weightspace::flatten(&n.inner))
            .collect::<occgen::Result<_>>()
            .map_err(to_py)?;
        let cfg = TrainConfig {
            epochs,
            batch,
            seed,
            ..TrainConfig::default()
        };
        let model = DenoiserConfig {
            n_emb,
            layers,
            heads,
            seed,
            ..DenoiserConfig::default()
        };
        let out = py
            .detach(|| train(&thetas, &[], &cfg, &model, &ScheduleConfig::default()))
            .map_err(to_py)?;
        Ok(Self { inner: out.last })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: weightspace::load_denoiser(path).map_err(to_py)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        weightspace::save_denoiser(path, &self.inner).map_err(to_py)
    }

    #[getter]
    fn param_count(&self) -> usize {
        self.inner.model.param_count()
    }

    /// DDIM samples decoded to networks.
    #[pyo3(signature = (count, steps = 100, eta = 0.0, seed = 0))]
    fn sample(&self, py: Python<'_>, count: usize, steps: usize, eta: f64, seed: u64) -> PyResult<Vec<PyMlp>> {
        let cfg = SampleConfig {
            ddim_steps: steps,
            eta,
            count,
            seed,
        };
        let sched = self.inner.schedule.build().map_err(to_py)?;
        let ckpt = &self.inner;
        let thetas = py
            .detach(|| occgen::diffusion::ddim_sample_batch(&ckpt.model, &sched, &ckpt.stats, &cfg))
            .map_err(to_py)?;
        thetas
            .iter()
            .map(|t| {
                Ok(PyMlp {
                    inner: weightspace::unflatten(t, ckpt.model.signature()).map_err(to_py)?,
                })
            })
            .collect()
    }

    /// Samples and reconstructs in one go.
    #[pyo3(signature = (count, resolution = 64, steps = 100, seed = 0))]
    fn generate(&self, py: Python<'_>, count: usize, resolution: usize, steps: usize, seed: u64) -> PyResult<Vec<PyMesh>> {
        let cfg = SampleConfig {
            ddim_steps: steps,
            eta: 0.0,
            count,
            seed,
        };
        let ckpt = &self.inner;
        let shapes = py.detach(|| generate(ckpt, &cfg, resolution)).map_err(to_py)?;
        Ok(shapes
            .into_iter()
            .map(|s| PyMesh {
                inner: s.reconstruction.mesh,
            })
            .collect())
    }
}

#[pyfunction]
fn chamfer_l1(a: Vec<Point>, b: Vec<Point>) -> PyResult<f64> {
    metrics::chamfer_l1(&cloud(&a), &cloud(&b)).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (a, b, tau = 0.01))]
fn f_score(a: Vec<Point>, b: Vec<Point>, tau: f64) -> PyResult<f64> {
    metrics::f_score(&cloud(&a), &cloud(&b), tau).map_err(to_py)
}

/// Monte-Carlo volumetric IoU; returns `(value, standard_error)`.
#[pyfunction]
#[pyo3(signature = (a, b, samples = 100_000, seed = 0))]
fn viou(a: &PyMesh, b: &PyMesh, samples: usize, seed: u64) -> PyResult<(f64, f64)> {
    let v = metrics::viou(&a.inner, &b.inner, samples, &mut seeded(seed)).map_err(to_py)?;
    Ok((v.value, v.std_error))
}

/// VIoU, Chamfer-L1, normal consistency and F-Score of a reconstruction.
#[pyfunction]
#[pyo3(signature = (reconstruction, reference, points = 100_000, viou_samples = 100_000, seed = 0))]
fn shape_metrics<'py>(
    py: Python<'py>,
    reconstruction: &PyMesh,
    reference: &PyMesh,
    points: usize,
    viou_samples: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let m = metrics::shape_metrics(&reconstruction.inner, &reference.inner, points, viou_samples, seed).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("viou", m.viou)?;
    d.set_item("chamfer_l1", m.chamfer_l1)?;
    d.set_item("nc", m.nc)?;
    d.set_item("fscore", m.fscore)?;
    Ok(d)
}

/// MMD (x100), coverage, 1-NNA and FGD between two sets of meshes.
#[pyfunction]
#[pyo3(signature = (generated, reference, points = 2048, seed = 0))]
fn set_metrics<'py>(
    py: Python<'py>,
    generated: Vec<PyMesh>,
    reference: Vec<PyMesh>,
    points: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let sample = |set: &[PyMesh], offset: u64| -> PyResult<Vec<PointCloud>> {
        set.iter()
            .enumerate()
            .map(|(i, m)| {
                geometry::surface_sample(&m.inner, points, &mut occgen::rng::derive(seed, offset + i as u64)).map_err(to_py)
            })
            .collect()
    };
    let g = sample(&generated, 0)?;
    let r = sample(&reference, 1 << 32)?;
    let rep = metrics::set_metrics(&g, &r, seed).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("mmd_x100", rep.mmd_x100)?;
    d.set_item("cov_pct", rep.cov_pct)?;
    d.set_item("one_nna_pct", rep.one_nna_pct)?;
    d.set_item("fgd", rep.fgd)?;
    Ok(d)
}

#[pymodule]
fn occgen_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMesh>()?;
    m.add_class::<PyMlp>()?;
    m.add_class::<PyDenoiser>()?;
    m.add_function(wrap_pyfunction!(chamfer_l1, m)?)?;
    m.add_function(wrap_pyfunction!(f_score, m)?)?;
    m.add_function(wrap_pyfunction!(viou, m)?)?;
    m.add_function(wrap_pyfunction!(shape_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(set_metrics, m)?)?;
    Ok(())
}
