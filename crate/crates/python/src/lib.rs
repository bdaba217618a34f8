//! Python bindings: frames, the degradation operators, the seeded chain,
//! PCD I/O, sensor detection and APE.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use lidegrade_core::engine::{self, ImuSample, MotionEstimate};
use lidegrade_core::eval::{compute_ape as ape, Pose, Trajectory};
use lidegrade_core::io::{self, PcdEncoding};
use lidegrade_core::model::{NoiseParams, OcclusionParams};
use lidegrade_core::{FrameStats, Point, PointCloudFrame, ScenarioConfig, Tier};
use nalgebra::{Quaternion, UnitQuaternion, Vector3};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A point-cloud frame. Points are kept in acquisition order.
#[pyclass(name = "Frame", module = "lidegrade")]
pub struct PyFrame {
    inner: PointCloudFrame,
}

#[pymethods]
impl PyFrame {
    /// `xyz` is a sequence of (x, y, z); `time_offsets` defaults to zeros.
    #[new]
    #[pyo3(signature = (xyz, time_offsets=None, intensity=None, frame_index=0, sensor_id="", t0=0.0))]
    fn new(
        xyz: Vec<[f64; 3]>,
        time_offsets: Option<Vec<f64>>,
        intensity: Option<Vec<f64>>,
        frame_index: u64,
        sensor_id: &str,
        t0: f64,
    ) -> PyResult<Self> {
        let n = xyz.len();
        let times = time_offsets.unwrap_or_else(|| vec![0.0; n]);
        if times.len() != n {
            return Err(PyValueError::new_err(format!("{} time offsets for {n} points", times.len())));
        }
        if intensity.as_ref().is_some_and(|v| v.len() != n) {
            return Err(PyValueError::new_err("intensity length differs from point count"));
        }
        let points = xyz
            .iter()
            .zip(&times)
            .enumerate()
            .map(|(i, (p, &t))| {
                let mut pt = Point::new(p[0], p[1], p[2], t);
                pt.attributes.intensity = intensity.as_ref().map(|v| v[i]);
                pt
            })
            .collect();
        let mut inner = PointCloudFrame::new(frame_index, sensor_id, t0, points);
        if intensity.is_some() {
            inner.schema = io::stream::StreamSchema::XyzIntensity.schema();
        }
        Ok(Self { inner })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Frame(points={}, frame_index={}, sensor_id={:?})", self.inner.len(), self.inner.frame_index, self.inner.sensor_id)
    }

    #[getter]
    fn frame_index(&self) -> u64 {
        self.inner.frame_index
    }

    #[getter]
    fn sensor_id(&self) -> String {
        self.inner.sensor_id.clone()
    }

    #[getter]
    fn t0(&self) -> f64 {
        self.inner.t0
    }

    fn xyz(&self) -> Vec<(f64, f64, f64)> {
        self.inner.points.iter().map(|p| (p.position.x, p.position.y, p.position.z)).collect()
    }

    fn time_offsets(&self) -> Vec<f64> {
        self.inner.points.iter().map(|p| p.time_offset).collect()
    }

    fn intensity(&self) -> Vec<Option<f64>> {
        self.inner.points.iter().map(|p| p.attributes.intensity).collect()
    }

    /// Field names of the frame's record layout.
    fn fields(&self) -> Vec<String> {
        self.inner.schema.fields().iter().map(|f| f.name.clone()).collect()
    }

    /// Bit-for-bit equality, including metadata.
    fn bitwise_eq(&self, other: PyRef<'_, PyFrame>) -> bool {
        self.inner.bitwise_eq(&other.inner)
    }
}

fn wrap(inner: PointCloudFrame) -> PyFrame {
    PyFrame { inner }
}

/// A validated scenario config.
#[pyclass(name = "Config", module = "lidegrade")]
pub struct PyConfig {
    inner: ScenarioConfig,
}

#[pymethods]
impl PyConfig {
    /// Built-in tier table and module order.
    #[new]
    #[pyo3(signature = (seed=0))]
    fn new(seed: u64) -> Self {
        Self { inner: ScenarioConfig::with_defaults(seed) }
    }

    /// Parses YAML text, then applies `key.path=value` overrides.
    #[staticmethod]
    #[pyo3(signature = (text, overrides=Vec::new()))]
    fn from_yaml(text: &str, overrides: Vec<String>) -> PyResult<Self> {
        let inner = io::parse_scenario_config_with_overrides(text, &overrides).map_err(value_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.global_seed
    }

    #[getter]
    fn module_chain(&self) -> Vec<&'static str> {
        self.inner.module_chain.iter().map(|m| m.as_str()).collect()
    }

    /// Fully expanded config as JSON text.
    fn to_json(&self) -> String {
        io::config_document(&self.inner).to_string()
    }
}

fn stats_dict<'py>(py: Python<'py>, stats: &FrameStats) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("frame_index", stats.frame_index)?;
    d.set_item("input_count", stats.input_count)?;
    d.set_item("output_count", stats.output_count)?;
    d.set_item("reduction_ratio", stats.reduction_ratio)?;
    let modules = PyList::empty(py);
    for m in &stats.modules {
        let md = PyDict::new(py);
        md.set_item("module", m.module.as_str())?;
        md.set_item("input_count", m.input_count)?;
        md.set_item("output_count", m.output_count)?;
        md.set_item("latency_ms", m.seconds * 1e3)?;
        modules.append(md)?;
    }
    d.set_item("modules", modules)?;
    Ok(d)
}

#[pyfunction]
fn derive_seed(global_seed: u64, frame_index: u64, module_ordinal: u64) -> u64 {
    lidegrade_core::derive_seed(global_seed, frame_index, module_ordinal)
}

#[pyfunction]
fn apply_dropout(frame: PyRef<'_, PyFrame>, ratio: f64, seed: u64) -> PyResult<PyFrame> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(PyValueError::new_err("ratio must be in [0, 1]"));
    }
    Ok(wrap(engine::apply_dropout(frame.inner.clone(), ratio, seed)))
}

/// Limits in radians.
#[pyfunction]
fn apply_fov_reduction(frame: PyRef<'_, PyFrame>, max_azimuth: f64, max_elevation: f64) -> PyFrame {
    wrap(engine::apply_fov_reduction(frame.inner.clone(), max_azimuth, max_elevation))
}

#[pyfunction]
#[pyo3(signature = (frame, patch_count, patch_radius, seed, min_range=1.0, max_range=15.0))]
fn apply_occlusion(
    frame: PyRef<'_, PyFrame>,
    patch_count: usize,
    patch_radius: f64,
    seed: u64,
    min_range: f64,
    max_range: f64,
) -> PyFrame {
    let params = OcclusionParams { patch_count, patch_radius, min_range, max_range };
    wrap(engine::apply_occlusion(frame.inner.clone(), &params, seed))
}

/// Removes azimuths in `[start, start + extent)`, radians.
#[pyfunction]
fn apply_structured_dropout(frame: PyRef<'_, PyFrame>, start: f64, extent: f64) -> PyFrame {
    wrap(engine::apply_structured_dropout(frame.inner.clone(), start, extent))
}

#[pyfunction]
fn apply_sparsification(frame: PyRef<'_, PyFrame>, stride: usize) -> PyResult<PyFrame> {
    if stride == 0 {
        return Err(PyValueError::new_err("stride must be positive"));
    }
    Ok(wrap(engine::apply_sparsification(frame.inner.clone(), stride)))
}

#[pyfunction]
#[pyo3(signature = (frame, sigma, seed, outlier_prob=0.0, outlier_sigma=0.0))]
fn apply_noise(frame: PyRef<'_, PyFrame>, sigma: f64, seed: u64, outlier_prob: f64, outlier_sigma: f64) -> PyFrame {
    let params = NoiseParams { sigma, outlier_prob, outlier_sigma };
    wrap(engine::apply_noise(frame.inner.clone(), &params, seed))
}

/// Constant linear (m/s) and angular (rad/s) velocity over the scan.
#[pyfunction]
fn apply_motion_distortion(frame: PyRef<'_, PyFrame>, linear_velocity: [f64; 3], angular_velocity: [f64; 3]) -> PyFrame {
    let motion =
        MotionEstimate { linear_velocity: Vector3::from(linear_velocity), angular_velocity: Vector3::from(angular_velocity) };
    wrap(engine::apply_motion_distortion(frame.inner.clone(), &motion))
}

/// Runs the configured chain at `tier`. `imu` rows are
/// (t, wx, wy, wz, ax, ay, az). Returns the degraded frame and a stats
/// dict.
#[pyfunction]
#[pyo3(signature = (frame, config, tier, imu=None))]
fn apply_chain<'py>(
    py: Python<'py>,
    frame: PyRef<'_, PyFrame>,
    config: PyRef<'_, PyConfig>,
    tier: &str,
    imu: Option<Vec<[f64; 7]>>,
) -> PyResult<(PyFrame, Bound<'py, PyDict>)> {
    let tier: Tier = tier.parse().map_err(value_err)?;
    let samples: Option<Vec<ImuSample>> = imu.map(|rows| {
        rows.iter()
            .map(|r| ImuSample {
                timestamp: r[0],
                angular_velocity: Vector3::new(r[1], r[2], r[3]),
                linear_acceleration: Vector3::new(r[4], r[5], r[6]),
            })
            .collect()
    });
    let (out, stats) = engine::apply_chain(&frame.inner, &config.inner, tier, samples.as_deref()).map_err(value_err)?;
    Ok((wrap(out), stats_dict(py, &stats)?))
}

#[pyfunction]
fn read_pcd(path: PathBuf) -> PyResult<PyFrame> {
    io::read_pcd_report(&path).map(|r| wrap(r.frame)).map_err(|e| PyIOError::new_err(format!("{}: {e}", path.display())))
}

#[pyfunction]
#[pyo3(signature = (frame, path, encoding="binary"))]
fn write_pcd(frame: PyRef<'_, PyFrame>, path: PathBuf, encoding: &str) -> PyResult<()> {
    let enc = match encoding {
        "binary" => PcdEncoding::Binary,
        "ascii" => PcdEncoding::Ascii,
        other => return Err(PyValueError::new_err(format!("unknown encoding {other:?}"))),
    };
    io::write_pcd(&frame.inner, &path, enc).map_err(|e| PyIOError::new_err(format!("{}: {e}", path.display())))
}

/// Sensor profile inferred from a frame's layout and geometry.
#[pyfunction]
fn detect_profile<'py>(py: Python<'py>, frame: PyRef<'_, PyFrame>) -> PyResult<Bound<'py, PyDict>> {
    let p = io::detect_sensor_profile(&frame.inner.schema, Some(&frame.inner)).map_err(value_err)?;
    let d = PyDict::new(py);
    d.set_item("profile_class", p.profile_class.as_str())?;
    d.set_item("nominal_azimuth_span", p.nominal_azimuth_span)?;
    d.set_item("nominal_rate", p.nominal_rate)?;
    d.set_item("vertical_fov", p.vertical_fov)?;
    d.set_item("fields", p.field_schema.fields().iter().map(|f| f.name.clone()).collect::<Vec<_>>())?;
    Ok(d)
}

fn trajectory(rows: &[[f64; 8]]) -> PyResult<Trajectory> {
    let poses = rows
        .iter()
        .map(|r| Pose {
            timestamp: r[0],
            translation: Vector3::new(r[1], r[2], r[3]),
            rotation: UnitQuaternion::from_quaternion(Quaternion::new(r[7], r[4], r[5], r[6])),
        })
        .collect();
    Trajectory::new(poses).map_err(value_err)
}

/// APE between TUM-style rows (t, tx, ty, tz, qx, qy, qz, qw).
#[pyfunction]
#[pyo3(signature = (reference, estimate, align=false, max_dt=0.01))]
fn compute_ape<'py>(
    py: Python<'py>,
    reference: Vec<[f64; 8]>,
    estimate: Vec<[f64; 8]>,
    align: bool,
    max_dt: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let r = ape(&trajectory(&reference)?, &trajectory(&estimate)?, align, max_dt).map_err(value_err)?;
    let d = PyDict::new(py);
    for (k, v) in [("mean", r.mean), ("std", r.std), ("rmse", r.rmse), ("median", r.median), ("min", r.min), ("max", r.max)] {
        d.set_item(k, v)?;
    }
    Ok(d)
}

#[pymodule]
#[pyo3(name = "lidegrade")]
fn init(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("TIERS", Tier::ALL.iter().map(|t| t.as_str()).collect::<Vec<_>>())?;
    m.add_class::<PyFrame>()?;
    m.add_class::<PyConfig>()?;
    m.add_function(wrap_pyfunction!(derive_seed, m)?)?;
    m.add_function(wrap_pyfunction!(apply_dropout, m)?)?;
    m.add_function(wrap_pyfunction!(apply_fov_reduction, m)?)?;
    m.add_function(wrap_pyfunction!(apply_occlusion, m)?)?;
    m.add_function(wrap_pyfunction!(apply_structured_dropout, m)?)?;
    m.add_function(wrap_pyfunction!(apply_sparsification, m)?)?;
    m.add_function(wrap_pyfunction!(apply_noise, m)?)?;
    m.add_function(wrap_pyfunction!(apply_motion_distortion, m)?)?;
    m.add_function(wrap_pyfunction!(apply_chain, m)?)?;
    m.add_function(wrap_pyfunction!(read_pcd, m)?)?;
    m.add_function(wrap_pyfunction!(write_pcd, m)?)?;
    m.add_function(wrap_pyfunction!(detect_profile, m)?)?;
    m.add_function(wrap_pyfunction!(compute_ape, m)?)?;
    Ok(())
}
