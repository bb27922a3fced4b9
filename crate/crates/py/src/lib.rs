//! Python bindings.
//!
//! ```python
//! import vcd_py
//! cfg = vcd_py.MetricConfig("mode = scalar\nseed = 3")
//! cond = vcd_py.Frame.textured(16, 16, 3, seed=0)
//! vcd_py.fdl(cond, cond.circshift(1, 0), cfg)
//! vcd_py.score_buffer(flat_list, (n, h, w, c), "projections = 32")  # JSON text
//! ```

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use vcd_core::config::{parse_config_text, to_config_text};
use vcd_core::media::{self, Video};
use vcd_core::metrics::{self, Scorer, Variant};
use vcd_core::spectra::{CloudKind, PointCloud};
use vcd_core::transport::{self, Order, SwdConfig};
use vcd_core::{bridge, report};

create_exception!(vcd_py, VcdError, PyValueError, "Raised for any metric, format or configuration error.");

fn py_err(e: vcd_core::VcdError) -> PyErr {
    VcdError::new_err(format!("[{}] {e}", e.kind()))
}

fn order(p: u32) -> PyResult<Order> {
    Order::try_from(p).map_err(py_err)
}

#[pyclass(name = "Frame", module = "vcd_py", frozen, from_py_object)]
#[derive(Clone)]
pub struct PyFrame {
    inner: media::Frame,
}

#[pymethods]
impl PyFrame {
    /// Row-major, channel-last samples in [0, 1].
    #[new]
    fn new(height: usize, width: usize, channels: usize, data: Vec<f32>) -> PyResult<Self> {
        let inner = media::Frame::new(height, width, channels, data).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let inner = media::load_frame(path, None).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (height, width, channels, seed=0))]
    fn textured(height: usize, width: usize, channels: usize, seed: u64) -> PyResult<Self> {
        let inner = media::textured_frame(height, width, channels, seed).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn shape(&self) -> (usize, usize, usize) {
        (self.inner.height(), self.inner.width(), self.inner.channels())
    }

    fn data(&self) -> Vec<f32> {
        self.inner.data().to_vec()
    }

    fn circshift(&self, dx: i64, dy: i64) -> Self {
        Self { inner: self.inner.circshift(dx, dy) }
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        let is_vcdf = path.extension().is_some_and(|e| e == "vcdf");
        if is_vcdf {
            media::save_vcdf(&path, &self.inner).map_err(py_err)
        } else {
            media::save_pnm(&path, &self.inner).map_err(py_err)
        }
    }

    fn __repr__(&self) -> String {
        format!("Frame({})", self.inner.shape_string())
    }
}

#[pyclass(name = "MetricConfig", module = "vcd_py", frozen, from_py_object)]
#[derive(Clone)]
pub struct PyMetricConfig {
    inner: metrics::MetricConfig,
}

#[pymethods]
impl PyMetricConfig {
    /// Parses `key = value` lines; the empty string gives the defaults.
    #[new]
    #[pyo3(signature = (text=""))]
    fn new(text: &str) -> PyResult<Self> {
        Ok(Self { inner: parse_config_text(text).map_err(py_err)? })
    }

    fn to_text(&self) -> String {
        to_config_text(&self.inner)
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }

    #[getter]
    fn mode(&self) -> &'static str {
        self.inner.mode.name()
    }

    #[getter]
    fn encoder(&self) -> &'static str {
        self.inner.encoder.kind.name()
    }

    #[getter]
    fn projections(&self) -> usize {
        self.inner.swd.num_projections
    }

    fn __repr__(&self) -> String {
        format!(
            "MetricConfig(encoder={}, mode={}, projections={}, alpha={})",
            self.inner.encoder.kind, self.inner.mode, self.inner.swd.num_projections, self.inner.alpha
        )
    }
}

fn config_or_default(config: Option<&PyMetricConfig>) -> metrics::MetricConfig {
    config.map(|c| c.inner.clone()).unwrap_or_default()
}

/// Scores an (N, H, W, C) float buffer; returns report JSON or `{"error", "kind"}` JSON.
#[pyfunction]
#[pyo3(signature = (buffer, shape, config=""))]
fn score_buffer(py: Python<'_>, buffer: Vec<f32>, shape: (usize, usize, usize, usize), config: &str) -> String {
    let (n, h, w, c) = shape;
    py.detach(|| bridge::score_buffer(&buffer, [n, h, w, c], config))
}

#[pyfunction]
fn temporal_weight(i: usize, n: usize) -> PyResult<f64> {
    metrics::temporal_weight(i, n).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (a, b, order=2))]
fn exact_w1d(a: Vec<f64>, b: Vec<f64>, order: u32) -> PyResult<f64> {
    transport::exact_w1d(&a, &b, self::order(order)?).map_err(py_err)
}

fn cloud(points: Vec<Vec<f64>>) -> PyResult<PointCloud> {
    let dim = points.first().map_or(1, Vec::len);
    if points.iter().any(|p| p.len() != dim) {
        return Err(VcdError::new_err("all points need the same dimension"));
    }
    PointCloud::new(CloudKind::Amplitude, dim, points.concat()).map_err(py_err)
}

/// Sliced Wasserstein distance between two point lists of equal size and dimension.
#[pyfunction]
#[pyo3(signature = (a, b, projections=64, seed=0, order=2))]
fn sliced_wd(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>, projections: usize, seed: u64, order: u32) -> PyResult<f64> {
    let cfg = SwdConfig { num_projections: projections, seed, order: self::order(order)? };
    transport::sliced_wd(&cloud(a)?, &cloud(b)?, &cfg).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (u, v, config=None))]
fn fdl(py: Python<'_>, u: PyFrame, v: PyFrame, config: Option<PyMetricConfig>) -> PyResult<f64> {
    let cfg = config_or_default(config.as_ref());
    py.detach(|| metrics::fdl(&u.inner, &v.inner, &cfg)).map_err(py_err)
}

/// `(amp, phase, weight, total)` of frame `i` of an `n`-frame video.
#[pyfunction]
#[pyo3(signature = (cond, frame, i, n, config=None))]
fn vcd_frame(
    py: Python<'_>,
    cond: PyFrame,
    frame: PyFrame,
    i: usize,
    n: usize,
    config: Option<PyMetricConfig>,
) -> PyResult<(f64, f64, f64, f64)> {
    let cfg = config_or_default(config.as_ref());
    let s = py
        .detach(|| metrics::vcd_frame(&cond.inner, &frame.inner, i, n, &cfg))
        .map_err(py_err)?;
    Ok((s.amp, s.phase, s.weight, s.total))
}

/// Report JSON for a list of frames, the first one being the conditioning image.
#[pyfunction]
#[pyo3(signature = (frames, config=None, variant="vcd"))]
fn score_video(py: Python<'_>, frames: Vec<PyFrame>, config: Option<PyMetricConfig>, variant: &str) -> PyResult<String> {
    let cfg = config_or_default(config.as_ref());
    let variant: Variant = variant.parse().map_err(py_err)?;
    let frames = frames.into_iter().map(|f| f.inner).collect();
    py.detach(|| {
        let video = Video::new(frames, 1)?;
        let r = Scorer::new(&cfg)?.score_video(&video, None, variant)?;
        Ok(report::to_json(&r))
    })
    .map_err(py_err)
}

#[pymodule]
pub fn vcd_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("VcdError", m.py().get_type::<VcdError>())?;
    m.add_class::<PyFrame>()?;
    m.add_class::<PyMetricConfig>()?;
    m.add_function(wrap_pyfunction!(score_buffer, m)?)?;
    m.add_function(wrap_pyfunction!(temporal_weight, m)?)?;
    m.add_function(wrap_pyfunction!(exact_w1d, m)?)?;
    m.add_function(wrap_pyfunction!(sliced_wd, m)?)?;
    m.add_function(wrap_pyfunction!(fdl, m)?)?;
    m.add_function(wrap_pyfunction!(vcd_frame, m)?)?;
    m.add_function(wrap_pyfunction!(score_video, m)?)?;
    Ok(())
}
