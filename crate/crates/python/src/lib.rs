//! Python bindings: images, codecs, metrics and the target-quality search.

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyBytes;
use qpress::codecs::{resolve, Codec, ControlParameter, ParameterRange};
use qpress::imagecore::{load_pgm, raw_io, store_pgm, BitDepth, CompressedBlob, RasterImage, RawDescriptor, SpectralCube};
use qpress::metrics::{evaluate, MetricId, QualityMetric};
use qpress::multichannel::{compress_cube as cube_search, CubeSettings};
use qpress::search::{resolve_pair, Method, Probe, QualityTarget, Search, SearchError, SearchReport, SearchResult};
use std::fmt::Display;
use std::sync::Arc;

create_exception!(qpress, QpressError, PyException, "Any failure reported by qpress.");
create_exception!(qpress, InfeasibleError, QpressError, "The target lies outside the achievable metric interval.");

fn err(e: impl Display) -> PyErr {
    QpressError::new_err(e.to_string())
}

fn search_err(e: SearchError) -> PyErr {
    match e {
        SearchError::Infeasible { .. } => InfeasibleError::new_err(e.to_string()),
        other => err(other),
    }
}

fn depth(bits: u32) -> PyResult<BitDepth> {
    BitDepth::from_bits(bits).map_err(err)
}

/// Grayscale raster with 8- or 16-bit samples.
#[pyclass(name = "Image", module = "qpress", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyImage {
    inner: RasterImage,
}

#[pymethods]
impl PyImage {
    #[new]
    #[pyo3(signature = (width, height, bit_depth, samples))]
    fn new(width: usize, height: usize, bit_depth: u32, samples: Vec<u16>) -> PyResult<Self> {
        let inner = RasterImage::new(width, height, depth(bit_depth)?, samples).map_err(err)?;
        Ok(PyImage { inner })
    }

    #[staticmethod]
    fn filled(width: usize, height: usize, bit_depth: u32, value: u16) -> PyResult<Self> {
        let inner = RasterImage::filled(width, height, depth(bit_depth)?, value).map_err(err)?;
        Ok(PyImage { inner })
    }

    #[staticmethod]
    fn from_pgm(data: &[u8]) -> PyResult<Self> {
        Ok(PyImage {
            inner: load_pgm(data).map_err(err)?,
        })
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        let bytes = std::fs::read(&path).map_err(|e| err(format!("{}: {e}", path.display())))?;
        Self::from_pgm(&bytes)
    }

    fn to_pgm<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &store_pgm(&self.inner))
    }

    fn save(&self, path: std::path::PathBuf) -> PyResult<()> {
        std::fs::write(&path, store_pgm(&self.inner)).map_err(|e| err(format!("{}: {e}", path.display())))
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height()
    }

    #[getter]
    fn bit_depth(&self) -> u32 {
        self.inner.bit_depth().bits()
    }

    fn samples(&self) -> Vec<u16> {
        self.inner.samples().to_vec()
    }

    fn __eq__(&self, other: PyRef<'_, PyImage>) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!("Image({})", self.inner.shape_string())
    }
}

/// Self-describing container produced by a codec.
#[pyclass(name = "Blob", module = "qpress", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyBlob {
    inner: CompressedBlob,
}

#[pymethods]
impl PyBlob {
    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        Ok(PyBlob {
            inner: CompressedBlob::from_bytes(data).map_err(err)?,
        })
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &self.inner.to_bytes())
    }

    #[getter]
    fn codec_id(&self) -> &str {
        &self.inner.codec_id
    }

    #[getter]
    fn param(&self) -> f64 {
        self.inner.param.value()
    }

    #[getter]
    fn stored_len(&self) -> usize {
        self.inner.stored_len()
    }

    fn __len__(&self) -> usize {
        self.inner.stored_len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Blob(codec_id={:?}, param={}, {}x{}, {} bytes)",
            self.inner.codec_id,
            self.inner.param.value(),
            self.inner.width,
            self.inner.height,
            self.inner.stored_len()
        )
    }
}

/// A codec built from a spec such as `dct`, `dct-csf@8` or `stub:60:-1:1:50`.
#[pyclass(name = "Codec", module = "qpress", frozen)]
pub struct PyCodec {
    inner: Arc<dyn Codec>,
}

#[pymethods]
impl PyCodec {
    #[new]
    #[pyo3(signature = (spec = "dct"))]
    fn new(spec: &str) -> PyResult<Self> {
        Ok(PyCodec {
            inner: resolve(spec).map_err(err)?,
        })
    }

    #[getter]
    fn id(&self) -> &str {
        self.inner.id()
    }

    #[getter]
    fn param_kind(&self) -> &'static str {
        self.inner.descriptor().param_kind.as_str()
    }

    #[getter]
    fn default_range(&self) -> (f64, f64) {
        let r = self.inner.descriptor().default_range;
        (r.min(), r.max())
    }

    fn compress(&self, py: Python<'_>, image: PyRef<'_, PyImage>, param: f64) -> PyResult<PyBlob> {
        let p = ControlParameter::new(self.inner.descriptor().param_kind, param).map_err(err)?;
        let image = &image.inner;
        let codec = &self.inner;
        let blob = py.detach(|| codec.compress(image, p)).map_err(err)?;
        Ok(PyBlob { inner: blob })
    }

    fn decompress(&self, py: Python<'_>, blob: PyRef<'_, PyBlob>) -> PyResult<PyImage> {
        let blob = &blob.inner;
        let codec = &self.inner;
        let image = py.detach(|| codec.decompress(blob)).map_err(err)?;
        Ok(PyImage { inner: image })
    }

    fn __repr__(&self) -> String {
        format!("Codec({:?})", self.inner.id())
    }
}

/// Outcome of a target-quality search.
#[pyclass(name = "SearchResult", module = "qpress", frozen)]
pub struct PySearchResult {
    result: SearchResult,
    report: SearchReport,
}

fn probes(list: &[Probe]) -> Vec<(f64, f64, usize)> {
    list.iter().map(|p| (p.param, p.value, p.stored_bytes)).collect()
}

#[pymethods]
impl PySearchResult {
    #[getter]
    fn status(&self) -> &'static str {
        self.result.status.as_str()
    }

    #[getter]
    fn achieved(&self) -> f64 {
        self.result.achieved_value.value
    }

    #[getter]
    fn final_param(&self) -> f64 {
        self.result.final_param.value()
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.result.iterations
    }

    #[getter]
    fn cr(&self) -> f64 {
        self.result.cr
    }

    #[getter]
    fn bpp(&self) -> f64 {
        self.result.bpp
    }

    /// `(param, value, stored_bytes)` for every iteration probe.
    #[getter]
    fn history(&self) -> Vec<(f64, f64, usize)> {
        probes(&self.result.history)
    }

    #[getter]
    fn endpoint_probes(&self) -> Vec<(f64, f64, usize)> {
        probes(&self.result.endpoint_probes)
    }

    #[getter]
    fn blob(&self) -> PyBlob {
        PyBlob {
            inner: self.result.blob.clone(),
        }
    }

    #[getter]
    fn decoded(&self) -> PyImage {
        PyImage {
            inner: self.result.decoded.clone(),
        }
    }

    fn summary_line(&self) -> String {
        self.report.summary_line()
    }

    fn report_json(&self) -> String {
        self.report.to_json()
    }

    fn __repr__(&self) -> String {
        format!("SearchResult({})", self.report.summary_line())
    }
}

#[pyclass(name = "CubeResult", module = "qpress", frozen)]
pub struct PyCubeResult {
    bands: Vec<Py<PySearchResult>>,
    aggregate_cr: f64,
    total_iterations: usize,
    manifest: String,
}

#[pymethods]
impl PyCubeResult {
    #[getter]
    fn bands(&self, py: Python<'_>) -> Vec<Py<PySearchResult>> {
        self.bands.iter().map(|b| b.clone_ref(py)).collect()
    }

    #[getter]
    fn aggregate_cr(&self) -> f64 {
        self.aggregate_cr
    }

    #[getter]
    fn total_iterations(&self) -> usize {
        self.total_iterations
    }

    #[getter]
    fn mean_iterations(&self) -> f64 {
        self.total_iterations as f64 / self.bands.len() as f64
    }

    fn manifest_json(&self) -> &str {
        &self.manifest
    }
}

struct Pipeline {
    codec: Arc<dyn Codec>,
    metric: Arc<dyn QualityMetric>,
    range: ParameterRange,
}

fn pipeline(codec: &str, metric: &str, param_min: Option<f64>, param_max: Option<f64>) -> PyResult<Pipeline> {
    let (codec, metric) = resolve_pair(codec, metric).map_err(search_err)?;
    let d = codec.descriptor();
    let min = param_min.unwrap_or(d.default_range.min());
    let max = param_max.unwrap_or(d.default_range.max());
    if min >= max {
        return Err(err(format!("param_min ({min}) must be below param_max ({max})")));
    }
    let range = ParameterRange::new(d.param_kind, min, max).map_err(err)?;
    Ok(Pipeline { codec, metric, range })
}

/// Value of `metric` between two images.
#[pyfunction]
#[pyo3(signature = (reference, distorted, metric = "psnr"))]
fn measure(py: Python<'_>, reference: PyRef<'_, PyImage>, distorted: PyRef<'_, PyImage>, metric: &str) -> PyResult<f64> {
    let id: MetricId = metric.parse().map_err(err)?;
    let (a, b) = (&reference.inner, &distorted.inner);
    py.detach(|| evaluate(id, a, b)).map_err(err)
}

#[pyfunction]
fn metrics() -> Vec<&'static str> {
    MetricId::ALL.iter().map(|m| m.as_str()).collect()
}

/// Metric values at both ends of the parameter range.
#[pyfunction]
#[pyo3(signature = (image, codec = "dct", metric = "psnr", param_min = None, param_max = None))]
fn estimate(
    py: Python<'_>,
    image: PyRef<'_, PyImage>,
    codec: &str,
    metric: &str,
    param_min: Option<f64>,
    param_max: Option<f64>,
) -> PyResult<(f64, f64)> {
    let p = pipeline(codec, metric, param_min, param_max)?;
    let image = &image.inner;
    let span = py
        .detach(|| qpress::search::estimate_range(image, p.codec.as_ref(), p.metric.as_ref(), p.range))
        .map_err(search_err)?;
    Ok((span.value_at_param_min.value, span.value_at_param_max.value))
}

/// Searches for the parameter that brings `metric` within `delta` of `target`.
#[pyfunction]
#[pyo3(signature = (
    image, target, codec = "dct", metric = "psnr", delta = None, param_min = None, param_max = None,
    method = "interp", clamp = false, max_iters = None, seed = None
))]
#[allow(clippy::too_many_arguments)]
fn compress(
    py: Python<'_>,
    image: PyRef<'_, PyImage>,
    target: f64,
    codec: &str,
    metric: &str,
    delta: Option<f64>,
    param_min: Option<f64>,
    param_max: Option<f64>,
    method: &str,
    clamp: bool,
    max_iters: Option<usize>,
    seed: Option<f64>,
) -> PyResult<PySearchResult> {
    let p = pipeline(codec, metric, param_min, param_max)?;
    let target = QualityTarget::new(p.metric.descriptor(), target, delta).map_err(search_err)?;
    let method: Method = method.parse().map_err(search_err)?;
    let image = &image.inner;
    let result = py
        .detach(|| {
            let mut search = Search::new(p.codec.as_ref(), p.metric.as_ref(), target, p.range)
                .method(method)
                .clamp(clamp);
            if let Some(n) = max_iters {
                search = search.max_iters(n);
            }
            if let Some(s) = seed {
                search = search.seed(s);
            }
            search.run(image)
        })
        .map_err(search_err)?;
    let report = SearchReport::from_result(&result);
    Ok(PySearchResult { result, report })
}

/// Compresses every band to the same target; bands run in parallel.
#[pyfunction]
#[pyo3(signature = (
    bands, target, codec = "dct", metric = "psnr", delta = None, param_min = None, param_max = None,
    method = "interp", clamp = false, homomorphic = false
))]
#[allow(clippy::too_many_arguments)]
fn compress_cube(
    py: Python<'_>,
    bands: Vec<PyRef<'_, PyImage>>,
    target: f64,
    codec: &str,
    metric: &str,
    delta: Option<f64>,
    param_min: Option<f64>,
    param_max: Option<f64>,
    method: &str,
    clamp: bool,
    homomorphic: bool,
) -> PyResult<PyCubeResult> {
    let cube = SpectralCube::new(bands.iter().map(|b| b.inner.clone()).collect(), None).map_err(err)?;
    let p = pipeline(codec, metric, param_min, param_max)?;
    let target = QualityTarget::new(p.metric.descriptor(), target, delta).map_err(search_err)?;
    let settings = CubeSettings {
        method: method.parse().map_err(search_err)?,
        clamp,
        max_iters: None,
        homomorphic,
    };
    let out = py
        .detach(|| cube_search(&cube, p.codec.as_ref(), p.metric.as_ref(), &target, p.range, &settings))
        .map_err(err)?;
    let manifest = out.manifest().to_json();
    let bands = out
        .per_band
        .into_iter()
        .map(|b| {
            Py::new(
                py,
                PySearchResult {
                    result: b.result,
                    report: b.report,
                },
            )
        })
        .collect::<PyResult<_>>()?;
    Ok(PyCubeResult {
        bands,
        aggregate_cr: out.aggregate_cr,
        total_iterations: out.total_iterations,
        manifest,
    })
}

/// Splits a band-sequential RAW buffer described by `sidecar` into bands.
#[pyfunction]
fn read_raw(data: &[u8], sidecar: &str) -> PyResult<Vec<PyImage>> {
    let desc: RawDescriptor = sidecar.parse().map_err(err)?;
    let cube = raw_io(data, &desc).map_err(err)?;
    Ok(cube.bands().iter().map(|b| PyImage { inner: b.clone() }).collect())
}

/// Seeded synthetic test image with texture and edges.
#[pyfunction]
#[pyo3(signature = (width, height, bit_depth = 8, seed = 0))]
fn textured(width: usize, height: usize, bit_depth: u32, seed: u64) -> PyResult<PyImage> {
    Ok(PyImage {
        inner: qpress::synthetic::textured(width, height, depth(bit_depth)?, seed),
    })
}

/// Seeded synthetic 16-bit cube with band-dependent dynamic range.
#[pyfunction]
#[pyo3(signature = (bands, width, height, seed = 0))]
fn spectral_cube(bands: usize, width: usize, height: usize, seed: u64) -> Vec<PyImage> {
    qpress::synthetic::spectral_cube(bands, width, height, seed)
        .bands()
        .iter()
        .map(|b| PyImage { inner: b.clone() })
        .collect()
}

#[pymodule]
#[pyo3(name = "qpress")]
pub fn qpress_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("QpressError", py.get_type::<QpressError>())?;
    m.add("InfeasibleError", py.get_type::<InfeasibleError>())?;
    m.add_class::<PyImage>()?;
    m.add_class::<PyBlob>()?;
    m.add_class::<PyCodec>()?;
    m.add_class::<PySearchResult>()?;
    m.add_class::<PyCubeResult>()?;
    m.add_function(wrap_pyfunction!(measure, m)?)?;
    m.add_function(wrap_pyfunction!(metrics, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(compress, m)?)?;
    m.add_function(wrap_pyfunction!(compress_cube, m)?)?;
    m.add_function(wrap_pyfunction!(read_raw, m)?)?;
    m.add_function(wrap_pyfunction!(textured, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_cube, m)?)?;
    Ok(())
}
