//! Band-by-band compression of spectral cubes and the log-domain
//! (homomorphic) sample transform.
//!
//! Every band is searched independently to the same quality target. With the
//! homomorphic option a band is compressed after `y = round(s * ln(1 + x))`
//! but its quality is always measured against the original samples, after the
//! inverse map.

use crate::codecs::{Codec, ParameterRange};
use crate::imagecore::{BitDepth, CompressedBlob, RasterImage, SpectralCube};
use crate::metrics::QualityMetric;
use crate::search::{
    run_with_report, Method, Run, QualityTarget, SampleDomain, Search, SearchError, SearchReport, SearchResult,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    Log1pScaled,
}

/// `y = round(scale * ln(1 + x))`, with `scale` chosen so that `input_max`
/// lands on the full-scale value of the band's bit depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomomorphicTransform {
    pub kind: TransformKind,
    pub scale: f64,
    pub input_max: f64,
    pub bit_depth: BitDepth,
}

impl HomomorphicTransform {
    pub fn new(input_max: f64, bit_depth: BitDepth) -> Result<Self, SearchError> {
        if !(input_max.is_finite() && input_max >= 1.0 && input_max <= f64::from(bit_depth.max_value())) {
            return Err(SearchError::Domain(format!(
                "input_max {input_max} must lie in [1, {}]",
                bit_depth.max_value()
            )));
        }
        Ok(HomomorphicTransform {
            kind: TransformKind::Log1pScaled,
            scale: f64::from(bit_depth.max_value()) / input_max.ln_1p(),
            input_max,
            bit_depth,
        })
    }

    /// Transform for one band, fitted to its largest sample.
    pub fn fit(band: &RasterImage) -> Self {
        let max = f64::from(band.max_sample()).max(1.0);
        Self::new(max, band.bit_depth()).expect("band maximum is within its bit depth")
    }

    pub fn forward_sample(&self, x: f64) -> f64 {
        (self.scale * x.ln_1p()).round().clamp(0.0, f64::from(self.bit_depth.max_value()))
    }

    pub fn inverse_sample(&self, y: f64) -> f64 {
        ((y / self.scale).exp_m1()).round().clamp(0.0, self.input_max)
    }

    fn check_depth(&self, band: &RasterImage) -> Result<(), SearchError> {
        if band.bit_depth() != self.bit_depth {
            return Err(SearchError::Domain(format!(
                "transform is for {} bands, got {}",
                self.bit_depth,
                band.bit_depth()
            )));
        }
        Ok(())
    }

    fn map(&self, band: &RasterImage, f: impl Fn(f64) -> f64) -> RasterImage {
        let values: Vec<f64> = band.samples().iter().map(|&s| f(f64::from(s))).collect();
        RasterImage::from_f64(band.width(), band.height(), band.bit_depth(), &values).expect("shape is unchanged")
    }

    pub fn forward(&self, band: &RasterImage) -> Result<RasterImage, SearchError> {
        self.check_depth(band)?;
        let max = f64::from(band.max_sample());
        if max > self.input_max {
            return Err(SearchError::Domain(format!(
                "sample {max} exceeds the transform's input_max {}",
                self.input_max
            )));
        }
        Ok(self.map(band, |x| self.forward_sample(x)))
    }

    pub fn inverse(&self, band: &RasterImage) -> Result<RasterImage, SearchError> {
        self.check_depth(band)?;
        Ok(self.map(band, |y| self.inverse_sample(y)))
    }
}

impl SampleDomain for HomomorphicTransform {
    fn forward(&self, image: &RasterImage) -> Result<RasterImage, SearchError> {
        HomomorphicTransform::forward(self, image)
    }

    fn inverse(&self, image: &RasterImage) -> Result<RasterImage, SearchError> {
        HomomorphicTransform::inverse(self, image)
    }
}

pub fn homomorphic_forward(band: &RasterImage, transform: &HomomorphicTransform) -> Result<RasterImage, SearchError> {
    transform.forward(band)
}

pub fn homomorphic_inverse(band: &RasterImage, transform: &HomomorphicTransform) -> Result<RasterImage, SearchError> {
    transform.inverse(band)
}

/// Per-cube search settings; the target and range are shared by all bands.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubeSettings {
    pub method: Method,
    pub clamp: bool,
    pub max_iters: Option<usize>,
    pub homomorphic: bool,
}

impl Default for CubeSettings {
    fn default() -> Self {
        CubeSettings {
            method: Method::Interpolate,
            clamp: false,
            max_iters: None,
            homomorphic: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BandResult {
    pub index: usize,
    pub label: String,
    pub transform: Option<HomomorphicTransform>,
    pub result: SearchResult,
    pub report: SearchReport,
}

impl BandResult {
    pub fn raw_bytes(&self) -> usize {
        self.result.decoded.raw_byte_len()
    }

    pub fn stored_bytes(&self) -> usize {
        self.result.blob.stored_len()
    }
}

#[derive(Debug)]
pub struct BandFailure {
    pub index: usize,
    pub label: String,
    pub error: SearchError,
    pub report: SearchReport,
}

#[derive(Debug, Clone)]
pub struct CubeResult {
    pub per_band: Vec<BandResult>,
    /// Total raw sample bytes over total stored container bytes.
    pub aggregate_cr: f64,
    pub total_iterations: usize,
}

impl CubeResult {
    fn from_bands(per_band: Vec<BandResult>) -> Self {
        let aggregate_cr = aggregate_cr(&per_band);
        let total_iterations = per_band.iter().map(|b| b.result.iterations).sum();
        CubeResult {
            per_band,
            aggregate_cr,
            total_iterations,
        }
    }

    pub fn mean_iterations(&self) -> f64 {
        self.total_iterations as f64 / self.per_band.len() as f64
    }

    pub fn manifest(&self) -> CubeManifest {
        CubeManifest::build(&self.per_band, &[])
    }
}

fn aggregate_cr(bands: &[BandResult]) -> f64 {
    let raw: usize = bands.iter().map(BandResult::raw_bytes).sum();
    let stored: usize = bands.iter().map(BandResult::stored_bytes).sum();
    if stored == 0 {
        0.0
    } else {
        raw as f64 / stored as f64
    }
}

/// At least one band failed. Bands that finished are kept in `completed`.
#[derive(Debug, Error)]
pub struct CubeError {
    pub band_count: usize,
    pub completed: Vec<BandResult>,
    pub failed: Vec<BandFailure>,
}

impl fmt::Display for CubeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let first = &self.failed[0];
        write!(
            f,
            "band {} ({}) failed: {}; {} of {} bands completed",
            first.index,
            first.label,
            first.error,
            self.completed.len(),
            self.band_count
        )?;
        if self.failed.len() > 1 {
            write!(f, ", {} failed", self.failed.len())?;
        }
        Ok(())
    }
}

impl CubeError {
    pub fn manifest(&self) -> CubeManifest {
        CubeManifest::build(&self.completed, &self.failed)
    }
}

fn band_label(cube: &SpectralCube, index: usize) -> String {
    cube.band_labels()
        .map(|l| l[index].clone())
        .unwrap_or_else(|| format!("band{index:02}"))
}

fn search_band(
    band: &RasterImage,
    codec: &dyn Codec,
    metric: &dyn QualityMetric,
    target: &QualityTarget,
    range: ParameterRange,
    settings: &CubeSettings,
) -> (Option<HomomorphicTransform>, Run) {
    let transform = settings.homomorphic.then(|| HomomorphicTransform::fit(band));
    let mut search = Search::new(codec, metric, target.clone(), range)
        .method(settings.method)
        .clamp(settings.clamp);
    if let Some(n) = settings.max_iters {
        search = search.max_iters(n);
    }
    if let Some(t) = &transform {
        search = search.domain(t);
    }
    let run = run_with_report(&search, band);
    (transform, run)
}

/// Searches every band of `cube` to `target`. Bands run in parallel; results
/// are ordered by band index. Any failed band turns the whole call into a
/// [`CubeError`] that still carries the finished bands.
pub fn compress_cube(
    cube: &SpectralCube,
    codec: &dyn Codec,
    metric: &dyn QualityMetric,
    target: &QualityTarget,
    range: ParameterRange,
    settings: &CubeSettings,
) -> Result<CubeResult, CubeError> {
    let runs: Vec<_> = cube
        .bands()
        .par_iter()
        .map(|band| search_band(band, codec, metric, target, range, settings))
        .collect();
    let mut completed = Vec::new();
    let mut failed = Vec::new();
    for (index, (transform, run)) in runs.into_iter().enumerate() {
        let label = band_label(cube, index);
        match run.outcome {
            Ok(result) => completed.push(BandResult {
                index,
                label,
                transform,
                result,
                report: run.report,
            }),
            Err(error) => failed.push(BandFailure {
                index,
                label,
                error,
                report: run.report,
            }),
        }
    }
    if failed.is_empty() {
        Ok(CubeResult::from_bands(completed))
    } else {
        Err(CubeError {
            band_count: cube.band_count(),
            completed,
            failed,
        })
    }
}

/// Decodes one stored band, undoing the homomorphic map if one was used.
pub fn decode_band(
    codec: &dyn Codec,
    blob: &CompressedBlob,
    transform: Option<&HomomorphicTransform>,
) -> Result<RasterImage, SearchError> {
    let decoded = codec.decompress(blob).map_err(SearchError::from)?;
    match transform {
        Some(t) => t.inverse(&decoded),
        None => Ok(decoded),
    }
}

/// File name used for a band's container blob next to the manifest.
pub fn band_blob_name(index: usize) -> String {
    format!("band_{index:03}.qprs")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandEntry {
    pub index: usize,
    pub label: String,
    /// `None` for failed bands.
    pub blob_file: Option<String>,
    pub transform: Option<HomomorphicTransform>,
    pub report: SearchReport,
}

/// JSON description of a (possibly partial) cube run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeManifest {
    pub complete: bool,
    pub bands: Vec<BandEntry>,
    pub raw_bytes: usize,
    pub stored_bytes: usize,
    pub aggregate_cr: Option<f64>,
    pub total_iterations: usize,
}

impl CubeManifest {
    fn build(done: &[BandResult], failed: &[BandFailure]) -> Self {
        let mut bands: Vec<BandEntry> = done
            .iter()
            .map(|b| BandEntry {
                index: b.index,
                label: b.label.clone(),
                blob_file: Some(band_blob_name(b.index)),
                transform: b.transform,
                report: b.report.clone(),
            })
            .chain(failed.iter().map(|f| BandEntry {
                index: f.index,
                label: f.label.clone(),
                blob_file: None,
                transform: None,
                report: f.report.clone(),
            }))
            .collect();
        bands.sort_by_key(|b| b.index);
        let raw_bytes = done.iter().map(BandResult::raw_bytes).sum();
        let stored_bytes = done.iter().map(BandResult::stored_bytes).sum();
        CubeManifest {
            complete: failed.is_empty(),
            bands,
            raw_bytes,
            stored_bytes,
            aggregate_cr: failed.is_empty().then(|| aggregate_cr(done)),
            total_iterations: done.iter().map(|b| b.result.iterations).sum(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest contains only serializable data")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[cfg(test)]
mod tests;
