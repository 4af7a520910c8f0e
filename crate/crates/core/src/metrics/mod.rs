//! Full-reference quality metrics and the registry that names them.
//!
//! Decibel metrics are clamped to `[0, DB_CAP]`; identical inputs return the
//! cap. All metrics use the sample peak `2^bit_depth - 1`.

mod hvs;
mod ssim;
mod wsnr;

pub use hvs::{psnr_hvs, psnr_hvs_both, psnr_hvs_m, CSF_COEFFICIENTS, MASK_COEFFICIENTS};
pub use ssim::{msssim, ssim, MSSSIM_WEIGHTS, SSIM_WINDOW};
pub use wsnr::wsnr;

use crate::imagecore::RasterImage;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use thiserror::Error;

/// Value returned by decibel metrics for error-free pairs.
pub const DB_CAP: f64 = 100.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("image shapes differ: {reference} vs {distorted}")]
    ShapeMismatch { reference: String, distorted: String },
    #[error("image too small: {0}")]
    TooSmall(String),
    #[error("unknown metric `{0}`")]
    UnknownMetric(String),
    #[error("{0}")]
    Unsupported(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricId {
    Psnr,
    Ssim,
    Msssim,
    Wsnr,
    PsnrHvs,
    PsnrHvsM,
}

impl MetricId {
    pub const ALL: [MetricId; 6] = [
        MetricId::Psnr,
        MetricId::Ssim,
        MetricId::Msssim,
        MetricId::Wsnr,
        MetricId::PsnrHvs,
        MetricId::PsnrHvsM,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricId::Psnr => "psnr",
            MetricId::Ssim => "ssim",
            MetricId::Msssim => "msssim",
            MetricId::Wsnr => "wsnr",
            MetricId::PsnrHvs => "psnr_hvs",
            MetricId::PsnrHvsM => "psnr_hvs_m",
        }
    }

    pub fn units(self) -> Units {
        match self {
            MetricId::Ssim | MetricId::Msssim => Units::Unitless,
            _ => Units::Decibels,
        }
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricId {
    type Err = MetricError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MetricId::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| MetricError::UnknownMetric(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Units {
    Decibels,
    Unitless,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueRange {
    pub min: f64,
    pub max: f64,
}

impl ValueRange {
    pub fn contains(&self, v: f64) -> bool {
        (self.min..=self.max).contains(&v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricDescriptor {
    pub metric_id: String,
    pub units: Units,
    /// Nominal value range; `[0, DB_CAP]` for decibel metrics.
    pub range: ValueRange,
    pub higher_is_better: bool,
}

impl MetricDescriptor {
    pub fn builtin(id: MetricId) -> Self {
        let units = id.units();
        MetricDescriptor {
            metric_id: id.as_str().to_string(),
            units,
            range: match units {
                Units::Decibels => ValueRange { min: 0.0, max: DB_CAP },
                Units::Unitless => ValueRange { min: 0.0, max: 1.0 },
            },
            higher_is_better: true,
        }
    }

    /// Value reported for identical images.
    pub fn best_value(&self) -> f64 {
        if self.higher_is_better {
            self.range.max
        } else {
            self.range.min
        }
    }

    /// Default tolerance: 0.1 dB, or 0.005 for unitless indices.
    pub fn default_tolerance(&self) -> f64 {
        match self.units {
            Units::Decibels => 0.1,
            Units::Unitless => 0.005,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub metric_id: String,
    pub value: f64,
}

pub trait QualityMetric: Send + Sync {
    fn descriptor(&self) -> &MetricDescriptor;

    fn evaluate(&self, reference: &RasterImage, distorted: &RasterImage) -> Result<f64, MetricError>;

    fn measure(&self, reference: &RasterImage, distorted: &RasterImage) -> Result<MetricValue, MetricError> {
        Ok(MetricValue {
            metric_id: self.descriptor().metric_id.clone(),
            value: self.evaluate(reference, distorted)?,
        })
    }
}

struct Builtin {
    id: MetricId,
    descriptor: MetricDescriptor,
}

impl QualityMetric for Builtin {
    fn descriptor(&self) -> &MetricDescriptor {
        &self.descriptor
    }

    fn evaluate(&self, reference: &RasterImage, distorted: &RasterImage) -> Result<f64, MetricError> {
        evaluate(self.id, reference, distorted)
    }
}

/// Evaluates a built-in metric.
pub fn evaluate(id: MetricId, reference: &RasterImage, distorted: &RasterImage) -> Result<f64, MetricError> {
    match id {
        MetricId::Psnr => psnr(reference, distorted),
        MetricId::Ssim => ssim(reference, distorted),
        MetricId::Msssim => msssim(reference, distorted),
        MetricId::Wsnr => wsnr(reference, distorted),
        MetricId::PsnrHvs => psnr_hvs(reference, distorted),
        MetricId::PsnrHvsM => psnr_hvs_m(reference, distorted),
    }
}

/// Named metric evaluators; starts with the six built-ins and accepts more.
#[derive(Clone)]
pub struct MetricRegistry {
    metrics: BTreeMap<String, Arc<dyn QualityMetric>>,
}

impl Default for MetricRegistry {
    fn default() -> Self {
        let mut r = MetricRegistry {
            metrics: BTreeMap::new(),
        };
        for id in MetricId::ALL {
            r.register(Arc::new(Builtin {
                id,
                descriptor: MetricDescriptor::builtin(id),
            }));
        }
        r
    }
}

impl MetricRegistry {
    /// Adds or replaces the metric under its descriptor's id.
    pub fn register(&mut self, metric: Arc<dyn QualityMetric>) {
        self.metrics.insert(metric.descriptor().metric_id.clone(), metric);
    }

    pub fn get(&self, id: &str) -> Result<Arc<dyn QualityMetric>, MetricError> {
        self.metrics
            .get(id)
            .cloned()
            .ok_or_else(|| MetricError::UnknownMetric(id.to_string()))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.metrics.keys().map(String::as_str)
    }
}

/// Looks up a built-in metric by id.
pub fn metric_registry(id: &str) -> Result<Arc<dyn QualityMetric>, MetricError> {
    let id: MetricId = id.parse()?;
    Ok(Arc::new(Builtin {
        id,
        descriptor: MetricDescriptor::builtin(id),
    }))
}

pub(crate) fn check_pair(reference: &RasterImage, distorted: &RasterImage) -> Result<(), MetricError> {
    if reference.same_shape(distorted) {
        Ok(())
    } else {
        Err(MetricError::ShapeMismatch {
            reference: reference.shape_string(),
            distorted: distorted.shape_string(),
        })
    }
}

pub(crate) fn peak(image: &RasterImage) -> f64 {
    f64::from(image.bit_depth().max_value())
}

/// `10·log10(peak² / mse)` clamped to `[0, DB_CAP]`.
pub(crate) fn db_from_mse(peak: f64, mse: f64) -> f64 {
    if mse <= 0.0 {
        return DB_CAP;
    }
    (10.0 * (peak * peak / mse).log10()).clamp(0.0, DB_CAP)
}

pub fn mse(reference: &RasterImage, distorted: &RasterImage) -> Result<f64, MetricError> {
    check_pair(reference, distorted)?;
    let sum: u64 = reference
        .samples()
        .iter()
        .zip(distorted.samples())
        .map(|(&a, &b)| {
            let d = u64::from(a.abs_diff(b));
            d * d
        })
        .sum();
    Ok(sum as f64 / reference.pixel_count() as f64)
}

pub fn psnr(reference: &RasterImage, distorted: &RasterImage) -> Result<f64, MetricError> {
    Ok(db_from_mse(peak(reference), mse(reference, distorted)?))
}

/// Largest absolute per-sample difference.
pub fn max_abs_error(reference: &RasterImage, distorted: &RasterImage) -> Result<u16, MetricError> {
    check_pair(reference, distorted)?;
    Ok(reference
        .samples()
        .iter()
        .zip(distorted.samples())
        .map(|(&a, &b)| a.abs_diff(b))
        .max()
        .unwrap_or(0))
}
