//! Codec contract and the built-in coders.
//!
//! A codec is driven by a single scalar [`ControlParameter`]. The built-in
//! block-DCT coders take a quantization step (or its synonym, the scaling
//! factor); external coders may instead be driven in bits per pixel.

mod csf;
mod dct_codec;
mod entropy;
mod external;
mod stub;

pub use csf::{csf_weight_table, SUPPORTED_BLOCK_SIZES};
pub use dct_codec::{DctCodec, DEFAULT_BLOCK_SIZE};
pub use external::{ExternalCodec, ExternalConfig, TMPDIR_ENV};
pub use stub::{StubCodec, StubMetric, StubProfile};

use crate::imagecore::{CompressedBlob, ImageError, RasterImage};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("parameter kind {found} does not match codec kind {expected}")]
    ParamKindMismatch { expected: ParamKind, found: ParamKind },
    #[error("parameter {value} is outside the codec domain {domain}")]
    ParamOutOfDomain { value: f64, domain: String },
    #[error("invalid control parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid parameter range: {0}")]
    InvalidRange(String),
    #[error("corrupt payload: {0}")]
    CorruptPayload(String),
    #[error("unknown codec `{0}`")]
    UnknownCodec(String),
    #[error("blob was produced by `{found}`, not `{expected}`")]
    CodecMismatch { expected: String, found: String },
    #[error("unsupported block size {0}")]
    UnsupportedBlockSize(usize),
    #[error("invalid stub profile: {0}")]
    InvalidProfile(String),
    #[error("image too small for this codec: {0}")]
    ImageTooSmall(String),
    #[error("invalid external codec config: {0}")]
    InvalidConfig(String),
    #[error("tool not found: {0}")]
    ToolNotFound(String),
    #[error("`{command}` exited with {status}: {diagnostic}")]
    ToolFailed {
        command: String,
        status: String,
        diagnostic: String,
    },
    #[error("external coder produced no output file at {0}")]
    OutputMissing(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Image(#[from] ImageError),
}

/// Which knob a control parameter represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    QuantizationStep,
    ScalingFactor,
    BitsPerPixel,
}

impl ParamKind {
    pub fn code(self) -> u8 {
        match self {
            ParamKind::QuantizationStep => 0,
            ParamKind::ScalingFactor => 1,
            ParamKind::BitsPerPixel => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(ParamKind::QuantizationStep),
            1 => Some(ParamKind::ScalingFactor),
            2 => Some(ParamKind::BitsPerPixel),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ParamKind::QuantizationStep => "quantization_step",
            ParamKind::ScalingFactor => "scaling_factor",
            ParamKind::BitsPerPixel => "bits_per_pixel",
        }
    }

    /// Natural quality orientation for this kind of knob.
    pub fn natural_direction(self) -> QualityDirection {
        match self {
            ParamKind::BitsPerPixel => QualityDirection::MetricIncreasesWithParam,
            _ => QualityDirection::MetricDecreasesWithParam,
        }
    }

    fn validate(self, value: f64) -> Result<(), CodecError> {
        if !value.is_finite() || value <= 0.0 {
            return Err(CodecError::InvalidParameter(format!(
                "{} must be a positive finite number, got {value}",
                self.as_str()
            )));
        }
        if self == ParamKind::BitsPerPixel && value > 8.0 {
            return Err(CodecError::InvalidParameter(format!(
                "bits_per_pixel must lie in (0, 8], got {value}"
            )));
        }
        Ok(())
    }
}

impl fmt::Display for ParamKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ParamKind {
    type Err = CodecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "quantization_step" | "qs" => Ok(ParamKind::QuantizationStep),
            "scaling_factor" | "sf" => Ok(ParamKind::ScalingFactor),
            "bits_per_pixel" | "bpp" => Ok(ParamKind::BitsPerPixel),
            other => Err(CodecError::InvalidConfig(format!("unknown param kind `{other}`"))),
        }
    }
}

/// A validated codec knob value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParam", into = "RawParam")]
pub struct ControlParameter {
    kind: ParamKind,
    value: f64,
}

#[derive(Serialize, Deserialize)]
struct RawParam {
    kind: ParamKind,
    value: f64,
}

impl TryFrom<RawParam> for ControlParameter {
    type Error = CodecError;

    fn try_from(raw: RawParam) -> Result<Self, Self::Error> {
        ControlParameter::new(raw.kind, raw.value)
    }
}

impl From<ControlParameter> for RawParam {
    fn from(p: ControlParameter) -> Self {
        RawParam {
            kind: p.kind,
            value: p.value,
        }
    }
}

impl ControlParameter {
    pub fn new(kind: ParamKind, value: f64) -> Result<Self, CodecError> {
        kind.validate(value)?;
        Ok(ControlParameter { kind, value })
    }

    pub fn kind(&self) -> ParamKind {
        self.kind
    }

    pub fn value(&self) -> f64 {
        self.value
    }
}

/// Search interval for a control parameter, `min < max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRange", into = "RawRange")]
pub struct ParameterRange {
    kind: ParamKind,
    min: f64,
    max: f64,
}

#[derive(Serialize, Deserialize)]
struct RawRange {
    kind: ParamKind,
    min: f64,
    max: f64,
}

impl TryFrom<RawRange> for ParameterRange {
    type Error = CodecError;

    fn try_from(raw: RawRange) -> Result<Self, Self::Error> {
        ParameterRange::new(raw.kind, raw.min, raw.max)
    }
}

impl From<ParameterRange> for RawRange {
    fn from(r: ParameterRange) -> Self {
        RawRange {
            kind: r.kind,
            min: r.min,
            max: r.max,
        }
    }
}

impl ParameterRange {
    pub fn new(kind: ParamKind, min: f64, max: f64) -> Result<Self, CodecError> {
        kind.validate(min)?;
        kind.validate(max)?;
        if min >= max {
            return Err(CodecError::InvalidRange(format!(
                "min ({min}) must be below max ({max})"
            )));
        }
        Ok(ParameterRange { kind, min, max })
    }

    pub fn kind(&self) -> ParamKind {
        self.kind
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn width(&self) -> f64 {
        self.max - self.min
    }

    pub fn contains(&self, value: f64) -> bool {
        (self.min..=self.max).contains(&value)
    }

    pub fn param(&self, value: f64) -> ControlParameter {
        ControlParameter {
            kind: self.kind,
            value: value.clamp(self.min, self.max),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QualityDirection {
    MetricDecreasesWithParam,
    MetricIncreasesWithParam,
}

impl FromStr for QualityDirection {
    type Err = CodecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "metric_decreases_with_param" => Ok(QualityDirection::MetricDecreasesWithParam),
            "metric_increases_with_param" => Ok(QualityDirection::MetricIncreasesWithParam),
            other => Err(CodecError::InvalidConfig(format!(
                "unknown quality_direction `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodecDescriptor {
    pub codec_id: String,
    pub param_kind: ParamKind,
    pub default_range: ParameterRange,
    pub quality_direction: QualityDirection,
}

/// A lossy coder controlled by one scalar parameter.
///
/// Implementations are stateless after construction and callable from
/// several threads at once.
pub trait Codec: Send + Sync {
    fn descriptor(&self) -> &CodecDescriptor;

    fn compress(&self, image: &RasterImage, param: ControlParameter) -> Result<CompressedBlob, CodecError>;

    fn decompress(&self, blob: &CompressedBlob) -> Result<RasterImage, CodecError>;

    fn id(&self) -> &str {
        &self.descriptor().codec_id
    }

    /// Whether `kind` can drive this codec. Scaling factor and quantization
    /// step are interchangeable on QS-driven coders.
    fn accepts(&self, kind: ParamKind) -> bool {
        let own = self.descriptor().param_kind;
        kind == own
            || matches!(
                (own, kind),
                (ParamKind::QuantizationStep, ParamKind::ScalingFactor)
                    | (ParamKind::ScalingFactor, ParamKind::QuantizationStep)
            )
    }
}

pub(crate) fn check_kind(codec: &dyn Codec, param: ControlParameter) -> Result<(), CodecError> {
    if codec.accepts(param.kind()) {
        Ok(())
    } else {
        Err(CodecError::ParamKindMismatch {
            expected: codec.descriptor().param_kind,
            found: param.kind(),
        })
    }
}

pub(crate) fn check_blob_codec(codec: &dyn Codec, blob: &CompressedBlob) -> Result<(), CodecError> {
    if blob.codec_id != codec.id() {
        return Err(CodecError::CodecMismatch {
            expected: codec.id().to_string(),
            found: blob.codec_id.clone(),
        });
    }
    Ok(())
}

/// Builds a codec from a textual spec.
///
/// * `dct`, `dct-csf` – built-in block-DCT coder (16×16), optionally with a
///   block-size suffix such as `dct@8` or `dct-csf@32`
/// * `stub:<intercept>:<slope>:<min>:<max>[:<delay_ms>]` – affine stub
/// * `stub-table:<p>=<m>,<p>=<m>,...` – piecewise-linear stub
/// * `ext:<config path>` – external command-line coder
pub fn resolve(spec: &str) -> Result<Arc<dyn Codec>, CodecError> {
    if let Some(rest) = spec.strip_prefix("ext:") {
        let text = std::fs::read_to_string(Path::new(rest))?;
        let config: ExternalConfig = text.parse()?;
        return Ok(Arc::new(ExternalCodec::register(config)?));
    }
    if spec.starts_with("stub") {
        return Ok(Arc::new(StubCodec::from_spec(spec)?));
    }
    let (family, block) = match spec.split_once('@') {
        Some((family, block)) => (
            family,
            block
                .parse::<usize>()
                .map_err(|_| CodecError::UnknownCodec(spec.to_string()))?,
        ),
        None => (spec, DEFAULT_BLOCK_SIZE),
    };
    match family {
        "dct" => Ok(Arc::new(DctCodec::plain(block)?)),
        "dct-csf" => Ok(Arc::new(DctCodec::csf_weighted(block)?)),
        _ => Err(CodecError::UnknownCodec(spec.to_string())),
    }
}
