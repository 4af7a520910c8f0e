//! Deterministic test double whose quality response is known in closed form.
//!
//! The stub embeds the control parameter in its payload and in the first
//! samples of the decoded image. Its designated metric ([`StubMetric`])
//! reads the parameter back and returns `profile(param)` exactly, so search
//! behaviour can be checked against hand-derived probe sequences.

use super::{check_blob_codec, check_kind, Codec, CodecDescriptor, CodecError};
use super::{ControlParameter, ParamKind, ParameterRange, QualityDirection};
use crate::imagecore::{BackendId, BitDepth, CompressedBlob, RasterImage};
use crate::metrics::{MetricDescriptor, MetricError, QualityMetric};
use std::fmt;
use std::sync::Arc;
use std::time::Duration;

type ResponseFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type PayloadLenFn = Arc<dyn Fn(usize, f64) -> usize + Send + Sync>;

/// Metric value as a function of the control parameter.
#[derive(Clone)]
pub enum StubProfile {
    Affine {
        intercept: f64,
        slope: f64,
        min: f64,
        max: f64,
    },
    /// Piecewise linear through `(param, value)` knots, params ascending.
    Table(Vec<(f64, f64)>),
    /// Arbitrary response; strict monotonicity is checked on a dense grid.
    Function { f: ResponseFn, min: f64, max: f64 },
}

impl fmt::Debug for StubProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StubProfile::Affine {
                intercept,
                slope,
                min,
                max,
            } => write!(f, "Affine({intercept} + {slope}·p on [{min}, {max}])"),
            StubProfile::Table(knots) => write!(f, "Table({knots:?})"),
            StubProfile::Function { min, max, .. } => write!(f, "Function(on [{min}, {max}])"),
        }
    }
}

const MONOTONE_GRID: usize = 1024;

impl StubProfile {
    pub fn function(f: impl Fn(f64) -> f64 + Send + Sync + 'static, min: f64, max: f64) -> Self {
        StubProfile::Function {
            f: Arc::new(f),
            min,
            max,
        }
    }

    pub fn domain(&self) -> (f64, f64) {
        match self {
            StubProfile::Affine { min, max, .. } | StubProfile::Function { min, max, .. } => (*min, *max),
            StubProfile::Table(knots) => (knots[0].0, knots[knots.len() - 1].0),
        }
    }

    fn raw(&self, p: f64) -> f64 {
        match self {
            StubProfile::Affine { intercept, slope, .. } => intercept + slope * p,
            StubProfile::Function { f, .. } => f(p),
            StubProfile::Table(knots) => {
                let i = knots
                    .windows(2)
                    .position(|w| p <= w[1].0)
                    .unwrap_or(knots.len() - 2);
                let ((p0, m0), (p1, m1)) = (knots[i], knots[i + 1]);
                m0 + (m1 - m0) * (p - p0) / (p1 - p0)
            }
        }
    }

    /// Metric value at `p`; an error outside the profile's domain.
    pub fn eval(&self, p: f64) -> Result<f64, CodecError> {
        let (min, max) = self.domain();
        if !(min..=max).contains(&p) {
            return Err(CodecError::ParamOutOfDomain {
                value: p,
                domain: format!("[{min}, {max}]"),
            });
        }
        Ok(self.raw(p))
    }

    fn validate(&self) -> Result<QualityDirection, CodecError> {
        let bad = |msg: &str| Err(CodecError::InvalidProfile(msg.to_string()));
        let (min, max) = self.domain();
        if !(min.is_finite() && max.is_finite() && min > 0.0 && min < max) {
            return bad("domain must satisfy 0 < min < max");
        }
        let samples: Vec<f64> = match self {
            StubProfile::Affine { slope, intercept, .. } => {
                if *slope == 0.0 || !slope.is_finite() || !intercept.is_finite() {
                    return bad("affine slope must be finite and non-zero");
                }
                vec![self.raw(min), self.raw(max)]
            }
            StubProfile::Table(knots) => {
                if knots.len() < 2 {
                    return bad("a table needs at least two knots");
                }
                if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return bad("table params must be strictly increasing");
                }
                knots.iter().map(|k| k.1).collect()
            }
            StubProfile::Function { .. } => (0..=MONOTONE_GRID)
                .map(|i| self.raw(min + (max - min) * i as f64 / MONOTONE_GRID as f64))
                .collect(),
        };
        if samples.iter().any(|v| !v.is_finite()) {
            return bad("profile values must be finite");
        }
        if samples.windows(2).all(|w| w[1] < w[0]) {
            Ok(QualityDirection::MetricDecreasesWithParam)
        } else if samples.windows(2).all(|w| w[1] > w[0]) {
            Ok(QualityDirection::MetricIncreasesWithParam)
        } else {
            bad("profile is not strictly monotone")
        }
    }
}

#[derive(Clone)]
pub struct StubCodec {
    descriptor: CodecDescriptor,
    profile: StubProfile,
    payload_len: PayloadLenFn,
    delay: Option<Duration>,
}

impl fmt::Debug for StubCodec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StubCodec")
            .field("profile", &self.profile)
            .field("delay", &self.delay)
            .finish_non_exhaustive()
    }
}

const PARAM_BYTES: usize = 8;

impl StubCodec {
    /// Decreasing profiles make a quantization-step stub; increasing ones a
    /// bits-per-pixel stub (domain must then lie in (0, 8]).
    pub fn new(profile: StubProfile) -> Result<Self, CodecError> {
        let direction = profile.validate()?;
        let kind = match direction {
            QualityDirection::MetricDecreasesWithParam => ParamKind::QuantizationStep,
            QualityDirection::MetricIncreasesWithParam => ParamKind::BitsPerPixel,
        };
        let (min, max) = profile.domain();
        let default_range = ParameterRange::new(kind, min, max)
            .map_err(|e| CodecError::InvalidProfile(e.to_string()))?;
        Ok(StubCodec {
            descriptor: CodecDescriptor {
                codec_id: "stub".into(),
                param_kind: kind,
                default_range,
                quality_direction: direction,
            },
            profile,
            payload_len: Arc::new(|raw_bytes, p| (raw_bytes as f64 / p).ceil() as usize),
            delay: None,
        })
    }

    /// Parses `stub:<intercept>:<slope>:<min>:<max>[:<delay_ms>]` or
    /// `stub-table:<p>=<m>,<p>=<m>,...`.
    pub fn from_spec(spec: &str) -> Result<Self, CodecError> {
        let bad = || CodecError::InvalidProfile(format!("cannot parse stub spec `{spec}`"));
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
        if let Some(rest) = spec.strip_prefix("stub-table:") {
            let knots = rest
                .split(',')
                .map(|kv| {
                    let (p, m) = kv.split_once('=').ok_or_else(bad)?;
                    Ok((num(p)?, num(m)?))
                })
                .collect::<Result<Vec<_>, CodecError>>()?;
            return StubCodec::new(StubProfile::Table(knots));
        }
        let rest = spec.strip_prefix("stub:").ok_or_else(bad)?;
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 4 && parts.len() != 5 {
            return Err(bad());
        }
        let codec = StubCodec::new(StubProfile::Affine {
            intercept: num(parts[0])?,
            slope: num(parts[1])?,
            min: num(parts[2])?,
            max: num(parts[3])?,
        })?;
        match parts.get(4) {
            Some(ms) => Ok(codec.with_delay(Duration::from_millis(ms.parse().map_err(|_| bad())?))),
            None => Ok(codec),
        }
    }

    /// Payload length as a function of `(raw image bytes, param)`.
    pub fn with_payload_len(mut self, f: impl Fn(usize, f64) -> usize + Send + Sync + 'static) -> Self {
        self.payload_len = Arc::new(f);
        self
    }

    /// Sleeps this long on every compress call.
    pub fn with_delay(mut self, delay: Duration) -> Self {
        self.delay = Some(delay);
        self
    }

    pub fn profile(&self) -> &StubProfile {
        &self.profile
    }

    /// The metric this stub answers exactly, reported under `descriptor`.
    pub fn designated_metric(&self, descriptor: MetricDescriptor) -> StubMetric {
        StubMetric {
            descriptor,
            profile: self.profile.clone(),
        }
    }
}

fn embed(param: f64, width: usize, height: usize, depth: BitDepth) -> Result<RasterImage, CodecError> {
    let mut samples = vec![0u16; width * height];
    let bytes = param.to_le_bytes();
    match depth {
        BitDepth::Eight => {
            for (s, &b) in samples.iter_mut().zip(&bytes) {
                *s = u16::from(b);
            }
        }
        BitDepth::Sixteen => {
            for (s, c) in samples.iter_mut().zip(bytes.chunks_exact(2)) {
                *s = u16::from_le_bytes([c[0], c[1]]);
            }
        }
    }
    Ok(RasterImage::new(width, height, depth, samples)?)
}

fn extract(image: &RasterImage) -> Option<f64> {
    let s = image.samples();
    let mut bytes = [0u8; 8];
    match image.bit_depth() {
        BitDepth::Eight => {
            for (b, &v) in bytes.iter_mut().zip(s.get(..8)?) {
                *b = v as u8;
            }
        }
        BitDepth::Sixteen => {
            for (i, &v) in s.get(..4)?.iter().enumerate() {
                bytes[2 * i..2 * i + 2].copy_from_slice(&v.to_le_bytes());
            }
        }
    }
    Some(f64::from_le_bytes(bytes))
}

impl Codec for StubCodec {
    fn descriptor(&self) -> &CodecDescriptor {
        &self.descriptor
    }

    fn compress(&self, image: &RasterImage, param: ControlParameter) -> Result<CompressedBlob, CodecError> {
        check_kind(self, param)?;
        self.profile.eval(param.value())?;
        if image.pixel_count() < PARAM_BYTES {
            return Err(CodecError::ImageTooSmall("the stub needs at least 8 pixels".into()));
        }
        if let Some(delay) = self.delay {
            std::thread::sleep(delay);
        }
        let len = (self.payload_len)(image.raw_byte_len(), param.value()).max(PARAM_BYTES);
        let mut payload = vec![0u8; len];
        payload[..PARAM_BYTES].copy_from_slice(&param.value().to_le_bytes());
        Ok(CompressedBlob {
            codec_id: self.descriptor.codec_id.clone(),
            param,
            width: image.width(),
            height: image.height(),
            bit_depth: image.bit_depth(),
            backend: BackendId::Opaque,
            payload,
        })
    }

    fn decompress(&self, blob: &CompressedBlob) -> Result<RasterImage, CodecError> {
        check_blob_codec(self, blob)?;
        let head: [u8; PARAM_BYTES] = blob
            .payload
            .get(..PARAM_BYTES)
            .and_then(|b| b.try_into().ok())
            .ok_or_else(|| CodecError::CorruptPayload("stub payload shorter than 8 bytes".into()))?;
        let p = f64::from_le_bytes(head);
        if p != blob.param.value() {
            return Err(CodecError::CorruptPayload("embedded parameter disagrees with header".into()));
        }
        embed(p, blob.width, blob.height, blob.bit_depth)
    }
}

/// Metric paired with a [`StubCodec`]: returns `profile(param)` for images
/// decoded by the stub.
#[derive(Clone)]
pub struct StubMetric {
    descriptor: MetricDescriptor,
    profile: StubProfile,
}

impl QualityMetric for StubMetric {
    fn descriptor(&self) -> &MetricDescriptor {
        &self.descriptor
    }

    fn evaluate(&self, reference: &RasterImage, distorted: &RasterImage) -> Result<f64, MetricError> {
        if !reference.same_shape(distorted) {
            return Err(MetricError::ShapeMismatch {
                reference: reference.shape_string(),
                distorted: distorted.shape_string(),
            });
        }
        let p = extract(distorted)
            .ok_or_else(|| MetricError::Unsupported("image too small to carry a stub parameter".into()))?;
        self.profile
            .eval(p)
            .map_err(|e| MetricError::Unsupported(format!("not a stub-decoded image: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagecore::compression_ratio;
    use crate::metrics::{metric_registry, MetricId};

    fn affine() -> StubCodec {
        StubCodec::from_spec("stub:60:-1:1:50").unwrap()
    }

    fn qs(v: f64) -> ControlParameter {
        ControlParameter::new(ParamKind::QuantizationStep, v).unwrap()
    }

    #[test]
    fn metric_is_exact_profile_value() {
        let codec = affine();
        let metric = codec.designated_metric(metric_registry(MetricId::Psnr.as_str()).unwrap().descriptor().clone());
        let img = RasterImage::filled(512, 512, BitDepth::Eight, 77).unwrap();
        let blob = codec.compress(&img, qs(20.0)).unwrap();
        let out = codec.decompress(&blob).unwrap();
        assert_eq!(metric.evaluate(&img, &out).unwrap(), 40.0);
    }

    #[test]
    fn domain_is_enforced() {
        let codec = affine();
        assert!(codec.profile().eval(0.5).is_err());
        assert!(codec.profile().eval(50.5).is_err());
        let img = RasterImage::filled(8, 8, BitDepth::Eight, 0).unwrap();
        assert!(matches!(codec.compress(&img, qs(51.0)), Err(CodecError::ParamOutOfDomain { .. })));
    }

    #[test]
    fn cr_follows_declared_payload_length() {
        let codec = affine();
        let img = RasterImage::filled(512, 512, BitDepth::Eight, 0).unwrap();
        let blob = codec.compress(&img, qs(10.0)).unwrap();
        assert_eq!(blob.payload.len(), 26215);
        let cr = compression_ratio(&img, &blob).unwrap();
        assert!((cr - 10.0).abs() < 0.02, "{cr}");
    }

    #[test]
    fn non_monotone_profiles_are_rejected() {
        assert!(StubCodec::new(StubProfile::Table(vec![(1.0, 50.0), (2.0, 40.0), (3.0, 45.0)])).is_err());
        assert!(StubCodec::new(StubProfile::function(|p: f64| (p / 3.0).sin(), 1.0, 50.0)).is_err());
        assert!(StubCodec::new(StubProfile::Affine {
            intercept: 1.0,
            slope: 0.0,
            min: 1.0,
            max: 2.0
        })
        .is_err());
    }

    #[test]
    fn increasing_profile_is_a_bpp_stub() {
        let codec = StubCodec::new(StubProfile::Affine {
            intercept: 20.0,
            slope: 5.0,
            min: 0.1,
            max: 8.0,
        })
        .unwrap();
        assert_eq!(codec.descriptor().param_kind, ParamKind::BitsPerPixel);
        assert_eq!(
            codec.descriptor().quality_direction,
            QualityDirection::MetricIncreasesWithParam
        );
    }

    #[test]
    fn table_interpolates() {
        let codec = StubCodec::from_spec("stub-table:1=59,10=50,50=10").unwrap();
        assert_eq!(codec.profile().eval(5.5).unwrap(), 54.5);
        assert_eq!(codec.profile().eval(30.0).unwrap(), 30.0);
    }
}
