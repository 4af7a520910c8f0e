//! Finding the control parameter that yields a target metric value.
//!
//! Both procedures first compress at the two ends of the parameter range to
//! learn the achievable metric interval. Those two endpoint probes are kept
//! in [`SearchResult::endpoint_probes`]; only the probes that follow count as
//! iterations and appear in [`SearchResult::history`].
//!
//! Internally the parameter is mapped onto a virtual axis on which quality
//! never increases, so quantization-step and bits-per-pixel coders share one
//! implementation (the bpp axis is mirrored).

mod report;

pub use report::{run_with_report, Run, SearchReport, ReportStatus};

use crate::codecs::{resolve, Codec, CodecError, ControlParameter, ParameterRange, QualityDirection, StubCodec};
use crate::imagecore::{bits_per_pixel, compression_ratio, CompressedBlob, ImageError, RasterImage};
use crate::metrics::{metric_registry, MetricDescriptor, MetricError, MetricId, MetricValue, QualityMetric, ValueRange};
use serde::{Deserialize, Serialize};
use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use thiserror::Error;

/// Parameter resolution as a fraction of the range width.
pub const RESOLUTION_FRACTION: f64 = 1e-3;
/// Iteration cap for interpolation search.
pub const DEFAULT_INTERP_MAX_ITERS: usize = 10;
/// Out-of-bracket interpolation steps land this fraction inside the bracket.
const CLAMP_INSET: f64 = 0.05;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error(
        "target {target} is not achievable: metric spans [{}, {}] over the parameter range",
        span.achievable_interval.min,
        span.achievable_interval.max
    )]
    Infeasible {
        target: f64,
        span: MetricSpan,
        endpoint_probes: Vec<Probe>,
    },
    #[error("invalid quality target: {0}")]
    InvalidTarget(String),
    #[error("invalid search settings: {0}")]
    InvalidSettings(String),
    #[error("sample domain: {0}")]
    Domain(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Image(#[from] ImageError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Bisect,
    Interpolate,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Bisect => "bisect",
            Method::Interpolate => "interpolate",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = SearchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bisect" | "bisection" => Ok(Method::Bisect),
            "interp" | "interpolate" | "interpolation" => Ok(Method::Interpolate),
            other => Err(SearchError::InvalidSettings(format!("unknown method `{other}`"))),
        }
    }
}

/// Metric, target value and tolerance Δ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityTarget {
    pub metric_id: String,
    pub target_value: f64,
    pub tolerance: f64,
}

impl QualityTarget {
    /// Validates against the metric's range; `tolerance` defaults to 0.1 dB
    /// (0.005 for unitless metrics).
    pub fn new(metric: &MetricDescriptor, target_value: f64, tolerance: Option<f64>) -> Result<Self, SearchError> {
        let tolerance = tolerance.unwrap_or_else(|| metric.default_tolerance());
        if !(tolerance.is_finite() && tolerance > 0.0) {
            return Err(SearchError::InvalidTarget(format!("tolerance must be positive, got {tolerance}")));
        }
        if !target_value.is_finite() || !metric.range.contains(target_value) {
            return Err(SearchError::InvalidTarget(format!(
                "target {target_value} lies outside the {} range [{}, {}]",
                metric.metric_id, metric.range.min, metric.range.max
            )));
        }
        Ok(QualityTarget {
            metric_id: metric.metric_id.clone(),
            target_value,
            tolerance,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchStatus {
    Converged,
    ExhaustedResolution,
    ClampedToMinParam,
    ClampedToMaxParam,
}

impl SearchStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SearchStatus::Converged => "converged",
            SearchStatus::ExhaustedResolution => "exhausted_resolution",
            SearchStatus::ClampedToMinParam => "clamped_to_min_param",
            SearchStatus::ClampedToMaxParam => "clamped_to_max_param",
        }
    }
}

/// One compress → decompress → measure cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub param: f64,
    pub value: f64,
    pub stored_bytes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeKind {
    Endpoint,
    Iteration,
}

/// Called after every probe, e.g. to publish live progress.
pub type Observer<'a> = dyn Fn(ProbeKind, &Probe) + Send + Sync + 'a;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSpan {
    pub value_at_param_min: MetricValue,
    pub value_at_param_max: MetricValue,
    pub achievable_interval: ValueRange,
}

impl MetricSpan {
    fn new(metric_id: &str, at_min: f64, at_max: f64) -> Self {
        MetricSpan {
            value_at_param_min: MetricValue {
                metric_id: metric_id.to_string(),
                value: at_min,
            },
            value_at_param_max: MetricValue {
                metric_id: metric_id.to_string(),
                value: at_max,
            },
            achievable_interval: ValueRange {
                min: at_min.min(at_max),
                max: at_min.max(at_max),
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub status: SearchStatus,
    pub method: Method,
    pub codec_id: String,
    pub target: QualityTarget,
    pub achieved_value: MetricValue,
    pub final_param: ControlParameter,
    pub iterations: usize,
    pub history: Vec<Probe>,
    pub endpoint_probes: Vec<Probe>,
    pub span: MetricSpan,
    pub range: ParameterRange,
    pub cr: f64,
    pub bpp: f64,
    pub blob: CompressedBlob,
    /// The delivered image, in the original sample domain.
    pub decoded: RasterImage,
}

/// A pair of mutually inverse sample maps. The search compresses in the
/// mapped domain and measures quality after mapping back.
pub trait SampleDomain: Send + Sync {
    fn forward(&self, image: &RasterImage) -> Result<RasterImage, SearchError>;
    fn inverse(&self, image: &RasterImage) -> Result<RasterImage, SearchError>;
}

/// Recommended starting parameters keyed by target value, interpolated
/// linearly between entries and clamped at the ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedTable {
    entries: Vec<(f64, f64)>,
}

impl SeedTable {
    /// `entries` are `(target value, parameter)` pairs.
    pub fn new(mut entries: Vec<(f64, f64)>) -> Result<Self, SearchError> {
        if entries.is_empty() || entries.iter().any(|(t, p)| !t.is_finite() || !p.is_finite() || *p <= 0.0) {
            return Err(SearchError::InvalidSettings("seed table needs finite entries with positive params".into()));
        }
        entries.sort_by(|a, b| a.0.total_cmp(&b.0));
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(SearchError::InvalidSettings("seed table has duplicate targets".into()));
        }
        Ok(SeedTable { entries })
    }

    pub fn recommend(&self, target: f64) -> f64 {
        let e = &self.entries;
        if target <= e[0].0 {
            return e[0].1;
        }
        if target >= e[e.len() - 1].0 {
            return e[e.len() - 1].1;
        }
        let i = e.windows(2).position(|w| target <= w[1].0).expect("target is inside the table");
        let ((t0, p0), (t1, p1)) = (e[i], e[i + 1]);
        p0 + (p1 - p0) * (target - t0) / (t1 - t0)
    }
}

/// A configured search; run it on any number of images.
pub struct Search<'a> {
    codec: &'a dyn Codec,
    metric: &'a dyn QualityMetric,
    target: QualityTarget,
    range: ParameterRange,
    method: Method,
    max_iters: Option<usize>,
    clamp: bool,
    seed: Option<f64>,
    seed_table: Option<SeedTable>,
    domain: Option<&'a dyn SampleDomain>,
    observer: Option<&'a Observer<'a>>,
}

impl<'a> Search<'a> {
    pub fn new(
        codec: &'a dyn Codec,
        metric: &'a dyn QualityMetric,
        target: QualityTarget,
        range: ParameterRange,
    ) -> Self {
        Search {
            codec,
            metric,
            target,
            range,
            method: Method::Interpolate,
            max_iters: None,
            clamp: false,
            seed: None,
            seed_table: None,
            domain: None,
            observer: None,
        }
    }

    pub fn method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    /// Defaults: `ceil(log2(1/RESOLUTION_FRACTION)) + 2` for bisection,
    /// [`DEFAULT_INTERP_MAX_ITERS`] for interpolation.
    pub fn max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = Some(max_iters);
        self
    }

    /// Return the nearest endpoint instead of failing on infeasible targets.
    pub fn clamp(mut self, clamp: bool) -> Self {
        self.clamp = clamp;
        self
    }

    /// First interpolation probe; defaults to log interpolation between the
    /// two endpoint probes.
    pub fn seed(mut self, param: f64) -> Self {
        self.seed = Some(param);
        self
    }

    pub fn seed_table(mut self, table: SeedTable) -> Self {
        self.seed_table = Some(table);
        self
    }

    pub fn domain(mut self, domain: &'a dyn SampleDomain) -> Self {
        self.domain = Some(domain);
        self
    }

    pub fn observer(mut self, observer: &'a Observer<'a>) -> Self {
        self.observer = Some(observer);
        self
    }

    pub fn target(&self) -> &QualityTarget {
        &self.target
    }

    pub fn range(&self) -> ParameterRange {
        self.range
    }

    pub fn method_kind(&self) -> Method {
        self.method
    }

    pub fn codec_id(&self) -> &str {
        self.codec.id()
    }

    fn validate(&self) -> Result<(), SearchError> {
        if !self.codec.accepts(self.range.kind()) {
            return Err(SearchError::InvalidSettings(format!(
                "codec `{}` is driven by {}, not {}",
                self.codec.id(),
                self.codec.descriptor().param_kind,
                self.range.kind()
            )));
        }
        let d = self.metric.descriptor();
        if self.target.metric_id != d.metric_id {
            return Err(SearchError::InvalidTarget(format!(
                "target is for `{}` but the metric is `{}`",
                self.target.metric_id, d.metric_id
            )));
        }
        QualityTarget::new(d, self.target.target_value, Some(self.target.tolerance))?;
        if self.max_iters == Some(0) {
            return Err(SearchError::InvalidSettings("max_iters must be at least 1".into()));
        }
        if let Some(seed) = self.seed {
            if !self.range.contains(seed) {
                return Err(SearchError::InvalidSettings(format!(
                    "seed {seed} lies outside [{}, {}]",
                    self.range.min(),
                    self.range.max()
                )));
            }
        }
        Ok(())
    }

    /// Compresses at both range ends and reports the metric there.
    pub fn estimate(&self, image: &RasterImage) -> Result<MetricSpan, SearchError> {
        self.validate()?;
        let mut engine = Engine::new(self, image)?;
        let (lo, hi) = engine.endpoints()?;
        Ok(engine.span(&lo, &hi))
    }

    pub fn run(&self, image: &RasterImage) -> Result<SearchResult, SearchError> {
        self.validate()?;
        let mut engine = Engine::new(self, image)?;
        let (lo, hi) = engine.endpoints()?;
        let span = engine.span(&lo, &hi);
        let endpoint_probes = vec![lo.probe, hi.probe];
        let t = engine.q(self.target.target_value);
        let delta = self.target.tolerance;

        // lo is the high-quality end of the virtual axis
        if (lo.q - t).abs() <= delta || (hi.q - t).abs() <= delta {
            let hit = if (lo.q - t).abs() <= (hi.q - t).abs() { lo } else { hi };
            return engine.finish(SearchStatus::Converged, hit, span, endpoint_probes);
        }
        if t > lo.q || t < hi.q {
            if !self.clamp {
                return Err(SearchError::Infeasible {
                    target: self.target.target_value,
                    span,
                    endpoint_probes,
                });
            }
            let end = if t > lo.q { lo } else { hi };
            let status = if end.probe.param == self.range.min() {
                SearchStatus::ClampedToMinParam
            } else {
                SearchStatus::ClampedToMaxParam
            };
            return engine.finish(status, end, span, endpoint_probes);
        }

        let outcome = match self.method {
            Method::Bisect => engine.bisect(lo, hi, t),
            Method::Interpolate => engine.interpolate(lo, hi, t),
        }?;
        let (status, best) = outcome;
        engine.finish(status, best, span, endpoint_probes)
    }
}

pub type CodecAndMetric = (Arc<dyn Codec>, Arc<dyn QualityMetric>);

/// Codec from `codec_spec` (see [`crate::codecs::resolve`]) with the metric
/// named `metric_id`. Stub codecs get their designated metric, reported
/// under that id.
pub fn resolve_pair(
    codec_spec: &str,
    metric_id: &str,
) -> Result<CodecAndMetric, SearchError> {
    if codec_spec.starts_with("stub") {
        let id: MetricId = metric_id.parse()?;
        let stub = StubCodec::from_spec(codec_spec)?;
        let metric = stub.designated_metric(MetricDescriptor::builtin(id));
        return Ok((Arc::new(stub), Arc::new(metric)));
    }
    Ok((resolve(codec_spec)?, metric_registry(metric_id)?))
}

/// Metric values at both ends of `range` (two compress cycles).
pub fn estimate_range(
    image: &RasterImage,
    codec: &dyn Codec,
    metric: &dyn QualityMetric,
    range: ParameterRange,
) -> Result<MetricSpan, SearchError> {
    let d = metric.descriptor();
    let target = QualityTarget {
        metric_id: d.metric_id.clone(),
        target_value: d.range.min,
        tolerance: d.default_tolerance(),
    };
    Search::new(codec, metric, target, range).estimate(image)
}

/// Interval halving on the parameter axis.
pub fn bisection_search(
    image: &RasterImage,
    codec: &dyn Codec,
    metric: &dyn QualityMetric,
    target: QualityTarget,
    range: ParameterRange,
    max_iters: Option<usize>,
) -> Result<SearchResult, SearchError> {
    let mut s = Search::new(codec, metric, target, range).method(Method::Bisect);
    if let Some(n) = max_iters {
        s = s.max_iters(n);
    }
    s.run(image)
}

/// Log-interpolated probes, then secant steps.
pub fn interpolation_search(
    image: &RasterImage,
    codec: &dyn Codec,
    metric: &dyn QualityMetric,
    target: QualityTarget,
    range: ParameterRange,
    seed: Option<f64>,
    max_iters: Option<usize>,
) -> Result<SearchResult, SearchError> {
    let mut s = Search::new(codec, metric, target, range).method(Method::Interpolate);
    if let Some(seed) = seed {
        s = s.seed(seed);
    }
    if let Some(n) = max_iters {
        s = s.max_iters(n);
    }
    s.run(image)
}

#[derive(Clone)]
struct Point {
    u: f64,
    q: f64,
    probe: Probe,
    blob: CompressedBlob,
    decoded: RasterImage,
}

struct Engine<'s, 'a> {
    s: &'s Search<'a>,
    original: &'s RasterImage,
    coded: Cow<'s, RasterImage>,
    mirrored: bool,
    sign: f64,
    history: Vec<Probe>,
    best: Option<Point>,
}

impl<'s, 'a> Engine<'s, 'a> {
    fn new(s: &'s Search<'a>, image: &'s RasterImage) -> Result<Self, SearchError> {
        let coded = match s.domain {
            Some(d) => Cow::Owned(d.forward(image)?),
            None => Cow::Borrowed(image),
        };
        Ok(Engine {
            s,
            original: image,
            coded,
            mirrored: s.codec.descriptor().quality_direction == QualityDirection::MetricIncreasesWithParam,
            sign: if s.metric.descriptor().higher_is_better { 1.0 } else { -1.0 },
            history: Vec::new(),
            best: None,
        })
    }

    fn q(&self, value: f64) -> f64 {
        self.sign * value
    }

    fn param_of(&self, u: f64) -> f64 {
        if self.mirrored {
            (self.s.range.min() + self.s.range.max() - u).clamp(self.s.range.min(), self.s.range.max())
        } else {
            u
        }
    }

    fn measure(&mut self, u: f64, kind: ProbeKind) -> Result<Point, SearchError> {
        let param = self.s.range.param(self.param_of(u));
        let blob = self.s.codec.compress(&self.coded, param)?;
        let mut decoded = self.s.codec.decompress(&blob)?;
        if let Some(d) = self.s.domain {
            decoded = d.inverse(&decoded)?;
        }
        let value = self.s.metric.evaluate(self.original, &decoded)?;
        let probe = Probe {
            param: param.value(),
            value,
            stored_bytes: blob.stored_len(),
        };
        if let Some(obs) = self.s.observer {
            obs(kind, &probe);
        }
        if kind == ProbeKind::Iteration {
            self.history.push(probe);
        }
        let point = Point {
            u,
            q: self.q(value),
            probe,
            blob,
            decoded,
        };
        let t = self.s.target.target_value;
        if self.best.as_ref().is_none_or(|b| (value - t).abs() < (b.probe.value - t).abs()) {
            self.best = Some(point.clone());
        }
        Ok(point)
    }

    /// Probes the high-quality end first, then the low-quality end.
    fn endpoints(&mut self) -> Result<(Point, Point), SearchError> {
        let (min, max) = (self.s.range.min(), self.s.range.max());
        let lo = self.measure(min, ProbeKind::Endpoint)?;
        let hi = self.measure(max, ProbeKind::Endpoint)?;
        Ok((lo, hi))
    }

    fn span(&self, lo: &Point, hi: &Point) -> MetricSpan {
        let (at_min, at_max) = if self.mirrored {
            (hi.probe.value, lo.probe.value)
        } else {
            (lo.probe.value, hi.probe.value)
        };
        MetricSpan::new(&self.s.metric.descriptor().metric_id, at_min, at_max)
    }

    fn epsilon(&self) -> f64 {
        RESOLUTION_FRACTION * self.s.range.width()
    }

    fn converged(&self, p: &Point, t: f64) -> bool {
        (p.q - t).abs() <= self.s.target.tolerance
    }

    fn best(&mut self) -> Point {
        self.best.take().expect("at least the endpoints were probed")
    }

    fn bisect(&mut self, mut lo: Point, mut hi: Point, t: f64) -> Result<(SearchStatus, Point), SearchError> {
        let max_iters = self
            .s
            .max_iters
            .unwrap_or_else(|| (1.0 / RESOLUTION_FRACTION).log2().ceil() as usize + 2);
        for _ in 0..max_iters {
            if hi.u - lo.u < self.epsilon() {
                break;
            }
            let mid = self.measure(0.5 * (lo.u + hi.u), ProbeKind::Iteration)?;
            if self.converged(&mid, t) {
                return Ok((SearchStatus::Converged, mid));
            }
            if mid.q > t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok((SearchStatus::ExhaustedResolution, self.best()))
    }

    /// False position on the bracket. The first two steps interpolate in
    /// `ln(u)`; later steps use whichever of the linear or logarithmic line
    /// through the bracket better predicts the most recent outside probes.
    /// When one bracket end survives two steps in a row its distance to the
    /// target is halved (Illinois rule) so a curved response cannot stall.
    fn interpolate(&mut self, mut lo: Point, mut hi: Point, t: f64) -> Result<(SearchStatus, Point), SearchError> {
        let max_iters = self.s.max_iters.unwrap_or(DEFAULT_INTERP_MAX_ITERS);
        let (min, max) = (self.s.range.min(), self.s.range.max());
        let seed_u = match (self.s.seed, &self.s.seed_table) {
            (Some(p), _) => Some(p),
            (None, Some(tb)) => Some(tb.recommend(self.s.target.target_value).clamp(min, max)),
            (None, None) => None,
        }
        // the mirror map is an involution
        .map(|p| self.param_of(p));

        let eps = self.epsilon();
        let (mut lo_q, mut hi_q) = (lo.q, hi.q);
        let mut outside_probes: Vec<Point> = Vec::new();
        let mut recent: Vec<Point> = Vec::new();
        // +1 when lo moved last, -1 when hi moved last, doubled on repeats
        let mut streak: i32 = 0;
        let mut outside = 0;
        for step in 0..max_iters {
            let width = hi.u - lo.u;
            if width < eps {
                break;
            }
            let candidate = match (step, seed_u) {
                (0, Some(u)) => Some(u),
                (0, None) => log_false_position(&lo, lo_q, &hi, hi_q, t),
                (1, _) => outside_probes
                    .last()
                    .and_then(|c| log_inverse_quadratic(&lo, &hi, c, t))
                    .filter(|&u| u > lo.u && u < hi.u)
                    .or_else(|| log_false_position(&lo, lo_q, &hi, hi_q, t)),
                _ => {
                    let (a, b) = (&recent[recent.len() - 2], &recent[recent.len() - 1]);
                    let checks: Vec<&Point> = [&lo, &hi]
                        .into_iter()
                        .chain(outside_probes.iter().rev())
                        .filter(|c| c.u != a.u && c.u != b.u)
                        .take(2)
                        .collect();
                    let log = prefers_log(a, b, &checks);
                    let secant = if log {
                        log_false_position(a, a.q, b, b.q, t)
                    } else {
                        linear_false_position(a, a.q, b, b.q, t)
                    };
                    secant.filter(|&u| u > lo.u && u < hi.u).or_else(|| {
                        if log {
                            log_false_position(&lo, lo_q, &hi, hi_q, t)
                        } else {
                            linear_false_position(&lo, lo_q, &hi, hi_q, t)
                        }
                    })
                }
            };
            let mid = 0.5 * (lo.u + hi.u);
            let u = match candidate {
                Some(u) if u > lo.u && u < hi.u => {
                    outside = 0;
                    u
                }
                Some(u) if u.is_finite() => {
                    outside += 1;
                    if outside >= 2 {
                        outside = 0;
                        mid
                    } else if u <= lo.u {
                        lo.u + CLAMP_INSET * width
                    } else {
                        hi.u - CLAMP_INSET * width
                    }
                }
                _ => mid,
            };
            let point = self.measure(u, ProbeKind::Iteration)?;
            if self.converged(&point, t) {
                return Ok((SearchStatus::Converged, point));
            }
            recent.push(point.clone());
            if point.q > t {
                outside_probes.push(std::mem::replace(&mut lo, point));
                lo_q = lo.q;
                streak = if streak > 0 { streak + 1 } else { 1 };
                if step >= 2 && streak >= 2 {
                    hi_q = t + 0.5 * (hi_q - t);
                }
            } else {
                outside_probes.push(std::mem::replace(&mut hi, point));
                hi_q = hi.q;
                streak = if streak < 0 { streak - 1 } else { -1 };
                if step >= 2 && streak <= -2 {
                    lo_q = t + 0.5 * (lo_q - t);
                }
            }
        }
        Ok((SearchStatus::ExhaustedResolution, self.best()))
    }

    fn finish(
        &mut self,
        status: SearchStatus,
        point: Point,
        span: MetricSpan,
        endpoint_probes: Vec<Probe>,
    ) -> Result<SearchResult, SearchError> {
        let s = self.s;
        let cr = compression_ratio(&self.coded, &point.blob)?;
        let bpp = bits_per_pixel(&self.coded, &point.blob)?;
        Ok(SearchResult {
            status,
            method: s.method,
            codec_id: s.codec.id().to_string(),
            target: s.target.clone(),
            achieved_value: MetricValue {
                metric_id: s.metric.descriptor().metric_id.clone(),
                value: point.probe.value,
            },
            final_param: point.blob.param,
            iterations: self.history.len(),
            history: std::mem::take(&mut self.history),
            endpoint_probes,
            span,
            range: s.range,
            cr,
            bpp,
            blob: point.blob,
            decoded: point.decoded,
        })
    }
}

/// Root of the line through `(ln a.u, aq)` and `(ln b.u, bq)`.
fn log_false_position(a: &Point, aq: f64, b: &Point, bq: f64, t: f64) -> Option<f64> {
    if aq == bq || a.u <= 0.0 || b.u <= 0.0 {
        return None;
    }
    let (la, lb) = (a.u.ln(), b.u.ln());
    Some((la + (t - aq) * (lb - la) / (bq - aq)).exp())
}

/// `u` at which the quadratic in `q` through three points in `(q, ln u)`
/// reaches `t` (inverse quadratic interpolation).
fn log_inverse_quadratic(a: &Point, b: &Point, c: &Point, t: f64) -> Option<f64> {
    let pts = [a, b, c];
    if pts.iter().any(|p| p.u <= 0.0) || a.q == b.q || a.q == c.q || b.q == c.q {
        return None;
    }
    let mut x = 0.0;
    for (i, p) in pts.iter().enumerate() {
        let mut w = p.u.ln();
        for (j, o) in pts.iter().enumerate() {
            if i != j {
                w *= (t - o.q) / (p.q - o.q);
            }
        }
        x += w;
    }
    x.is_finite().then(|| x.exp())
}

/// Root of the line through `(a.u, aq)` and `(b.u, bq)`.
fn linear_false_position(a: &Point, aq: f64, b: &Point, bq: f64, t: f64) -> Option<f64> {
    if aq == bq {
        return None;
    }
    Some(a.u + (t - aq) * (b.u - a.u) / (bq - aq))
}

/// Whether the line through `a` and `b` in `ln(u)` predicts `checks` better
/// than the line in `u`. Ties (including no checks) go to the linear line.
fn prefers_log(a: &Point, b: &Point, checks: &[&Point]) -> bool {
    if a.u <= 0.0 || b.u <= 0.0 || a.q == b.q {
        return false;
    }
    let slope_lin = (b.q - a.q) / (b.u - a.u);
    let slope_log = (b.q - a.q) / (b.u.ln() - a.u.ln());
    let (mut lin, mut log) = (0.0, 0.0);
    for c in checks {
        lin += (a.q + (c.u - a.u) * slope_lin - c.q).abs();
        log += (a.q + (c.u.ln() - a.u.ln()) * slope_log - c.q).abs();
    }
    log < lin
}
