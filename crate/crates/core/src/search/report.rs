//! Serializable search report shared by the CLI and the service.

use super::{Method, MetricSpan, Probe, Search, SearchError, SearchResult, SearchStatus};
use crate::codecs::{ControlParameter, ParameterRange};
use crate::imagecore::RasterImage;
use crate::metrics::ValueRange;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportStatus {
    Converged,
    ExhaustedResolution,
    ClampedToMinParam,
    ClampedToMaxParam,
    Infeasible,
    Failed,
}

impl From<SearchStatus> for ReportStatus {
    fn from(s: SearchStatus) -> Self {
        match s {
            SearchStatus::Converged => ReportStatus::Converged,
            SearchStatus::ExhaustedResolution => ReportStatus::ExhaustedResolution,
            SearchStatus::ClampedToMinParam => ReportStatus::ClampedToMinParam,
            SearchStatus::ClampedToMaxParam => ReportStatus::ClampedToMaxParam,
        }
    }
}

/// Outcome of one search. Fields that a failed run cannot provide are
/// `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub codec_id: String,
    pub metric_id: String,
    pub target: f64,
    pub tolerance: f64,
    pub method: Method,
    pub range: ParameterRange,
    pub status: ReportStatus,
    pub achieved_value: Option<f64>,
    pub final_param: Option<ControlParameter>,
    pub iterations: usize,
    pub history: Vec<Probe>,
    pub endpoint_probes: Vec<Probe>,
    pub span: Option<MetricSpan>,
    pub achievable_interval: Option<ValueRange>,
    pub cr: Option<f64>,
    pub bpp: Option<f64>,
    pub stored_bytes: Option<usize>,
    pub error: Option<String>,
}

impl SearchReport {
    pub fn from_result(r: &SearchResult) -> Self {
        SearchReport {
            codec_id: r.codec_id.clone(),
            metric_id: r.target.metric_id.clone(),
            target: r.target.target_value,
            tolerance: r.target.tolerance,
            method: r.method,
            range: r.range,
            status: r.status.into(),
            achieved_value: Some(r.achieved_value.value),
            final_param: Some(r.final_param),
            iterations: r.iterations,
            history: r.history.clone(),
            endpoint_probes: r.endpoint_probes.clone(),
            span: Some(r.span.clone()),
            achievable_interval: Some(r.span.achievable_interval),
            cr: Some(r.cr),
            bpp: Some(r.bpp),
            stored_bytes: Some(r.blob.stored_len()),
            error: None,
        }
    }

    pub fn from_error(search: &Search<'_>, err: &SearchError) -> Self {
        let (status, span, endpoint_probes) = match err {
            SearchError::Infeasible {
                span,
                endpoint_probes,
                ..
            } => (ReportStatus::Infeasible, Some(span.clone()), endpoint_probes.clone()),
            _ => (ReportStatus::Failed, None, Vec::new()),
        };
        let target = search.target();
        SearchReport {
            codec_id: search.codec_id().to_string(),
            metric_id: target.metric_id.clone(),
            target: target.target_value,
            tolerance: target.tolerance,
            method: search.method_kind(),
            range: search.range(),
            status,
            achieved_value: None,
            final_param: None,
            iterations: 0,
            history: Vec::new(),
            endpoint_probes,
            achievable_interval: span.as_ref().map(|s| s.achievable_interval),
            span,
            cr: None,
            bpp: None,
            stored_bytes: None,
            error: Some(err.to_string()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports contain only serializable data")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Checks the result invariants; returns the first violation.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.iterations != self.history.len() {
            return Err(format!(
                "iterations {} != history length {}",
                self.iterations,
                self.history.len()
            ));
        }
        if self.status == ReportStatus::Converged {
            let v = self.achieved_value.ok_or("converged without an achieved value")?;
            if (v - self.target).abs() > self.tolerance {
                return Err(format!("converged at {v}, outside {} ± {}", self.target, self.tolerance));
            }
        }
        if let Some(p) = self.final_param {
            if !self.range.contains(p.value()) {
                return Err(format!("final param {} outside the range", p.value()));
            }
        }
        Ok(())
    }

    /// Stable one-line `key=value` summary.
    pub fn summary_line(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), |v| format!("{v:.4}"));
        let mut line = format!(
            "status={} metric={} target={} achieved={} iterations={} param={} cr={} bpp={}",
            serde_json::to_value(self.status)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default(),
            self.metric_id,
            self.target,
            opt(self.achieved_value),
            self.iterations,
            opt(self.final_param.map(|p| p.value())),
            opt(self.cr),
            opt(self.bpp),
        );
        if let Some(i) = self.achievable_interval {
            line.push_str(&format!(" interval=[{:.4}, {:.4}]", i.min, i.max));
        }
        line
    }
}

/// A search outcome together with its report.
pub struct Run {
    pub outcome: Result<SearchResult, SearchError>,
    pub report: SearchReport,
}

/// Runs `search` on `image` and builds the report for either outcome.
pub fn run_with_report(search: &Search<'_>, image: &RasterImage) -> Run {
    let outcome = search.run(image);
    let report = match &outcome {
        Ok(r) => SearchReport::from_result(r),
        Err(e) => SearchReport::from_error(search, e),
    };
    Run { outcome, report }
}
