//! Job table, worker pool and the append-only job log.

use crate::store::Store;
use crate::ServiceError;
use qpress::codecs::{Codec, ParameterRange};
use qpress::imagecore::{BitDepth, RasterImage};
use qpress::metrics::QualityMetric;
use qpress::search::{
    resolve_pair, run_with_report, Method, Probe, ProbeKind, QualityTarget, Search, SearchError, SearchReport,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::sync::{Arc, Mutex, MutexGuard};
use tokio::sync::Semaphore;

fn default_codec() -> String {
    "dct".into()
}

fn default_metric() -> String {
    "psnr".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobSpec {
    pub image_id: String,
    #[serde(default = "default_codec")]
    pub codec: String,
    #[serde(default = "default_metric")]
    pub metric: String,
    pub target: f64,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub param_min: Option<f64>,
    #[serde(default)]
    pub param_max: Option<f64>,
    #[serde(default)]
    pub method: Option<Method>,
    #[serde(default)]
    pub clamp: bool,
    #[serde(default)]
    pub max_iters: Option<usize>,
}

/// Codec, metric and parameter range resolved from user-supplied names.
pub struct Pipeline {
    pub codec: Arc<dyn Codec>,
    pub metric: Arc<dyn QualityMetric>,
    pub range: ParameterRange,
}

impl Pipeline {
    pub fn resolve(
        codec: &str,
        metric: &str,
        param_min: Option<f64>,
        param_max: Option<f64>,
    ) -> Result<Self, ServiceError> {
        let invalid = |e: SearchError| ServiceError::Invalid(e.to_string());
        let (codec, metric) = resolve_pair(codec, metric).map_err(invalid)?;
        let d = codec.descriptor();
        let min = param_min.unwrap_or(d.default_range.min());
        let max = param_max.unwrap_or(d.default_range.max());
        if min >= max {
            return Err(ServiceError::Invalid(format!("param_min ({min}) must be below param_max ({max})")));
        }
        let range = ParameterRange::new(d.param_kind, min, max).map_err(|e| ServiceError::Invalid(e.to_string()))?;
        Ok(Pipeline { codec, metric, range })
    }
}

/// A spec checked the same way the CLI checks its flags.
pub struct Prepared {
    pub pipeline: Pipeline,
    pub target: QualityTarget,
    pub method: Method,
}

impl JobSpec {
    pub fn prepare(&self) -> Result<Prepared, ServiceError> {
        let pipeline = Pipeline::resolve(&self.codec, &self.metric, self.param_min, self.param_max)?;
        let target = QualityTarget::new(pipeline.metric.descriptor(), self.target, self.delta)
            .map_err(|e| ServiceError::Invalid(e.to_string()))?;
        if self.max_iters == Some(0) {
            return Err(ServiceError::Invalid("max_iters must be positive".into()));
        }
        Ok(Prepared {
            pipeline,
            target,
            method: self.method.unwrap_or(Method::Interpolate),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

#[derive(Clone)]
pub struct Artifacts {
    pub decoded: RasterImage,
    pub diff: RasterImage,
    pub max_difference: u16,
}

struct JobEntry {
    spec: JobSpec,
    state: JobState,
    endpoint_probes: Vec<Probe>,
    history: Vec<Probe>,
    report: Option<SearchReport>,
    error: Option<String>,
    artifacts: Option<Artifacts>,
}

impl JobEntry {
    fn queued(spec: JobSpec) -> Self {
        JobEntry {
            spec,
            state: JobState::Queued,
            endpoint_probes: Vec::new(),
            history: Vec::new(),
            report: None,
            error: None,
            artifacts: None,
        }
    }
}

/// What a poll returns. `result` is present exactly when the job is done.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobView {
    pub job_id: String,
    pub spec: JobSpec,
    pub state: JobState,
    pub endpoint_probes: Vec<Probe>,
    pub history: Vec<Probe>,
    pub result: Option<SearchReport>,
    pub error: Option<String>,
    pub max_difference: Option<u16>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum LogEvent {
    Submitted { job_id: String, spec: JobSpec },
    Done { job_id: String, report: SearchReport },
    Failed { job_id: String, error: String, report: Option<SearchReport> },
}

/// Per-pixel |a - b| stretched so the largest difference maps to 255.
pub fn difference_map(a: &RasterImage, b: &RasterImage) -> (RasterImage, u16) {
    let diffs: Vec<u16> = a.samples().iter().zip(b.samples()).map(|(&x, &y)| x.abs_diff(y)).collect();
    let max = diffs.iter().copied().max().unwrap_or(0);
    let scaled = diffs
        .iter()
        .map(|&d| if max == 0 { 0 } else { ((u32::from(d) * 255 + u32::from(max) / 2) / u32::from(max)) as u16 })
        .collect();
    let image = RasterImage::new(a.width(), a.height(), BitDepth::Eight, scaled).expect("same shape as the input");
    (image, max)
}

pub(crate) struct Jobs {
    store: Store,
    table: Mutex<BTreeMap<String, JobEntry>>,
    log: Mutex<File>,
    next_id: Mutex<u64>,
    workers: Arc<Semaphore>,
}

impl Jobs {
    /// Opens the store and replays the job log. Jobs that never finished are
    /// returned so the caller can queue them again.
    pub fn open(store: Store, workers: usize) -> Result<(Self, Vec<String>), ServiceError> {
        let log_path = store.log_path();
        let mut table = BTreeMap::new();
        let mut max_seq = 0;
        if log_path.exists() {
            let reader = BufReader::new(File::open(&log_path)?);
            for (n, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                // a torn final line from a crash is skipped
                let Ok(event) = serde_json::from_str::<LogEvent>(&line) else {
                    eprintln!("jobs.log line {}: skipping unreadable entry", n + 1);
                    continue;
                };
                match event {
                    LogEvent::Submitted { job_id, spec } => {
                        max_seq = max_seq.max(job_seq(&job_id));
                        table.insert(job_id, JobEntry::queued(spec));
                    }
                    LogEvent::Done { job_id, report } => {
                        if let Some(e) = table.get_mut(&job_id) {
                            match restore_artifacts(&store, &job_id, &e.spec) {
                                Ok(a) => {
                                    e.endpoint_probes = report.endpoint_probes.clone();
                                    e.history = report.history.clone();
                                    e.report = Some(report);
                                    e.artifacts = Some(a);
                                    e.state = JobState::Done;
                                }
                                Err(err) => {
                                    e.state = JobState::Failed;
                                    e.error = Some(format!("artifacts lost: {err}"));
                                }
                            }
                        }
                    }
                    LogEvent::Failed { job_id, error, report } => {
                        if let Some(e) = table.get_mut(&job_id) {
                            if let Some(r) = &report {
                                e.endpoint_probes = r.endpoint_probes.clone();
                                e.history = r.history.clone();
                            }
                            e.report = report;
                            e.error = Some(error);
                            e.state = JobState::Failed;
                        }
                    }
                }
            }
        }
        let pending = table
            .iter()
            .filter(|(_, e)| e.state == JobState::Queued)
            .map(|(id, _)| id.clone())
            .collect();
        let log = OpenOptions::new().create(true).append(true).open(&log_path)?;
        Ok((
            Jobs {
                store,
                table: Mutex::new(table),
                log: Mutex::new(log),
                next_id: Mutex::new(max_seq + 1),
                workers: Arc::new(Semaphore::new(workers.max(1))),
            },
            pending,
        ))
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    fn table(&self) -> MutexGuard<'_, BTreeMap<String, JobEntry>> {
        self.table.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn append(&self, event: &LogEvent) -> Result<(), ServiceError> {
        let mut line = serde_json::to_string(event).map_err(|e| ServiceError::Internal(e.to_string()))?;
        line.push('\n');
        let mut log = self.log.lock().unwrap_or_else(|e| e.into_inner());
        log.write_all(line.as_bytes())?;
        log.sync_data()?;
        Ok(())
    }

    /// Validates `spec`, records it and returns the new job id.
    pub fn submit(&self, spec: JobSpec) -> Result<String, ServiceError> {
        self.store.image_bytes(&spec.image_id)?;
        spec.prepare()?;
        let job_id = {
            let mut next = self.next_id.lock().unwrap_or_else(|e| e.into_inner());
            let id = format!("job-{:06}", *next);
            *next += 1;
            id
        };
        self.append(&LogEvent::Submitted {
            job_id: job_id.clone(),
            spec: spec.clone(),
        })?;
        self.table().insert(job_id.clone(), JobEntry::queued(spec));
        Ok(job_id)
    }

    pub fn view(&self, job_id: &str) -> Result<JobView, ServiceError> {
        let table = self.table();
        let e = table
            .get(job_id)
            .ok_or_else(|| ServiceError::NotFound(format!("job {job_id}")))?;
        Ok(JobView {
            job_id: job_id.to_string(),
            spec: e.spec.clone(),
            state: e.state,
            endpoint_probes: e.endpoint_probes.clone(),
            history: e.history.clone(),
            result: (e.state == JobState::Done).then(|| e.report.clone()).flatten(),
            error: e.error.clone(),
            max_difference: e.artifacts.as_ref().map(|a| a.max_difference),
        })
    }

    pub fn list(&self) -> Vec<(String, JobState)> {
        self.table().iter().map(|(id, e)| (id.clone(), e.state)).collect()
    }

    pub fn spec(&self, job_id: &str) -> Result<JobSpec, ServiceError> {
        Ok(self.view(job_id)?.spec)
    }

    pub fn artifacts(&self, job_id: &str) -> Result<Artifacts, ServiceError> {
        let table = self.table();
        let e = table
            .get(job_id)
            .ok_or_else(|| ServiceError::NotFound(format!("job {job_id}")))?;
        e.artifacts
            .clone()
            .ok_or_else(|| ServiceError::Conflict(format!("job {job_id} is {}", state_name(e.state))))
    }

    /// The report of a finished job, successful or not.
    pub fn report(&self, job_id: &str) -> Result<SearchReport, ServiceError> {
        let table = self.table();
        let e = table
            .get(job_id)
            .ok_or_else(|| ServiceError::NotFound(format!("job {job_id}")))?;
        match (&e.report, e.state) {
            (Some(r), JobState::Done | JobState::Failed) => Ok(r.clone()),
            _ => Err(ServiceError::Conflict(format!(
                "job {job_id} is {} and has no report",
                state_name(e.state)
            ))),
        }
    }

    pub fn blob(&self, job_id: &str) -> Result<Vec<u8>, ServiceError> {
        self.artifacts(job_id)?;
        self.store.blob(job_id)
    }

    /// Queues `job_id` on the worker pool. Must be called inside a Tokio runtime.
    pub fn spawn(self: &Arc<Self>, job_id: String) {
        let jobs = Arc::clone(self);
        tokio::spawn(async move {
            let Ok(_permit) = Arc::clone(&jobs.workers).acquire_owned().await else {
                return;
            };
            let worker = Arc::clone(&jobs);
            let id = job_id.clone();
            if tokio::task::spawn_blocking(move || worker.execute(&id)).await.is_err() {
                jobs.fail(&job_id, "worker panicked".into(), None);
            }
        });
    }

    fn set_state(&self, job_id: &str, state: JobState) {
        if let Some(e) = self.table().get_mut(job_id) {
            e.state = state;
        }
    }

    fn fail(&self, job_id: &str, error: String, report: Option<SearchReport>) {
        if let Err(e) = self.append(&LogEvent::Failed {
            job_id: job_id.to_string(),
            error: error.clone(),
            report: report.clone(),
        }) {
            eprintln!("{job_id}: cannot log failure: {e}");
        }
        if let Some(e) = self.table().get_mut(job_id) {
            e.report = report;
            e.error = Some(error);
            e.state = JobState::Failed;
        }
    }

    fn execute(&self, job_id: &str) {
        let Ok(spec) = self.spec(job_id) else { return };
        self.set_state(job_id, JobState::Running);
        if let Err(err) = self.run_search(job_id, &spec) {
            let message = err.to_string();
            self.fail(job_id, message, None);
        }
    }

    fn run_search(&self, job_id: &str, spec: &JobSpec) -> Result<(), ServiceError> {
        let image = self.store.image(&spec.image_id)?;
        let prepared = spec.prepare()?;
        let p = &prepared.pipeline;
        let observer = |kind: ProbeKind, probe: &Probe| {
            if let Some(e) = self.table().get_mut(job_id) {
                match kind {
                    ProbeKind::Endpoint => e.endpoint_probes.push(*probe),
                    ProbeKind::Iteration => e.history.push(*probe),
                }
            }
        };
        let mut search = Search::new(p.codec.as_ref(), p.metric.as_ref(), prepared.target.clone(), p.range)
            .method(prepared.method)
            .clamp(spec.clamp)
            .observer(&observer);
        if let Some(n) = spec.max_iters {
            search = search.max_iters(n);
        }
        let run = run_with_report(&search, &image);
        match run.outcome {
            Ok(result) => {
                self.store.put_blob(job_id, &result.blob.to_bytes())?;
                let (diff, max_difference) = difference_map(&image, &result.decoded);
                self.append(&LogEvent::Done {
                    job_id: job_id.to_string(),
                    report: run.report.clone(),
                })?;
                if let Some(e) = self.table().get_mut(job_id) {
                    e.endpoint_probes = run.report.endpoint_probes.clone();
                    e.history = run.report.history.clone();
                    e.report = Some(run.report);
                    e.artifacts = Some(Artifacts {
                        decoded: result.decoded,
                        diff,
                        max_difference,
                    });
                    e.state = JobState::Done;
                }
            }
            Err(err) => self.fail(job_id, err.to_string(), Some(run.report)),
        }
        Ok(())
    }
}

fn state_name(s: JobState) -> &'static str {
    match s {
        JobState::Queued => "queued",
        JobState::Running => "running",
        JobState::Done => "done",
        JobState::Failed => "failed",
    }
}

fn job_seq(job_id: &str) -> u64 {
    job_id.strip_prefix("job-").and_then(|n| n.parse().ok()).unwrap_or(0)
}

fn restore_artifacts(store: &Store, job_id: &str, spec: &JobSpec) -> Result<Artifacts, ServiceError> {
    let original = store.image(&spec.image_id)?;
    let blob = qpress::imagecore::CompressedBlob::from_bytes(&store.blob(job_id)?)
        .map_err(|e| ServiceError::Internal(e.to_string()))?;
    let prepared = spec.prepare()?;
    let decoded = prepared
        .pipeline
        .codec
        .decompress(&blob)
        .map_err(|e| ServiceError::Internal(e.to_string()))?;
    let (diff, max_difference) = difference_map(&original, &decoded);
    Ok(Artifacts {
        decoded,
        diff,
        max_difference,
    })
}
