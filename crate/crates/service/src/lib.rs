//! HTTP job service: image upload, target-quality search jobs with live
//! progress, and artifact download.
//!
//! | Method | Path | Body / result |
//! |---|---|---|
//! | POST | `/images?format=pgm` | PGM bytes → `ImageInfo` |
//! | POST | `/images?format=raw&width=..&height=..&bands=..&bit_depth=..[&byte_order=..]` | RAW bytes → `{"bands": [ImageInfo]}` |
//! | GET | `/images/{id}` | stored PGM |
//! | POST | `/jobs` | `JobSpec` JSON → `{"job_id": ..}` (202) |
//! | GET | `/jobs` | job ids and states |
//! | GET | `/jobs/{id}` | `JobView` JSON |
//! | GET | `/jobs/{id}/artifacts/{original,decoded,diff,report,blob}` | bytes |
//! | POST | `/estimate` | `EstimateRequest` JSON → metric span |
//! | GET | `/codecs`, `/metrics` | built-in names |

mod jobs;
pub mod store;

pub use jobs::{difference_map, JobSpec, JobState, JobView, Pipeline};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, HeaderName, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use jobs::Jobs;
use qpress::codecs::resolve;
use qpress::imagecore::{load_pgm, raw_io, store_pgm, BitDepth, ByteOrder, RawDescriptor};
use qpress::metrics::MetricId;
use qpress::search::estimate_range;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use std::sync::Arc;
use store::Store;
use thiserror::Error;

pub const MAX_UPLOAD_BYTES: usize = 512 * 1024 * 1024;
pub const MAX_DIFFERENCE_HEADER: &str = "x-max-difference";
const PGM_TYPE: &str = "image/x-portable-graymap";

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("not found: {0}")]
    NotFound(String),
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Internal(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ServiceError {
    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::Invalid(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::Conflict(_) => StatusCode::CONFLICT,
            ServiceError::Internal(_) | ServiceError::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({ "error": self.to_string() });
        (self.status(), Json(body)).into_response()
    }
}

#[derive(Debug, Clone)]
pub struct Config {
    pub data_dir: PathBuf,
    pub workers: usize,
}

/// Shared service state; cheap to clone.
#[derive(Clone)]
pub struct Service {
    jobs: Arc<Jobs>,
}

impl Service {
    /// Opens the data directory and re-queues jobs left unfinished by a
    /// previous process. Must be called inside a Tokio runtime.
    pub fn open(config: &Config) -> Result<Self, ServiceError> {
        let store = Store::open(&config.data_dir)?;
        let (jobs, pending) = Jobs::open(store, config.workers)?;
        let jobs = Arc::new(jobs);
        for id in pending {
            jobs.spawn(id);
        }
        Ok(Service { jobs })
    }

    pub fn router(&self) -> Router {
        Router::new()
            .route("/images", post(upload_image))
            .route("/images/{id}", get(download_image))
            .route("/jobs", post(submit_job).get(list_jobs))
            .route("/jobs/{id}", get(poll_job))
            .route("/jobs/{id}/artifacts/{which}", get(fetch_artifact))
            .route("/estimate", post(estimate))
            .route("/codecs", get(list_codecs))
            .route("/metrics", get(list_metrics))
            .layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES))
            .layer(axum::middleware::map_response(allow_any_origin))
            .with_state(self.clone())
    }

    pub fn submit(&self, spec: JobSpec) -> Result<String, ServiceError> {
        let id = self.jobs.submit(spec)?;
        self.jobs.spawn(id.clone());
        Ok(id)
    }

    pub fn poll(&self, job_id: &str) -> Result<JobView, ServiceError> {
        self.jobs.view(job_id)
    }
}

async fn allow_any_origin(mut response: Response) -> Response {
    response
        .headers_mut()
        .insert(header::ACCESS_CONTROL_ALLOW_ORIGIN, HeaderValue::from_static("*"));
    response
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ServiceError> + Send + 'static,
) -> Result<T, ServiceError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Internal(format!("worker failed: {e}")))?
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageInfo {
    pub image_id: String,
    pub width: usize,
    pub height: usize,
    pub bit_depth: u32,
    /// False when the same content was already stored.
    pub created: bool,
}

#[derive(Debug, Default, Deserialize)]
pub struct UploadQuery {
    pub format: Option<String>,
    pub width: Option<usize>,
    pub height: Option<usize>,
    pub bands: Option<usize>,
    pub bit_depth: Option<u32>,
    pub byte_order: Option<String>,
}

impl UploadQuery {
    fn descriptor(&self) -> Result<RawDescriptor, ServiceError> {
        let need = |v: Option<usize>, name: &str| {
            v.ok_or_else(|| ServiceError::BadRequest(format!("raw upload needs `{name}`")))
        };
        let bit_depth = BitDepth::from_bits(
            self.bit_depth
                .ok_or_else(|| ServiceError::BadRequest("raw upload needs `bit_depth`".into()))?,
        )
        .map_err(|e| ServiceError::BadRequest(e.to_string()))?;
        let byte_order = match self.byte_order.as_deref() {
            None | Some("little_endian") | Some("le") => ByteOrder::LittleEndian,
            Some("big_endian") | Some("be") => ByteOrder::BigEndian,
            Some(other) => return Err(ServiceError::BadRequest(format!("unknown byte_order `{other}`"))),
        };
        Ok(RawDescriptor {
            width: need(self.width, "width")?,
            height: need(self.height, "height")?,
            bands: need(self.bands.or(Some(1)), "bands")?,
            bit_depth,
            byte_order,
            band_labels: None,
        })
    }
}

async fn upload_image(
    State(svc): State<Service>,
    Query(q): Query<UploadQuery>,
    body: Bytes,
) -> Result<Response, ServiceError> {
    let format = q.format.clone().unwrap_or_else(|| "pgm".into());
    blocking(move || {
        let images = match format.as_str() {
            "pgm" => vec![load_pgm(&body).map_err(|e| ServiceError::BadRequest(format!("malformed PGM: {e}")))?],
            "raw" => {
                let desc = q.descriptor()?;
                let cube = raw_io(&body, &desc).map_err(|e| ServiceError::BadRequest(format!("malformed RAW: {e}")))?;
                cube.bands().to_vec()
            }
            other => return Err(ServiceError::BadRequest(format!("unknown format `{other}`"))),
        };
        let mut infos = Vec::with_capacity(images.len());
        for image in &images {
            let (image_id, created) = svc.jobs.store().put_image(image)?;
            infos.push(ImageInfo {
                image_id,
                width: image.width(),
                height: image.height(),
                bit_depth: image.bit_depth().bits(),
                created,
            });
        }
        let status = if infos.iter().any(|i| i.created) {
            StatusCode::CREATED
        } else {
            StatusCode::OK
        };
        Ok(if format == "pgm" {
            (status, Json(infos.remove(0))).into_response()
        } else {
            (status, Json(serde_json::json!({ "bands": infos }))).into_response()
        })
    })
    .await
}

fn pgm_response(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, PGM_TYPE)], bytes).into_response()
}

async fn download_image(State(svc): State<Service>, Path(id): Path<String>) -> Result<Response, ServiceError> {
    Ok(pgm_response(svc.jobs.store().image_bytes(&id)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Submitted {
    pub job_id: String,
}

async fn submit_job(State(svc): State<Service>, Json(spec): Json<JobSpec>) -> Result<Response, ServiceError> {
    let job_id = svc.submit(spec)?;
    Ok((StatusCode::ACCEPTED, Json(Submitted { job_id })).into_response())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobSummary {
    pub job_id: String,
    pub state: JobState,
}

async fn list_jobs(State(svc): State<Service>) -> Json<Vec<JobSummary>> {
    Json(
        svc.jobs
            .list()
            .into_iter()
            .map(|(job_id, state)| JobSummary { job_id, state })
            .collect(),
    )
}

async fn poll_job(State(svc): State<Service>, Path(id): Path<String>) -> Result<Json<JobView>, ServiceError> {
    Ok(Json(svc.poll(&id)?))
}

async fn fetch_artifact(
    State(svc): State<Service>,
    Path((id, which)): Path<(String, String)>,
) -> Result<Response, ServiceError> {
    let jobs = &svc.jobs;
    match which.as_str() {
        "original" => {
            let spec = jobs.spec(&id)?;
            Ok(pgm_response(jobs.store().image_bytes(&spec.image_id)?))
        }
        "decoded" => Ok(pgm_response(store_pgm(&jobs.artifacts(&id)?.decoded))),
        "diff" => {
            let a = jobs.artifacts(&id)?;
            let mut response = pgm_response(store_pgm(&a.diff));
            response.headers_mut().insert(
                HeaderName::from_static(MAX_DIFFERENCE_HEADER),
                HeaderValue::from(a.max_difference),
            );
            Ok(response)
        }
        "report" => Ok(Json(jobs.report(&id)?).into_response()),
        "blob" => Ok(([(header::CONTENT_TYPE, "application/octet-stream")], jobs.blob(&id)?).into_response()),
        other => Err(ServiceError::NotFound(format!("artifact `{other}`"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRequest {
    pub image_id: String,
    #[serde(default = "default_codec")]
    pub codec: String,
    #[serde(default = "default_metric")]
    pub metric: String,
    #[serde(default)]
    pub param_min: Option<f64>,
    #[serde(default)]
    pub param_max: Option<f64>,
}

fn default_codec() -> String {
    "dct".into()
}

fn default_metric() -> String {
    "psnr".into()
}

async fn estimate(State(svc): State<Service>, Json(req): Json<EstimateRequest>) -> Result<Response, ServiceError> {
    blocking(move || {
        let image = svc.jobs.store().image(&req.image_id)?;
        let p = Pipeline::resolve(&req.codec, &req.metric, req.param_min, req.param_max)?;
        let span = estimate_range(&image, p.codec.as_ref(), p.metric.as_ref(), p.range)
            .map_err(|e| ServiceError::Invalid(e.to_string()))?;
        Ok(Json(span).into_response())
    })
    .await
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodecInfo {
    pub codec_id: String,
    pub param_kind: String,
    pub param_min: f64,
    pub param_max: f64,
}

async fn list_codecs() -> Result<Json<Vec<CodecInfo>>, ServiceError> {
    let mut out = Vec::new();
    for spec in ["dct", "dct-csf"] {
        let codec = resolve(spec).map_err(|e| ServiceError::Internal(e.to_string()))?;
        let d = codec.descriptor();
        out.push(CodecInfo {
            codec_id: d.codec_id.clone(),
            param_kind: d.param_kind.as_str().to_string(),
            param_min: d.default_range.min(),
            param_max: d.default_range.max(),
        });
    }
    Ok(Json(out))
}

async fn list_metrics() -> Json<Vec<&'static str>> {
    Json(MetricId::ALL.iter().map(|m| m.as_str()).collect())
}
