//! HTTP API over the analysis pipeline with a file-backed store.
//!
//! Uploads are processed as background jobs. At most one job per applicant
//! runs at a time, and concurrent jobs are bounded by a worker semaphore.
//! Re-uploading bytes that already produced a report returns the finished
//! job without recomputation.

pub mod engine;
pub mod store;

use std::collections::{BTreeMap, BTreeSet};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use lori_core::pipeline::{content_hash, BoundarySpec, ModelIds, Stage, PIPELINE_VERSION, REPORT_SCHEMA};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tokio::sync::{OwnedSemaphorePermit, Semaphore};

pub use engine::{Engine, EngineConfig, EngineError, ExtractorChoice, GenerativeChoice};
pub use store::{ApplicantRow, JobRecord, JobState, LetterView, Store, StoreError, StoredApplicant};

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error("server error: {0}")]
    Serve(#[source] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub store: PathBuf,
    pub engine: EngineConfig,
    /// Upper bound on concurrently running jobs; at least one.
    pub workers: usize,
}

/// Shared state behind every handler.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    store: Store,
    engine: Engine,
    busy: Mutex<BTreeSet<String>>,
    permits: Arc<Semaphore>,
    workers: u32,
}

impl AppState {
    /// Opens the store and marks jobs left queued or running by a previous
    /// process as failed, since nothing will resume them.
    pub fn new(config: &ServiceConfig) -> Result<Self, ServiceError> {
        let store = Store::open(&config.store)?;
        for mut job in store.jobs()? {
            if matches!(job.state, JobState::Queued | JobState::Running) {
                job.state = JobState::Failed;
                job.error = Some("interrupted by service restart".into());
                store.put_job(&job)?;
            }
        }
        let workers = config.workers.clamp(1, Semaphore::MAX_PERMITS.min(u32::MAX as usize)) as u32;
        Ok(Self {
            inner: Arc::new(Inner {
                store,
                engine: Engine::load(&config.engine)?,
                busy: Mutex::new(BTreeSet::new()),
                permits: Arc::new(Semaphore::new(workers as usize)),
                workers,
            }),
        })
    }

    /// Waits for running jobs to finish and holds every worker slot until the
    /// returned permit is dropped. Uploads are still accepted and queue.
    pub async fn pause_workers(&self) -> OwnedSemaphorePermit {
        self.inner
            .permits
            .clone()
            .acquire_many_owned(self.inner.workers)
            .await
            .expect("worker semaphore is never closed")
    }

    pub fn store(&self) -> &Store {
        &self.inner.store
    }

    pub fn engine(&self) -> &Engine {
        &self.inner.engine
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/applicants", get(list_applicants))
        .route("/applicants/{applicant_id}/letters", post(upload))
        .route("/applicants/{applicant_id}/report", get(report))
        .route("/letters/{letter_id}", get(letter))
        .route("/jobs/{job_id}", get(job))
        .with_state(state)
}

/// Serves until ctrl-c.
pub async fn serve(config: ServiceConfig, addr: SocketAddr) -> Result<(), ServiceError> {
    let state = AppState::new(&config)?;
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|source| ServiceError::Bind { addr, source })?;
    tracing::info!(%addr, store = %config.store.display(), "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(ServiceError::Serve)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(ErrorBody { error: message.into() })).into_response()
}

fn internal(e: impl std::fmt::Display) -> Response {
    tracing::error!(error = %e, "store failure");
    error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
}

fn json_bytes(bytes: Vec<u8>) -> Response {
    (
        [(header::CONTENT_TYPE, HeaderValue::from_static("application/json"))],
        bytes,
    )
        .into_response()
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub pipeline_version: String,
    pub report_schema: String,
    pub models: ModelIds,
}

async fn health(State(state): State<AppState>) -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        pipeline_version: PIPELINE_VERSION.into(),
        report_schema: REPORT_SCHEMA.into(),
        models: state.engine().model_ids(),
    })
}

async fn list_applicants(State(state): State<AppState>) -> Response {
    match state.store().applicant_rows() {
        Ok(rows) => Json(rows).into_response(),
        Err(e) => internal(e),
    }
}

async fn report(State(state): State<AppState>, Path(applicant_id): Path<String>) -> Response {
    match state.store().report_bytes(&applicant_id) {
        Ok(Some(b)) => json_bytes(b),
        Ok(None) => error(StatusCode::NOT_FOUND, format!("no report for applicant {applicant_id:?}")),
        Err(e) => internal(e),
    }
}

async fn letter(State(state): State<AppState>, Path(letter_id): Path<String>) -> Response {
    match state.store().letter_bytes(&letter_id) {
        Ok(Some(b)) => json_bytes(b),
        Ok(None) => error(StatusCode::NOT_FOUND, format!("no letter {letter_id:?}")),
        Err(e) => internal(e),
    }
}

async fn job(State(state): State<AppState>, Path(job_id): Path<String>) -> Response {
    match state.store().job(&job_id) {
        Ok(Some(j)) => Json(j).into_response(),
        Ok(None) => error(StatusCode::NOT_FOUND, format!("no job {job_id:?}")),
        Err(e) => internal(e),
    }
}

/// Job id derived from applicant, content, boundary spec and attempt number.
/// A retry after failure takes the next attempt, so records never move
/// backwards out of a terminal state.
pub fn job_id(applicant_id: &str, content_hash: &str, boundary: &BoundarySpec, attempt: u32) -> String {
    let mut h = Sha256::new();
    for part in [applicant_id, content_hash, &boundary.to_string()] {
        h.update(part.as_bytes());
        h.update([0]);
    }
    format!("job-{}-{attempt}", &hex::encode(h.finalize())[..20])
}

#[derive(Debug, Deserialize)]
struct UploadQuery {
    boundary: Option<String>,
}

/// Removes the applicant from the busy set when the job ends, even on panic.
struct BusyGuard {
    state: AppState,
    applicant_id: String,
}

impl Drop for BusyGuard {
    fn drop(&mut self) {
        self.state
            .inner
            .busy
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .remove(&self.applicant_id);
    }
}

async fn upload(
    State(state): State<AppState>,
    Path(applicant_id): Path<String>,
    Query(q): Query<UploadQuery>,
    body: Bytes,
) -> Response {
    if applicant_id.trim().is_empty() {
        return error(StatusCode::BAD_REQUEST, "applicant id must not be blank");
    }
    if body.is_empty() {
        return error(StatusCode::BAD_REQUEST, "request body is empty");
    }
    let boundary: BoundarySpec = match q.boundary.as_deref().map(str::parse).transpose() {
        Ok(b) => b.unwrap_or_default(),
        Err(e) => return error(StatusCode::BAD_REQUEST, e.to_string()),
    };
    let hash = content_hash(&body);

    let (id, guard) = {
        let mut busy = state.inner.busy.lock().unwrap_or_else(|p| p.into_inner());
        match state.store().applicant(&applicant_id) {
            Ok(Some(a)) if a.content_hash == hash && a.boundary == boundary.to_string() => {
                return match state.store().job(&a.job_id) {
                    Ok(Some(done)) => (StatusCode::OK, Json(done)).into_response(),
                    Ok(None) => internal(format!("job {} missing from store", a.job_id)),
                    Err(e) => internal(e),
                };
            }
            Ok(_) => {}
            Err(e) => return internal(e),
        }
        if !busy.insert(applicant_id.clone()) {
            return error(
                StatusCode::CONFLICT,
                format!("applicant {applicant_id:?} already has a job in progress"),
            );
        }
        let mut attempt = 0;
        let id = loop {
            let id = job_id(&applicant_id, &hash, &boundary, attempt);
            match state.store().job(&id) {
                Ok(None) => break id,
                Ok(Some(_)) => attempt += 1,
                Err(e) => {
                    busy.remove(&applicant_id);
                    return internal(e);
                }
            }
        };
        // Constructed after the last early return; its drop takes the lock.
        let guard = BusyGuard {
            state: state.clone(),
            applicant_id: applicant_id.clone(),
        };
        (id, guard)
    };

    let record = JobRecord {
        job_id: id.clone(),
        applicant_id: applicant_id.clone(),
        content_hash: hash,
        state: JobState::Queued,
        stage: Stage::Ingest,
        error: None,
    };
    if let Err(e) = state.store().put_job(&record) {
        return internal(e);
    }
    let task_state = state.clone();
    let task_record = record.clone();
    tokio::spawn(async move {
        let _guard = guard;
        let Ok(_permit) = task_state.inner.permits.acquire().await else {
            return;
        };
        let s = task_state.clone();
        let mut rec = task_record.clone();
        let outcome = tokio::task::spawn_blocking(move || run_job(&s, &mut rec, &body, &boundary)).await;
        if let Err(e) = outcome {
            let mut failed = task_record;
            failed.state = JobState::Failed;
            failed.error = Some(format!("job aborted: {e}"));
            let _ = task_state.store().put_job(&failed);
        }
    });
    let mut resp = (StatusCode::ACCEPTED, Json(record)).into_response();
    if let Ok(v) = HeaderValue::from_str(&format!("/jobs/{id}")) {
        resp.headers_mut().insert(header::LOCATION, v);
    }
    resp
}

/// Runs one upload to completion, recording progress and the final state.
fn run_job(state: &AppState, rec: &mut JobRecord, bytes: &[u8], boundary: &BoundarySpec) {
    let store = state.store();
    let fail = |rec: &mut JobRecord, stage: Stage, msg: String| {
        tracing::warn!(job = %rec.job_id, %stage, error = %msg, "job failed");
        rec.state = JobState::Failed;
        rec.stage = stage;
        rec.error = Some(msg);
        let _ = store.put_job(rec);
    };
    rec.state = JobState::Running;
    rec.stage = Stage::Ingest;
    let _ = store.put_job(rec);

    let engine = state.engine();
    let doc = match engine.ingest(bytes, &rec.applicant_id, boundary) {
        Ok(d) => d,
        Err(e) => return fail(rec, e.stage(), e.to_string()),
    };
    rec.stage = Stage::Classify;
    let _ = store.put_job(rec);
    let built = match engine.report(&doc) {
        Ok(b) => b,
        Err(e) => return fail(rec, e.stage(), e.to_string()),
    };

    let persist = || -> Result<(), String> {
        let highlights: BTreeMap<&str, _> = built
            .analyses
            .iter()
            .map(|a| (a.letter_id.as_str(), a.highlights.clone()))
            .collect();
        for l in &doc.letters {
            store
                .put_letter(&LetterView {
                    letter_id: l.letter_id.clone(),
                    applicant_id: l.applicant_id.clone(),
                    raw_text: l.raw_text.clone(),
                    sentences: doc.letter_sentences(l).into_iter().cloned().collect(),
                    highlights: highlights.get(l.letter_id.as_str()).cloned().unwrap_or_default(),
                })
                .map_err(|e| e.to_string())?;
        }
        let mut traces = Vec::new();
        lori_core::pipeline::write_traces(&mut traces, &built).map_err(|e| e.to_string())?;
        store.put_trace(&rec.job_id, &traces).map_err(|e| e.to_string())?;
        let stored = StoredApplicant {
            applicant_id: rec.applicant_id.clone(),
            content_hash: doc.content_hash.clone(),
            job_id: rec.job_id.clone(),
            boundary: boundary.to_string(),
            letter_ids: doc.letters.iter().map(|l| l.letter_id.clone()).collect(),
        };
        store.put_report(&stored, &built.report).map_err(|e| e.to_string())
    };
    if let Err(msg) = persist() {
        return fail(rec, Stage::Summarize, format!("cannot store results: {msg}"));
    }
    rec.state = JobState::Done;
    rec.stage = Stage::Summarize;
    rec.error = None;
    let _ = store.put_job(rec);
    tracing::info!(job = %rec.job_id, applicant = %rec.applicant_id, "job done");
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn job_ids_depend_on_every_key_part() {
        let a = job_id("a", "sha256:00", &BoundarySpec::PageBreaks, 0);
        assert_eq!(a, job_id("a", "sha256:00", &BoundarySpec::PageBreaks, 0));
        assert_ne!(a, job_id("b", "sha256:00", &BoundarySpec::PageBreaks, 0));
        assert_ne!(a, job_id("a", "sha256:01", &BoundarySpec::PageBreaks, 0));
        assert_ne!(a, job_id("a", "sha256:00", &BoundarySpec::Single, 0));
        assert_ne!(a, job_id("a", "sha256:00", &BoundarySpec::PageBreaks, 1));
        assert!(a.starts_with("job-") && a.ends_with("-0"));
    }

    #[test]
    fn restart_fails_unfinished_jobs() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let mut job = JobRecord {
            job_id: "job-1".into(),
            applicant_id: "a".into(),
            content_hash: "sha256:00".into(),
            state: JobState::Running,
            stage: Stage::Extract,
            error: None,
        };
        store.put_job(&job).unwrap();
        job.job_id = "job-2".into();
        job.state = JobState::Done;
        store.put_job(&job).unwrap();
        let state = AppState::new(&ServiceConfig {
            store: dir.path().into(),
            engine: EngineConfig::default(),
            workers: 1,
        })
        .unwrap();
        assert_eq!(state.store().job("job-1").unwrap().unwrap().state, JobState::Failed);
        assert_eq!(state.store().job("job-2").unwrap().unwrap().state, JobState::Done);
    }
}
