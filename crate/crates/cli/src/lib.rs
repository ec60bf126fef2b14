//! HTTP service and shared helpers for the `decor` binary.

use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, Mutex};

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;

use decor_core::llm::{ChatClient, HttpChatClient, RuleBasedStub, ScriptedStub, ENV_API_KEY, ENV_MODEL};
use decor_core::pipeline::{export_svg, EditRequest, Engine, ErrorClass, JobRequest, JobState, JobStatus, JobStore, PipelineError};
use decor_core::retrieval::Catalog;

/// Where stage replies come from.
#[derive(Debug, Clone, Default)]
pub struct BackendOpts {
    /// Directory of scripted replies, served in file-name order.
    pub stub_dir: Option<String>,
    /// OpenAI-compatible endpoint.
    pub endpoint: Option<String>,
    pub catalog: Option<String>,
}

/// Builds an engine: scripted stub, HTTP backend, or the offline rule-based
/// stub when neither is given.
pub fn build_engine(opts: &BackendOpts) -> Result<Engine, PipelineError> {
    let client: Arc<dyn ChatClient> = match (&opts.stub_dir, &opts.endpoint) {
        (Some(dir), _) => Arc::new(ScriptedStub::from_dir(dir).map_err(|e| PipelineError::InvalidRequest(e.to_string()))?),
        (None, Some(url)) => {
            let mut c = HttpChatClient::new(url.clone(), std::env::var(ENV_API_KEY).ok());
            if let Ok(m) = std::env::var(ENV_MODEL) {
                c = c.with_model(m);
            }
            Arc::new(c)
        }
        (None, None) => Arc::new(RuleBasedStub),
    };
    let mut engine = Engine::new(client);
    if let Some(path) = &opts.catalog {
        engine = engine.with_catalog(Catalog::load(Path::new(path), None)?);
    }
    Ok(engine)
}

pub struct AppState {
    pub engine: Arc<Engine>,
    pub store: JobStore,
    locks: Mutex<HashMap<String, Arc<tokio::sync::RwLock<()>>>>,
}

impl AppState {
    pub fn new(engine: Engine, store: JobStore) -> Arc<Self> {
        Arc::new(Self { engine: Arc::new(engine), store, locks: Mutex::new(HashMap::new()) })
    }

    fn lock_for(&self, id: &str) -> Arc<tokio::sync::RwLock<()>> {
        self.locks.lock().expect("lock table poisoned").entry(id.to_string()).or_default().clone()
    }
}

pub struct ApiError(PipelineError);

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        Self(e)
    }
}

pub fn status_for(e: &PipelineError) -> StatusCode {
    match e.class() {
        ErrorClass::Validation => StatusCode::UNPROCESSABLE_ENTITY,
        ErrorClass::Infeasible => StatusCode::CONFLICT,
        ErrorClass::Backend => StatusCode::BAD_GATEWAY,
        ErrorClass::NotFound => StatusCode::NOT_FOUND,
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let class = match self.0.class() {
            ErrorClass::Validation => "validation",
            ErrorClass::Infeasible => "infeasible",
            ErrorClass::Backend => "backend",
            ErrorClass::NotFound => "not_found",
        };
        let body = json!({ "error": self.0.to_string(), "class": class, "exit_code": self.0.exit_code() });
        (status_for(&self.0), Json(body)).into_response()
    }
}

fn join_error(e: tokio::task::JoinError) -> ApiError {
    ApiError(PipelineError::Store(format!("worker failed: {e}")))
}

/// Runs a job to completion and records its outcome in the store.
pub fn run_job(engine: &Engine, store: &JobStore, id: &str, req: &JobRequest) -> Result<(), PipelineError> {
    let mut status = JobStatus { id: id.to_string(), state: JobState::Running, error: None, exit_code: None, revision: None };
    store.set_status(&status)?;
    let (result, transcripts) = engine.decorate_traced(req);
    store.append_transcripts(id, &transcripts)?;
    match result {
        Ok(scene) => {
            store.save_scene(id, &scene)?;
            status.state = JobState::Done;
            status.revision = Some(scene.revision);
        }
        Err(e) => {
            log::warn!("job {id} failed: {e}");
            status.state = JobState::Failed;
            status.exit_code = Some(e.exit_code());
            status.error = Some(e.to_string());
        }
    }
    store.set_status(&status)
}

#[derive(Debug, Deserialize)]
struct JobQuery {
    #[serde(default)]
    wait: bool,
}

async fn create_job(
    State(app): State<Arc<AppState>>,
    Query(q): Query<JobQuery>,
    Json(req): Json<JobRequest>,
) -> Result<Response, ApiError> {
    req.validate()?;
    let id = app.store.create(&req)?;
    let job_id = id.clone();
    let worker = app.clone();
    let task = tokio::task::spawn_blocking(move || {
        let lock = worker.lock_for(&job_id);
        let _guard = lock.blocking_write();
        if let Err(e) = run_job(&worker.engine, &worker.store, &job_id, &req) {
            log::error!("job {job_id}: {e}");
        }
    });
    if q.wait {
        task.await.map_err(join_error)?;
        let status = app.store.status(&id)?;
        return Ok((StatusCode::CREATED, Json(json!({ "id": id, "status": status }))).into_response());
    }
    Ok((StatusCode::ACCEPTED, Json(json!({ "id": id }))).into_response())
}

async fn get_job(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let lock = app.lock_for(&id);
    let _guard = lock.read().await;
    let status = app.store.status(&id)?;
    let scene = if status.state == JobState::Done { Some(app.store.scene(&id)?) } else { None };
    Ok(Json(json!({ "status": status, "scene": scene })).into_response())
}

async fn post_edit(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Json(req): Json<EditRequest>,
) -> Result<Response, ApiError> {
    let lock = app.lock_for(&id);
    let guard = lock.write_owned().await;
    let worker = app.clone();
    let next = tokio::task::spawn_blocking(move || -> Result<_, PipelineError> {
        let _guard = guard;
        let scene = worker.store.scene(&id)?;
        let next = worker.engine.edit(&scene, &req)?;
        worker.store.append_transcripts(&id, &next.provenance.transcripts[scene.provenance.transcripts.len()..])?;
        worker.store.save_scene(&id, &next)?;
        let mut status = worker.store.status(&id)?;
        status.revision = Some(next.revision);
        worker.store.set_status(&status)?;
        Ok(next)
    })
    .await
    .map_err(join_error)??;
    Ok(Json(next).into_response())
}

#[derive(Debug, Deserialize)]
struct SvgQuery {
    #[serde(default)]
    surface: usize,
}

async fn get_svg(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<SvgQuery>,
) -> Result<Response, ApiError> {
    let lock = app.lock_for(&id);
    let _guard = lock.read().await;
    let scene = app.store.scene(&id)?;
    let svg = export_svg(&scene, q.surface)?;
    Ok(([(header::CONTENT_TYPE, "image/svg+xml")], svg).into_response())
}

async fn get_metrics(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let lock = app.lock_for(&id);
    let _guard = lock.read().await;
    Ok(Json(app.store.metrics(&id)?).into_response())
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/jobs", post(create_job))
        .route("/jobs/{id}", get(get_job))
        .route("/scenes/{id}/edits", post(post_edit))
        .route("/scenes/{id}/svg", get(get_svg))
        .route("/scenes/{id}/metrics", get(get_metrics))
        .with_state(state)
}
