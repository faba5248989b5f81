//! REST service over the run store.
//!
//! | method | path | |
//! |---|---|---|
//! | GET | `/health` | liveness and queue depth |
//! | GET | `/defaults?mode=STEREO` | default configuration |
//! | GET | `/schema` | JSON Schema of the configuration |
//! | POST | `/runs` | queue a run, `202 {run_id}` |
//! | GET | `/runs?limit=&offset=` | records in creation order |
//! | GET | `/runs/{id}` | one record |
//! | GET | `/runs/{id}/panels/{name}` | PNG, `f32` binary or sidecar JSON by `Accept` |
//! | POST | `/compare` | `{master_id?, run_ids}` to a comparison bundle |
//! | GET | `/comparisons/{id}` | comparison summary |
//! | GET | `/comparisons/{id}/panels/{name}` | difference panels |

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use percept_core::{RunConfig, RunMode};
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::Semaphore;

use crate::error::{Result, ServiceError};
use crate::export::{self, COMPARISON_FILE, PANEL_DIR, STEREO_FILE, STEREO_PNG};
use crate::jobs::{self, STEREO_PANEL};
use crate::schema::{config_from_value, config_schema};
use crate::store::{check_id, RunRecord, RunStatus, Store};

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.http_status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        if status.is_server_error() {
            log::error!("{self}");
        }
        (status, Json(self.body())).into_response()
    }
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    /// Runs executed at once.
    pub workers: usize,
    /// Runs queued or running before new ones are refused.
    pub queue_capacity: usize,
}

#[derive(Clone)]
pub struct AppState {
    store: Arc<Store>,
    workers: Arc<Semaphore>,
    in_flight: Arc<AtomicUsize>,
    capacity: usize,
}

impl AppState {
    pub fn new(config: &ServiceConfig) -> Result<Self> {
        Ok(Self {
            store: Arc::new(Store::open(&config.data_dir)?),
            workers: Arc::new(Semaphore::new(config.workers.max(1))),
            in_flight: Arc::new(AtomicUsize::new(0)),
            capacity: config.queue_capacity.max(1),
        })
    }

    pub fn store(&self) -> &Store {
        &self.store
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/defaults", get(defaults))
        .route("/schema", get(schema))
        .route("/runs", post(create_run).get(list_runs))
        .route("/runs/{id}", get(get_run))
        .route("/runs/{id}/panels/{name}", get(get_run_panel))
        .route("/compare", post(create_comparison))
        .route("/comparisons/{id}", get(get_comparison))
        .route("/comparisons/{id}/panels/{name}", get(get_comparison_panel))
        .with_state(state)
}

pub async fn serve(config: ServiceConfig, addr: SocketAddr) -> Result<()> {
    let state = AppState::new(&config)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!(
        "listening on {} with {} workers, data in {}",
        listener.local_addr()?,
        config.workers,
        config.data_dir.display()
    );
    axum::serve(listener, router(state)).await?;
    Ok(())
}

async fn health(State(s): State<AppState>) -> Json<Value> {
    Json(json!({
        "status": "ok",
        "version": env!("CARGO_PKG_VERSION"),
        "in_flight": s.in_flight.load(Ordering::SeqCst),
        "capacity": s.capacity,
    }))
}

#[derive(Deserialize)]
struct DefaultsQuery {
    mode: Option<RunMode>,
}

async fn defaults(Query(q): Query<DefaultsQuery>) -> Json<RunConfig> {
    Json(match q.mode {
        Some(RunMode::Stereo) => RunConfig::stereo_default(),
        _ => RunConfig::default(),
    })
}

async fn schema() -> Json<Value> {
    Json(config_schema())
}

fn parse_body<T: serde::de::DeserializeOwned>(body: &Bytes) -> Result<T> {
    serde_json::from_slice(body).map_err(|e| ServiceError::Schema(format!("invalid request body: {e}")))
}

async fn create_run(State(s): State<AppState>, body: Bytes) -> Result<(StatusCode, Json<Value>)> {
    let posted: Value = parse_body(&body)?;
    let config = config_from_value(posted.clone())?;
    config.validate()?;
    let run_id = match &config.id {
        Some(id) => {
            check_id(id)?;
            id.clone()
        }
        None => uuid::Uuid::new_v4().to_string(),
    };

    if s.in_flight.fetch_add(1, Ordering::SeqCst) >= s.capacity {
        s.in_flight.fetch_sub(1, Ordering::SeqCst);
        return Err(ServiceError::Capacity(format!("{} runs are already queued or running", s.capacity)));
    }
    let record = match s.store.create(RunRecord::queued(run_id.clone(), config.mode, posted)) {
        Ok(r) => r,
        Err(e) => {
            s.in_flight.fetch_sub(1, Ordering::SeqCst);
            return Err(e);
        }
    };
    tokio::spawn(run_job(s.clone(), record.run_id, config));
    Ok((StatusCode::ACCEPTED, Json(json!({ "run_id": run_id, "status": RunStatus::Queued }))))
}

async fn run_job(s: AppState, id: String, config: RunConfig) {
    let permit = s.workers.clone().acquire_owned().await;
    let result = match permit {
        Ok(_permit) => execute_job(&s, &id, config).await,
        Err(e) => Err(ServiceError::Internal(e.to_string())),
    };
    if let Err(e) = result {
        let body = e.body();
        let failed = s.store.transition(&id, RunStatus::Failed, |r| r.error = Some(body));
        if let Err(e) = failed {
            log::error!("run {id}: could not record failure: {e}");
        }
    }
    s.in_flight.fetch_sub(1, Ordering::SeqCst);
}

async fn execute_job(s: &AppState, id: &str, config: RunConfig) -> Result<()> {
    s.store.transition(id, RunStatus::Running, |_| {})?;
    let dir = s.store.run_dir(id);
    let outcome = tokio::task::spawn_blocking(move || jobs::run_to_dir(&config, &dir))
        .await
        .map_err(|e| ServiceError::Internal(format!("worker stopped: {e}")))??;
    let location = format!("runs/{id}");
    s.store.transition(id, RunStatus::Done, |r| {
        r.result_location = Some(location);
        r.metrics = outcome.metrics();
        r.report = outcome.report().cloned();
        r.panels = outcome.panel_names();
    })?;
    Ok(())
}

#[derive(Deserialize)]
struct Page {
    limit: Option<usize>,
    offset: Option<usize>,
}

async fn list_runs(State(s): State<AppState>, Query(p): Query<Page>) -> Json<Value> {
    let (limit, offset) = (p.limit.unwrap_or(50).min(1000), p.offset.unwrap_or(0));
    let (total, runs) = s.store.list(limit, offset);
    Json(json!({ "total": total, "limit": limit, "offset": offset, "runs": runs }))
}

fn find_run(s: &AppState, id: &str) -> Result<RunRecord> {
    s.store.get(id).ok_or_else(|| ServiceError::NotFound(format!("unknown run {id}")))
}

async fn get_run(State(s): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Json<RunRecord>> {
    find_run(&s, &id).map(Json)
}

/// Representation chosen from an `Accept` header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PanelFormat {
    Png,
    Binary,
    Json,
}

impl PanelFormat {
    /// PNG for `image/png`, sidecar JSON for `application/json`, the `f32`
    /// binary otherwise.
    pub fn from_accept(headers: &HeaderMap) -> Self {
        let accept = headers
            .get(header::ACCEPT)
            .and_then(|v| v.to_str().ok())
            .unwrap_or("")
            .to_ascii_lowercase();
        if accept.contains("image/png") {
            PanelFormat::Png
        } else if accept.contains("application/json") {
            PanelFormat::Json
        } else {
            PanelFormat::Binary
        }
    }
}

fn file_response(path: &Path, content_type: &'static str) -> Result<Response> {
    match std::fs::read(path) {
        Ok(bytes) => Ok(([(header::CONTENT_TYPE, content_type)], bytes).into_response()),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            Err(ServiceError::NotFound(format!("missing file {}", path.display())))
        }
        Err(e) => Err(e.into()),
    }
}

fn panel_response(dir: &Path, name: &str, format: PanelFormat) -> Result<Response> {
    match format {
        PanelFormat::Png => file_response(&dir.join(format!("{name}.png")), "image/png"),
        PanelFormat::Json => file_response(&dir.join(format!("{name}.json")), "application/json"),
        PanelFormat::Binary => {
            let mut resp = file_response(&dir.join(format!("{name}.f32")), "application/octet-stream")?;
            if let Ok(sidecar) = export::read_json::<export::Sidecar>(&dir.join(format!("{name}.json"))) {
                let shape = sidecar.shape.map(|n| n.to_string()).join(",");
                if let Ok(v) = shape.parse() {
                    resp.headers_mut().insert("x-panel-shape", v);
                }
            }
            Ok(resp)
        }
    }
}

async fn get_run_panel(
    State(s): State<AppState>,
    UrlPath((id, name)): UrlPath<(String, String)>,
    headers: HeaderMap,
) -> Result<Response> {
    let record = find_run(&s, &id)?;
    if record.status != RunStatus::Done {
        return Err(ServiceError::Conflict(format!("run {id} is {:?}, not DONE", record.status)));
    }
    if !record.panels.contains(&name) {
        return Err(ServiceError::NotFound(format!("run {id} has no panel {name}")));
    }
    let dir = s.store.run_dir(&id);
    let format = PanelFormat::from_accept(&headers);
    if record.mode == RunMode::Stereo && name == STEREO_PANEL {
        return match format {
            PanelFormat::Png => file_response(&dir.join(STEREO_PNG), "image/png"),
            _ => file_response(&dir.join(STEREO_FILE), "application/json"),
        };
    }
    panel_response(&dir.join(PANEL_DIR), &name, format)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CompareRequest {
    master_id: Option<String>,
    run_ids: Vec<String>,
}

fn done_run(s: &AppState, id: &str) -> Result<()> {
    let record = find_run(s, id)?;
    if record.status != RunStatus::Done {
        return Err(ServiceError::Conflict(format!("run {id} is {:?}, not DONE", record.status)));
    }
    Ok(())
}

async fn create_comparison(State(s): State<AppState>, body: Bytes) -> Result<(StatusCode, Json<Value>)> {
    let req: CompareRequest = parse_body(&body)?;
    if req.run_ids.is_empty() {
        return Err(ServiceError::Schema("run_ids must name at least one run".into()));
    }
    for id in req.master_id.iter().chain(&req.run_ids) {
        done_run(&s, id)?;
    }
    let comparison_id = uuid::Uuid::new_v4().to_string();
    let store = s.store.clone();
    let cid = comparison_id.clone();
    let summary = tokio::task::spawn_blocking(move || {
        let master = req
            .master_id
            .as_deref()
            .map(|id| jobs::load_prediction(&store.run_dir(id), id))
            .transpose()?;
        let runs = req
            .run_ids
            .iter()
            .map(|id| jobs::load_prediction(&store.run_dir(id), id))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<_> = runs.iter().collect();
        jobs::compare_to_dir(master.as_ref(), &refs, &store.comparison_dir(&cid), &cid)
    })
    .await
    .map_err(|e| ServiceError::Internal(format!("worker stopped: {e}")))??;
    let body = serde_json::to_value(summary).map_err(|e| ServiceError::Internal(e.to_string()))?;
    Ok((StatusCode::CREATED, Json(body)))
}

fn comparison_dir(s: &AppState, id: &str) -> Result<PathBuf> {
    check_id(id).map_err(|_| ServiceError::NotFound(format!("unknown comparison {id}")))?;
    let dir = s.store.comparison_dir(id);
    if dir.join(COMPARISON_FILE).exists() {
        Ok(dir)
    } else {
        Err(ServiceError::NotFound(format!("unknown comparison {id}")))
    }
}

async fn get_comparison(State(s): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Response> {
    let dir = comparison_dir(&s, &id)?;
    file_response(&dir.join(COMPARISON_FILE), "application/json")
}

async fn get_comparison_panel(
    State(s): State<AppState>,
    UrlPath((id, name)): UrlPath<(String, String)>,
    headers: HeaderMap,
) -> Result<Response> {
    let dir = comparison_dir(&s, &id)?;
    let summary: export::ComparisonSummary = export::read_json(&dir.join(COMPARISON_FILE))?;
    if !summary.entries.iter().any(|e| e.panel == name) {
        return Err(ServiceError::NotFound(format!("comparison {id} has no panel {name}")));
    }
    panel_response(&dir.join(PANEL_DIR), &name, PanelFormat::from_accept(&headers))
}
