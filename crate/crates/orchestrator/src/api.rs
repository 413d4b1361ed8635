//! HTTP/JSON control API over a [`Supervisor`].

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use compdsl_core::cdsl::CommKind;
use compdsl_core::ddsl::DeploymentModel;
use compdsl_core::Diagnostic;

use crate::session::{Event, SessionError};
use crate::supervisor::{ReplaceError, SharedLoader, Supervisor};

#[derive(Clone)]
pub struct ApiState {
    pub supervisor: Arc<Supervisor>,
    pub loader: SharedLoader,
    /// Scanned for `.cdsl` files by `GET /api/components`.
    pub components_dir: Option<PathBuf>,
}

/// Longest a client may ask `/api/events` to wait.
const MAX_POLL: Duration = Duration::from_secs(60);
const DEFAULT_POLL: Duration = Duration::from_secs(25);

pub struct ApiError {
    status: StatusCode,
    code: String,
    message: String,
    node_id: Option<String>,
    diagnostics: Vec<Diagnostic>,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError { status, code: code.into(), message: message.into(), node_id: None, diagnostics: Vec::new() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut error = json!({ "code": self.code, "message": self.message });
        if let Some(n) = self.node_id {
            error["nodeId"] = json!(n);
        }
        if !self.diagnostics.is_empty() {
            error["diagnostics"] = json!(self.diagnostics);
        }
        (self.status, Json(json!({ "error": error }))).into_response()
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let status = match e {
            SessionError::UnknownNode(_) => StatusCode::NOT_FOUND,
            SessionError::DependentsRunning { .. } => StatusCode::CONFLICT,
            SessionError::RemoteHost { .. } | SessionError::UnknownFormat(_) => StatusCode::UNPROCESSABLE_ENTITY,
            SessionError::StartFailed { .. } | SessionError::Graph(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let mut err = ApiError::new(status, e.code(), e.to_string());
        err.node_id = e.node_id().map(str::to_string);
        err
    }
}

impl From<ReplaceError> for ApiError {
    fn from(e: ReplaceError) -> Self {
        match e {
            ReplaceError::NodesRunning(ref nodes) => {
                let mut err = ApiError::new(StatusCode::CONFLICT, "nodes-running", e.to_string());
                err.node_id = nodes.first().cloned();
                err
            }
            ReplaceError::Invalid(diags) => {
                let first = diags.iter().find(|d| d.is_error());
                let mut err = ApiError::new(
                    StatusCode::UNPROCESSABLE_ENTITY,
                    "invalid-deployment",
                    first.map_or_else(|| "deployment has errors".to_string(), |d| d.message.clone()),
                );
                err.node_id = first.and_then(|d| d.node.clone());
                err.diagnostics = diags;
                err
            }
            other => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", other.to_string()),
        }
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))
}

pub fn router(state: ApiState) -> Router {
    Router::new()
        .route("/api/deployment", get(get_deployment).put(put_deployment))
        .route("/api/graph", get(get_graph))
        .route("/api/status", get(get_status))
        .route("/api/nodes/{id}/start", post(start_node))
        .route("/api/nodes/{id}/stop", post(stop_node))
        .route("/api/events", get(get_events))
        .route("/api/components", get(get_components))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not-found", "no such endpoint") })
        .with_state(state)
}

/// Serves the API on `listener` until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: ApiState,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await
}

async fn get_deployment(State(s): State<ApiState>) -> Json<DeploymentModel> {
    Json(s.supervisor.deployment())
}

#[derive(Serialize)]
struct Replaced {
    deployment: DeploymentModel,
    diagnostics: Vec<Diagnostic>,
}

async fn put_deployment(
    State(s): State<ApiState>,
    body: Result<Json<DeploymentModel>, JsonRejection>,
) -> ApiResult<Replaced> {
    let Json(model) = body.map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "bad-request", e.body_text()))?;
    let sup = s.supervisor.clone();
    let diagnostics = blocking(move || sup.replace(model)).await??;
    Ok(Json(Replaced { deployment: s.supervisor.deployment(), diagnostics }))
}

async fn get_graph(State(s): State<ApiState>) -> impl IntoResponse {
    Json(s.supervisor.status().graph)
}

async fn get_status(State(s): State<ApiState>) -> impl IntoResponse {
    Json(s.supervisor.status())
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Action {
    node_id: String,
    affected: Vec<String>,
    status: crate::session::StatusSnapshot,
}

async fn start_node(State(s): State<ApiState>, UrlPath(id): UrlPath<String>) -> ApiResult<Action> {
    let sup = s.supervisor.clone();
    let node = id.clone();
    let affected = blocking(move || sup.start(&node)).await??;
    Ok(Json(Action { node_id: id, affected, status: s.supervisor.status() }))
}

#[derive(Deserialize)]
struct StopQuery {
    #[serde(default)]
    cascade: Option<String>,
}

async fn stop_node(
    State(s): State<ApiState>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<StopQuery>,
) -> ApiResult<Action> {
    let cascade = match q.cascade.as_deref() {
        None | Some("false") | Some("0") => false,
        Some("true") | Some("1") | Some("") => true,
        Some(other) => {
            return Err(ApiError::new(StatusCode::BAD_REQUEST, "bad-request", format!("cascade must be true or false, not {other}")))
        }
    };
    let sup = s.supervisor.clone();
    let node = id.clone();
    let affected = blocking(move || sup.stop(&node, cascade)).await??;
    Ok(Json(Action { node_id: id, affected, status: s.supervisor.status() }))
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct EventsQuery {
    #[serde(default)]
    since: u64,
    timeout_ms: Option<u64>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Events {
    events: Vec<Event>,
    last_seq: u64,
}

async fn get_events(State(s): State<ApiState>, Query(q): Query<EventsQuery>) -> ApiResult<Events> {
    let timeout = q.timeout_ms.map_or(DEFAULT_POLL, Duration::from_millis).min(MAX_POLL);
    let sup = s.supervisor.clone();
    let events = blocking(move || sup.events_since(q.since, timeout)).await?;
    let last_seq = events.last().map_or(q.since, |e| e.seq);
    Ok(Json(Events { events, last_seq }))
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ComponentEntry {
    pub path: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub implements: Vec<String>,
    pub requires: Vec<String>,
    pub publishes: Vec<String>,
    pub subscribes_to: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<Diagnostic>,
}

fn cdsl_files(dir: &Path, out: &mut Vec<PathBuf>) {
    let Ok(rd) = std::fs::read_dir(dir) else { return };
    for entry in rd.flatten() {
        let p = entry.path();
        if p.is_dir() {
            if !p.file_name().is_some_and(|n| n.to_string_lossy().starts_with('.')) {
                cdsl_files(&p, out);
            }
        } else if p.extension().is_some_and(|e| e == "cdsl") {
            out.push(p);
        }
    }
}

/// Every `.cdsl` below `dir`, with its communication lists. Files that do
/// not load are listed with their diagnostics.
pub fn scan_components(dir: &Path, loader: &SharedLoader) -> Vec<ComponentEntry> {
    let mut files = Vec::new();
    cdsl_files(dir, &mut files);
    files.sort();
    files
        .into_iter()
        .map(|p| {
            let rel = p.strip_prefix(dir).unwrap_or(&p).to_string_lossy().into_owned();
            match loader.load_component(&rel, dir) {
                Ok(c) => {
                    let names = |k| c.linked.model.names(k).map(str::to_string).collect();
                    ComponentEntry {
                        path: rel,
                        name: Some(c.linked.model.name.clone()),
                        implements: names(CommKind::Implements),
                        requires: names(CommKind::Requires),
                        publishes: names(CommKind::Publishes),
                        subscribes_to: names(CommKind::SubscribesTo),
                        diagnostics: Vec::new(),
                    }
                }
                Err(d) => ComponentEntry {
                    path: rel,
                    name: None,
                    implements: Vec::new(),
                    requires: Vec::new(),
                    publishes: Vec::new(),
                    subscribes_to: Vec::new(),
                    diagnostics: d.into_vec(),
                },
            }
        })
        .collect()
}

async fn get_components(State(s): State<ApiState>) -> ApiResult<serde_json::Value> {
    let dir = s
        .components_dir
        .clone()
        .unwrap_or_else(|| s.supervisor_base_dir());
    let loader = s.loader.clone();
    let entries = blocking(move || scan_components(&dir, &loader)).await?;
    Ok(Json(json!({ "components": entries })))
}

impl ApiState {
    fn supervisor_base_dir(&self) -> PathBuf {
        self.supervisor.base_dir().to_path_buf()
    }
}
