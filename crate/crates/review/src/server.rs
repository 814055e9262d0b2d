//! Routes and the server entry point.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::Result;
use crate::store::{aggregate, Choice, LabelRecord, LabelStore};
use crate::survey::{Survey, SurveyManifest};
use crate::wire::{encode_mesh, mesh_hash};

/// Response header carrying the hex SHA-256 of a mesh payload.
pub const HASH_HEADER: &str = "x-content-sha256";

pub struct AppState {
    survey: Option<Survey>,
    store: Mutex<LabelStore>,
    admin_token: Option<String>,
    meshes: Mutex<HashMap<String, Arc<(Bytes, String)>>>,
}

impl AppState {
    pub fn new(survey: Option<Survey>, store: LabelStore, admin_token: Option<String>) -> Self {
        Self {
            survey,
            store: Mutex::new(store),
            admin_token,
            meshes: Mutex::new(HashMap::new()),
        }
    }
}

#[derive(Debug)]
struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
        }
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "code": self.code, "message": self.message }))).into_response()
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

fn survey(state: &AppState) -> ApiResult<&Survey> {
    state.survey.as_ref().ok_or_else(|| {
        ApiError::new(
            StatusCode::CONFLICT,
            "no_manifest",
            "no survey manifest is loaded; restart the service with --manifest <file>",
        )
    })
}

fn item_exists(s: &Survey, id: &str) -> ApiResult<()> {
    match s.get(id) {
        Some(_) => Ok(()),
        None => Err(ApiError::new(StatusCode::NOT_FOUND, "unknown_item", format!("no item {id:?}"))),
    }
}

#[derive(Serialize)]
struct ObjectEntry<'a> {
    id: &'a str,
    index: usize,
    total: usize,
}

async fn list_objects(State(state): State<Arc<AppState>>) -> ApiResult<Response> {
    let s = survey(&state)?;
    let list: Vec<ObjectEntry> = s
        .items()
        .iter()
        .map(|it| ObjectEntry {
            id: &it.id,
            index: it.display_order,
            total: s.len(),
        })
        .collect();
    Ok(Json(list).into_response())
}

async fn get_mesh(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let s = survey(&state)?;
    item_exists(s, &id)?;
    let cached = state.meshes.lock().unwrap().get(&id).cloned();
    let payload = match cached {
        Some(p) => p,
        None => {
            let mesh = occgen::geometry::load_mesh(&s.get(&id).unwrap().mesh).map_err(ApiError::internal)?;
            let bytes = encode_mesh(&mesh);
            let hash = mesh_hash(&bytes);
            let p = Arc::new((Bytes::from(bytes), hash));
            state.meshes.lock().unwrap().insert(id, p.clone());
            p
        }
    };
    let (bytes, hash) = &*payload;
    Ok((
        [
            (header::CONTENT_TYPE, "application/octet-stream".to_string()),
            (header::ETAG, format!("\"{hash}\"")),
            (header::HeaderName::from_static(HASH_HEADER), hash.clone()),
        ],
        bytes.clone(),
    )
        .into_response())
}

#[derive(Deserialize)]
struct LabelRequest {
    choice: serde_json::Value,
    reviewer: String,
}

fn parse_choice(v: &serde_json::Value) -> ApiResult<Choice> {
    serde_json::from_value(v.clone()).map_err(|_| {
        ApiError::new(
            StatusCode::BAD_REQUEST,
            "invalid_choice",
            format!("choice must be one of Real, Fake, NotSure; got {v}"),
        )
    })
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

async fn post_label(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Response> {
    let s = survey(&state)?;
    item_exists(s, &id)?;
    let req: LabelRequest = serde_json::from_slice(&body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_body", e.to_string()))?;
    let choice = parse_choice(&req.choice)?;
    if req.reviewer.trim().is_empty() {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "invalid_reviewer", "reviewer must be non-empty"));
    }
    let record = LabelRecord {
        item: id,
        reviewer: req.reviewer,
        choice,
        timestamp_ms: now_ms(),
    };
    state.store.lock().unwrap().append(record.clone()).map_err(ApiError::internal)?;
    Ok((StatusCode::CREATED, Json(record)).into_response())
}

/// Latest choice per item for one reviewer, so a client can restore its
/// progress after a reload.
async fn reviewer_labels(State(state): State<Arc<AppState>>, Path(reviewer): Path<String>) -> ApiResult<Response> {
    survey(&state)?;
    let store = state.store.lock().unwrap();
    let mut latest: HashMap<&str, Choice> = HashMap::new();
    for r in store.records().iter().filter(|r| r.reviewer == reviewer) {
        latest.insert(&r.item, r.choice);
    }
    let mut out: Vec<_> = latest.into_iter().map(|(id, c)| json!({ "id": id, "choice": c })).collect();
    out.sort_by(|a, b| a["id"].as_str().cmp(&b["id"].as_str()));
    Ok(Json(out).into_response())
}

#[derive(Deserialize)]
struct ResultsQuery {
    #[serde(default)]
    reveal: bool,
}

fn authorized(state: &AppState, headers: &HeaderMap) -> bool {
    let Some(token) = state.admin_token.as_deref() else {
        return false;
    };
    headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .is_some_and(|t| t == token)
}

async fn results(
    State(state): State<Arc<AppState>>,
    Query(q): Query<ResultsQuery>,
    headers: HeaderMap,
) -> ApiResult<Response> {
    let store = state.store.lock().unwrap();
    if !q.reveal {
        return Ok(Json(aggregate(store.records(), None)).into_response());
    }
    if !authorized(&state, &headers) {
        return Err(ApiError::new(
            StatusCode::FORBIDDEN,
            "forbidden",
            "revealing ground truth requires the admin token",
        ));
    }
    let s = survey(&state)?;
    Ok(Json(aggregate(store.records(), Some(s))).into_response())
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/objects", get(list_objects))
        .route("/api/objects/{id}/mesh", get(get_mesh))
        .route("/api/objects/{id}/label", post(post_label))
        .route("/api/labels/{reviewer}", get(reviewer_labels))
        .route("/api/results", get(results))
        .with_state(state)
}

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub manifest: Option<PathBuf>,
    pub store: PathBuf,
    pub addr: SocketAddr,
    pub admin_token: Option<String>,
    /// Static files (the survey client) served under `/`.
    pub ui_dir: Option<PathBuf>,
}

/// Builds the shared state from disk: manifest (optional) and label log.
pub fn load_state(cfg: &ServeConfig) -> Result<AppState> {
    let survey = cfg
        .manifest
        .as_ref()
        .map(|p| SurveyManifest::load(p).and_then(Survey::new))
        .transpose()?;
    let store = LabelStore::open(&cfg.store)?;
    Ok(AppState::new(survey, store, cfg.admin_token.clone()))
}

/// Runs until Ctrl-C.
pub async fn serve(cfg: ServeConfig) -> Result<()> {
    let state = Arc::new(load_state(&cfg)?);
    let mut app = router(state);
    if let Some(dir) = &cfg.ui_dir {
        app = app.fallback_service(tower_http::services::ServeDir::new(dir));
    }
    let listener = tokio::net::TcpListener::bind(cfg.addr).await?;
    log::info!("review service listening on {}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
