//! HTTP trace service.
//!
//! Sheets live in memory, one session per uploaded dump. Each session sits
//! behind its own read-write lock: traces share it, edits take it
//! exclusively, so a trace sees the sheet either before or after a whole
//! edit batch.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use cellgraph::{CellAddr, Direction, Edit, EngineKind, GraphStats, PatternSet, Range, Sheet, SheetDump};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub use tokio::net::TcpListener;

const BODY_LIMIT: usize = 512 * 1024 * 1024;

/// A failed request: status, message and, for bad input, the offending field.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
    path: Option<String>,
}

impl ApiError {
    fn bad(path: impl Into<String>, message: impl ToString) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            message: message.to_string(),
            path: Some(path.into()),
        }
    }

    fn not_found(id: &str) -> Self {
        Self {
            status: StatusCode::NOT_FOUND,
            message: format!("no sheet with id {id:?}"),
            path: None,
        }
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    path: Option<&'a str>,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: &self.message,
            path: self.path.as_deref(),
        };
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

struct Session {
    sheet: Sheet,
    version: u64,
}

/// Shared service state: the engine configuration and the open sessions.
pub struct AppState {
    engine: EngineKind,
    patterns: PatternSet,
    next_id: AtomicU64,
    sessions: RwLock<HashMap<String, Arc<RwLock<Session>>>>,
}

impl AppState {
    pub fn new(engine: EngineKind, patterns: PatternSet) -> Arc<Self> {
        Arc::new(Self {
            engine,
            patterns,
            next_id: AtomicU64::new(1),
            sessions: RwLock::default(),
        })
    }

    /// Parses and loads a dump into a new session and returns its id.
    pub fn open(&self, dump: &str) -> Result<String, cellgraph::SheetError> {
        let dump = SheetDump::parse(dump)?;
        let sheet = Sheet::load(&dump, self.engine, self.patterns)?;
        let id = format!("s{:x}", self.next_id.fetch_add(1, Ordering::Relaxed));
        let session = Arc::new(RwLock::new(Session { sheet, version: 0 }));
        self.sessions.write().unwrap().insert(id.clone(), session);
        Ok(id)
    }

    fn session(&self, id: &str) -> Result<Arc<RwLock<Session>>, ApiError> {
        self.sessions
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(id))
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sheets", post(create_sheet))
        .route("/sheets/{id}", axum::routing::delete(delete_sheet))
        .route("/sheets/{id}/grid", get(grid))
        .route("/sheets/{id}/trace", get(trace))
        .route("/sheets/{id}/edits", post(edits))
        .route("/sheets/{id}/stats", get(stats))
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .with_state(state)
}

/// Serves until the listener fails.
pub async fn serve(listener: TcpListener, state: Arc<AppState>) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

fn parse_body<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    let de = &mut serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ApiError::bad(path, e.into_inner())
    })
}

fn param<'a>(q: &'a HashMap<String, String>, name: &str) -> Result<&'a str, ApiError> {
    q.get(name)
        .map(String::as_str)
        .ok_or_else(|| ApiError::bad(name, format!("missing query parameter {name}")))
}

fn parse_range(path: &str, text: &str) -> Result<Range, ApiError> {
    text.parse().map_err(|e| ApiError::bad(path, e))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateBody {
    dump: String,
}

#[derive(Serialize)]
struct Created {
    id: String,
}

async fn create_sheet(State(state): State<Arc<AppState>>, body: Bytes) -> Result<(StatusCode, Json<Created>), ApiError> {
    let body: CreateBody = parse_body(&body)?;
    let id = tokio::task::spawn_blocking(move || state.open(&body.dump))
        .await
        .map_err(|e| ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            message: e.to_string(),
            path: None,
        })?
        .map_err(|e| ApiError::bad("dump", e))?;
    Ok((StatusCode::CREATED, Json(Created { id })))
}

async fn delete_sheet(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    match state.sessions.write().unwrap().remove(&id) {
        Some(_) => Ok(StatusCode::NO_CONTENT),
        None => Err(ApiError::not_found(&id)),
    }
}

#[derive(Serialize)]
struct GridCell {
    addr: String,
    content: String,
}

#[derive(Serialize)]
struct GridBody {
    cells: Vec<GridCell>,
}

async fn grid(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<GridBody> {
    let session = state.session(&id)?;
    let window = parse_range("window", param(&q, "window")?)?;
    let session = session.read().unwrap();
    let cells = session
        .sheet
        .cells_in(&window)
        .into_iter()
        .map(|(a, c)| GridCell {
            addr: a.to_string(),
            content: c.to_string(),
        })
        .collect();
    Ok(Json(GridBody { cells }))
}

#[derive(Serialize)]
struct TraceBody {
    ranges: Vec<String>,
    elapsed_us: u64,
}

async fn trace(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<TraceBody> {
    let session = state.session(&id)?;
    let range = parse_range("range", param(&q, "range")?)?;
    let dir: Direction = param(&q, "dir")?
        .parse()
        .map_err(|e| ApiError::bad("dir", e))?;
    let transitive = match q.get("transitive").map(String::as_str) {
        None | Some("true") => true,
        Some("false") => false,
        Some(other) => {
            return Err(ApiError::bad(
                "transitive",
                format!("expected true or false, got {other:?}"),
            ))
        }
    };
    let session = session.read().unwrap();
    let start = Instant::now();
    let found = session.sheet.graph().traverse(&range, dir, transitive);
    let elapsed_us = start.elapsed().as_micros() as u64;
    let ranges = found.sorted().iter().map(Range::to_string).collect();
    Ok(Json(TraceBody { ranges, elapsed_us }))
}

#[derive(Deserialize)]
#[serde(tag = "op", rename_all = "lowercase", deny_unknown_fields)]
enum OpDoc {
    Clear { range: String },
    Set { cell: String, content: String },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EditsBody {
    ops: Vec<OpDoc>,
    base_version: Option<u64>,
}

#[derive(Serialize)]
struct EditResult {
    #[serde(flatten)]
    stats: GraphStats,
    version: u64,
}

async fn edits(State(state): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> ApiResult<EditResult> {
    let session = state.session(&id)?;
    let body: EditsBody = parse_body(&body)?;
    let mut ops = Vec::with_capacity(body.ops.len());
    for (i, op) in body.ops.into_iter().enumerate() {
        ops.push(match op {
            OpDoc::Clear { range } => Edit::Clear(parse_range(&format!("ops[{i}].range"), &range)?),
            OpDoc::Set { cell, content } => Edit::Set {
                cell: cell
                    .parse::<CellAddr>()
                    .map_err(|e| ApiError::bad(format!("ops[{i}].cell"), e))?,
                content,
            },
        });
    }
    let mut session = session.write().unwrap();
    if let Some(v) = body.base_version {
        if v != session.version {
            return Err(ApiError {
                status: StatusCode::CONFLICT,
                message: format!("sheet is at version {}, edit was based on {v}", session.version),
                path: Some("base_version".into()),
            });
        }
    }
    session
        .sheet
        .apply_all(&ops)
        .map_err(|(i, e)| ApiError::bad(format!("ops[{i}]"), e))?;
    if !ops.is_empty() {
        session.version += 1;
    }
    Ok(Json(EditResult {
        stats: session.sheet.graph().stats(),
        version: session.version,
    }))
}

async fn stats(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<GraphStats> {
    let session = state.session(&id)?;
    let stats = session.read().unwrap().sheet.graph().stats();
    Ok(Json(stats))
}
