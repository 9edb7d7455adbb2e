//! HTTP/JSON tool server.
//!
//! | method | path                          | body / result                        |
//! |--------|-------------------------------|--------------------------------------|
//! | POST   | `/sessions`                   | -> `{"session_id"}`                  |
//! | POST   | `/sessions/{id}/call`         | `{"tool", "args"}` -> tool result    |
//! | GET    | `/sessions/{id}/fingerprint`  | -> `{"fingerprint", "phase"}`        |
//! | GET    | `/sessions/{id}/graph`        | -> graph under construction          |
//! | DELETE | `/sessions/{id}`              | -> 204                               |
//! | GET    | `/tools`                      | -> tool manifest                     |
//! | GET    | `/registry/{tool}?k=v`        | exploration tool without a session   |
//!
//! Calls to one session are queued behind its lock; sessions idle for longer
//! than the configured timeout are dropped.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex as StdMutex};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::{json, Map, Value};
use tokio::sync::Mutex;

use crate::error::{ErrorCode, ToolError};
use crate::registry::CapabilityRegistry;
use crate::session::Session;
use crate::tools::{self, ParamType, ToolCall, ToolResult};

pub const DEFAULT_IDLE_TIMEOUT: Duration = Duration::from_secs(30 * 60);

struct Slot {
    session: Mutex<Session>,
    last_used: StdMutex<Instant>,
}

impl Slot {
    fn touch(&self) {
        *self.last_used.lock().expect("poisoned") = Instant::now();
    }
}

pub struct AppState {
    registry: Arc<CapabilityRegistry>,
    sessions: StdMutex<HashMap<String, Arc<Slot>>>,
    next_id: AtomicU64,
    idle_timeout: Duration,
}

impl AppState {
    pub fn new(registry: Arc<CapabilityRegistry>, idle_timeout: Duration) -> Arc<Self> {
        Arc::new(AppState {
            registry,
            sessions: StdMutex::new(HashMap::new()),
            next_id: AtomicU64::new(1),
            idle_timeout,
        })
    }

    pub fn session_count(&self) -> usize {
        self.sessions.lock().expect("poisoned").len()
    }

    fn slot(&self, id: &str) -> Option<Arc<Slot>> {
        self.sessions.lock().expect("poisoned").get(id).cloned()
    }

    /// Drops sessions idle for longer than the timeout. Sessions with a call
    /// in flight are kept.
    pub fn expire_idle(&self) -> usize {
        let now = Instant::now();
        let mut sessions = self.sessions.lock().expect("poisoned");
        let before = sessions.len();
        sessions.retain(|_, slot| {
            let idle = now.duration_since(*slot.last_used.lock().expect("poisoned"));
            idle < self.idle_timeout || slot.session.try_lock().is_err()
        });
        before - sessions.len()
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", axum::routing::delete(delete_session))
        .route("/sessions/{id}/call", post(call_tool))
        .route("/sessions/{id}/fingerprint", get(fingerprint))
        .route("/sessions/{id}/graph", get(graph))
        .route("/tools", get(list_tools))
        .route("/registry/{tool}", get(registry_query))
        .with_state(state)
}

fn tool_response(status: StatusCode, r: ToolResult) -> Response {
    (status, Json(r)).into_response()
}

fn unknown_session(id: &str) -> Response {
    tool_response(
        StatusCode::NOT_FOUND,
        ToolResult::failure(
            ToolError::new(ErrorCode::NotFound, format!("no session '{id}'"))
                .with_hint("create one with POST /sessions; idle sessions expire"),
        ),
    )
}

async fn create_session(State(state): State<Arc<AppState>>) -> Response {
    let id = format!("sess-{}", state.next_id.fetch_add(1, Ordering::Relaxed));
    let slot = Arc::new(Slot {
        session: Mutex::new(Session::new(Arc::clone(&state.registry))),
        last_used: StdMutex::new(Instant::now()),
    });
    state.sessions.lock().expect("poisoned").insert(id.clone(), slot);
    log::info!("created session {id}");
    (StatusCode::CREATED, Json(json!({"session_id": id}))).into_response()
}

async fn delete_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    match state.sessions.lock().expect("poisoned").remove(&id) {
        Some(_) => StatusCode::NO_CONTENT.into_response(),
        None => unknown_session(&id),
    }
}

async fn call_tool(State(state): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> Response {
    let call: ToolCall = match serde_json::from_slice(&body) {
        Ok(c) => c,
        Err(e) => {
            return tool_response(
                StatusCode::BAD_REQUEST,
                ToolResult::failure(
                    ToolError::new(ErrorCode::BadArgs, format!("malformed tool call: {e}"))
                        .with_hint(r#"send {"tool": "<name>", "args": {...}}"#),
                ),
            )
        }
    };
    let Some(slot) = state.slot(&id) else {
        return unknown_session(&id);
    };
    slot.touch();
    let result = {
        let mut session = slot.session.lock().await;
        tools::call(&mut session, &call.tool, &call.args)
    };
    slot.touch();
    tool_response(StatusCode::OK, result)
}

async fn fingerprint(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    let Some(slot) = state.slot(&id) else {
        return unknown_session(&id);
    };
    let session = slot.session.lock().await;
    Json(json!({
        "fingerprint": session.fingerprint().to_string(),
        "graph_fingerprint": session.graph().fingerprint().to_string(),
        "phase": session.phase(),
    }))
    .into_response()
}

async fn graph(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    let Some(slot) = state.slot(&id) else {
        return unknown_session(&id);
    };
    let session = slot.session.lock().await;
    Json(session.graph().clone()).into_response()
}

async fn list_tools() -> Json<Value> {
    Json(tools::manifest())
}

async fn registry_query(
    State(state): State<Arc<AppState>>,
    Path(tool): Path<String>,
    Query(params): Query<HashMap<String, String>>,
) -> Response {
    // Query strings are untyped; integer parameters are parsed here.
    let mut args = Map::new();
    for (k, v) in params {
        let integer = tools::tool(&tool)
            .and_then(|t| t.params.iter().find(|p| p.name == k))
            .is_some_and(|p| p.ty == ParamType::Integer);
        let value = match v.parse::<u64>() {
            Ok(n) if integer => Value::from(n),
            _ => Value::from(v),
        };
        args.insert(k, value);
    }
    let result = tools::explore(&state.registry, &tool, &Value::Object(args));
    let status = match result.error_code() {
        Some(ErrorCode::UnknownTool) => StatusCode::NOT_FOUND,
        Some(ErrorCode::BadArgs) => StatusCode::BAD_REQUEST,
        _ => StatusCode::OK,
    };
    tool_response(status, result)
}

/// Periodically drops idle sessions until the state is dropped.
pub fn spawn_expiry(state: &Arc<AppState>) {
    let weak = Arc::downgrade(state);
    let period = (state.idle_timeout / 4).clamp(Duration::from_millis(10), Duration::from_secs(60));
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(period);
        loop {
            tick.tick().await;
            let Some(state) = weak.upgrade() else { break };
            let n = state.expire_idle();
            if n > 0 {
                log::info!("expired {n} idle session(s)");
            }
        }
    });
}

/// Serves until Ctrl-C.
pub async fn serve(registry: Arc<CapabilityRegistry>, addr: SocketAddr, idle_timeout: Duration) -> std::io::Result<()> {
    let state = AppState::new(registry, idle_timeout);
    spawn_expiry(&state);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
