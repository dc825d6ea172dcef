//! HTTP and WebSocket front end for [`SessionServer`].
//!
//! | route                        | method | body                                  |
//! |------------------------------|--------|---------------------------------------|
//! | `/sessions`                  | POST   | `{"presenter":"alice"}` (optional)    |
//! | `/sessions`                  | GET    | JSON array of session ids             |
//! | `/sessions/{id}/log`         | GET    | newline-delimited log entries         |
//! | `/sessions/{id}/report`      | GET    | bandwidth report, `?format=csv|table` |
//! | `/ws`                        | GET    | socket; first frame must be a join    |
//! | `/assets/...`                | GET    | static files                          |

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use clap::{Parser, ValueEnum};
use mediasync_core::bandwidth::ReportFormat;
use mediasync_core::session::{
    encode_log, Connection, FileStore, LogStore, MemoryStore, RolePolicy, SessionError, SessionServer, SystemClock,
};
use serde_json::json;
use tokio::sync::mpsc::unbounded_channel;
use tower_http::services::ServeDir;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Persistence {
    Memory,
    File,
}

/// Service configuration. Flags override the environment.
#[derive(Clone, Debug, Parser)]
#[command(name = "mediasync-server", version, about = "Real-time media collaboration session server")]
pub struct Config {
    #[arg(long, env = "MEDIASYNC_LISTEN", default_value = "127.0.0.1:8080")]
    pub listen: SocketAddr,
    /// Directory served under /assets.
    #[arg(long, env = "MEDIASYNC_ASSETS", default_value = "assets")]
    pub assets: PathBuf,
    #[arg(long, env = "MEDIASYNC_PERSISTENCE", value_enum, default_value = "memory")]
    pub persistence: Persistence,
    /// Session logs directory when persistence is `file`.
    #[arg(long, env = "MEDIASYNC_LOG_DIR", default_value = "logs")]
    pub log_dir: PathBuf,
    /// `presenter-only` or `all-participants`.
    #[arg(long, env = "MEDIASYNC_ROLE_POLICY", default_value = "presenter-only")]
    pub role_policy: RolePolicy,
}

/// Builds the session server, restoring any sessions found in a file store.
pub fn build_server(config: &Config) -> anyhow::Result<Arc<SessionServer>> {
    let store: Arc<dyn LogStore> = match config.persistence {
        Persistence::Memory => Arc::new(MemoryStore::new()),
        Persistence::File => Arc::new(FileStore::open(&config.log_dir)?),
    };
    let server = SessionServer::new(Arc::new(SystemClock), store, config.role_policy);
    let restored = server.restore_from_store()?;
    if restored > 0 {
        tracing::info!(restored, "sessions restored");
    }
    Ok(Arc::new(server))
}

pub fn app(server: Arc<SessionServer>, assets: PathBuf) -> Router {
    Router::new()
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}/log", get(session_log))
        .route("/sessions/{id}/report", get(session_report))
        .route("/ws", get(upgrade))
        .nest_service("/assets", ServeDir::new(assets))
        .with_state(server)
}

struct ApiError(SessionError);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match self.0 {
            SessionError::UnknownSession(_) => StatusCode::NOT_FOUND,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(json!({ "code": self.0.code(), "message": self.0.to_string() }))).into_response()
    }
}

async fn create_session(State(server): State<Arc<SessionServer>>, body: String) -> Response {
    let presenter = if body.trim().is_empty() {
        String::new()
    } else {
        match serde_json::from_str::<serde_json::Value>(&body) {
            Ok(v) => v.get("presenter").and_then(|p| p.as_str()).unwrap_or_default().to_string(),
            Err(e) => return (StatusCode::BAD_REQUEST, Json(json!({ "code": "bad-request", "message": e.to_string() }))).into_response(),
        }
    };
    let id = server.create_session(&presenter);
    tracing::info!(session = %id, "session created");
    (StatusCode::CREATED, Json(json!({ "session-id": id }))).into_response()
}

async fn list_sessions(State(server): State<Arc<SessionServer>>) -> Json<Vec<String>> {
    Json(server.session_ids())
}

async fn session_log(State(server): State<Arc<SessionServer>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let log = server.log(&id).map_err(ApiError)?;
    Ok(([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], encode_log(&log)).into_response())
}

async fn session_report(
    State(server): State<Arc<SessionServer>>,
    Path(id): Path<String>,
    Query(query): Query<HashMap<String, String>>,
) -> Result<Response, ApiError> {
    let format = match query.get("format").map(|f| f.parse::<ReportFormat>()) {
        None => ReportFormat::Table,
        Some(Ok(f)) => f,
        Some(Err(_)) => return Ok((StatusCode::BAD_REQUEST, "format must be csv or table\n").into_response()),
    };
    let report = server.report(&id).map_err(ApiError)?;
    Ok(([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], report.emit(format)).into_response())
}

async fn upgrade(State(server): State<Arc<SessionServer>>, ws: WebSocketUpgrade) -> Response {
    ws.on_upgrade(move |socket| serve_socket(socket, server))
}

async fn serve_socket(mut socket: WebSocket, server: Arc<SessionServer>) {
    let (tx, mut rx) = unbounded_channel();
    let mut conn = Connection::new(server, tx);
    loop {
        tokio::select! {
            inbound = socket.recv() => match inbound {
                Some(Ok(Message::Text(text))) => {
                    if let Err(e) = conn.handle_text(text.as_str()) {
                        tracing::debug!(error = %e, "frame refused");
                    }
                }
                Some(Ok(Message::Binary(_))) => {
                    let _ = socket.send(Message::Close(None)).await;
                    break;
                }
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => {}
            },
            outbound = rx.recv() => match outbound {
                Some(text) => {
                    if socket.send(Message::Text(text.as_ref().into())).await.is_err() {
                        break;
                    }
                }
                None => break,
            },
        }
    }
    conn.close();
}

/// Serves on an already bound listener until `shutdown` resolves.
pub async fn serve_on(
    listener: tokio::net::TcpListener,
    server: Arc<SessionServer>,
    assets: PathBuf,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, app(server, assets)).with_graceful_shutdown(shutdown).await
}

/// Binds `config.listen` and serves until Ctrl-C.
pub async fn serve(config: Config) -> anyhow::Result<()> {
    let server = build_server(&config)?;
    let listener = tokio::net::TcpListener::bind(config.listen).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    serve_on(listener, server, config.assets, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await?;
    Ok(())
}
