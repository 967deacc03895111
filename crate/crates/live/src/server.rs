//! HTTP and WebSocket front end.
//!
//! `GET /health`, `GET /scenarios` and `GET /session?scenario=NAME` (WebSocket
//! upgrade). Each socket gets its own [`SessionEngine`] owned by a single task;
//! the socket reader and writer talk to it only through channels.

use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use coopgame_core::scenario::load_scenario;
use coopgame_core::ControllerRegistry;
use futures_util::{SinkExt, StreamExt};
use serde::Deserialize;
use serde_json::json;
use tokio::net::TcpListener;
use tokio::sync::mpsc;
use tokio::sync::mpsc::error::TryRecvError;

use crate::engine::{EngineConfig, SessionEngine};
use crate::wire::{decode_client, encode_server, ClientMessage, ServerMessage, SCHEMA_VERSION};

pub const DEFAULT_PORT: u16 = 8400;

#[derive(Debug, Clone)]
pub struct ServerConfig {
    /// Directory of `*.toml` scenario files offered to clients.
    pub scenarios_dir: PathBuf,
    pub engine: EngineConfig,
    pub registry: ControllerRegistry,
}

impl ServerConfig {
    pub fn new(scenarios_dir: impl Into<PathBuf>) -> Self {
        Self { scenarios_dir: scenarios_dir.into(), engine: EngineConfig::default(), registry: ControllerRegistry::builtin() }
    }
}

pub fn router(config: ServerConfig) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/scenarios", get(scenarios))
        .route("/session", get(session))
        .with_state(Arc::new(config))
}

/// Serves until the listener fails.
pub async fn serve(listener: TcpListener, config: ServerConfig) -> io::Result<()> {
    axum::serve(listener, router(config)).await
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok", "schema": SCHEMA_VERSION }))
}

/// Scenario names (file stems) in the scenarios directory, sorted.
pub fn list_scenarios(dir: &Path) -> io::Result<Vec<String>> {
    let mut names = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "toml") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                names.push(stem.to_string());
            }
        }
    }
    names.sort();
    Ok(names)
}

async fn scenarios(State(cfg): State<Arc<ServerConfig>>) -> Response {
    match list_scenarios(&cfg.scenarios_dir) {
        Ok(names) => Json(json!({ "scenarios": names })).into_response(),
        Err(e) => (
            StatusCode::INTERNAL_SERVER_ERROR,
            Json(json!({ "error": format!("cannot read {}: {e}", cfg.scenarios_dir.display()) })),
        )
            .into_response(),
    }
}

#[derive(Debug, Deserialize)]
struct SessionQuery {
    scenario: Option<String>,
}

fn valid_name(name: &str) -> bool {
    !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.')) && !name.contains("..")
}

async fn session(State(cfg): State<Arc<ServerConfig>>, Query(q): Query<SessionQuery>, ws: WebSocketUpgrade) -> Response {
    ws.on_upgrade(move |socket| run_socket(socket, cfg, q.scenario))
}

fn start_engine(cfg: &ServerConfig, name: Option<&str>) -> Result<(SessionEngine, ServerMessage), String> {
    let name = name.ok_or("missing `scenario` query parameter")?;
    if !valid_name(name) {
        return Err(format!("invalid scenario name `{name}`"));
    }
    let path = cfg.scenarios_dir.join(format!("{name}.toml"));
    let doc = load_scenario(&path).map_err(|e| e.to_string())?;
    let (engine, gains) =
        SessionEngine::start(doc.scenario, cfg.registry.clone(), cfg.engine.clone()).map_err(|e| e.to_string())?;
    Ok((engine, ServerMessage::GainsChanged(gains)))
}

async fn run_socket(socket: WebSocket, cfg: Arc<ServerConfig>, scenario: Option<String>) {
    let id = uuid::Uuid::new_v4().to_string();
    let (mut sink, mut stream) = socket.split();
    let (mut engine, first) = match start_engine(&cfg, scenario.as_deref()) {
        Ok(started) => started,
        Err(message) => {
            let _ = sink.send(Message::Text(encode_server(&id, ServerMessage::Error { message }).into())).await;
            let _ = sink.send(Message::Close(None)).await;
            return;
        }
    };
    tracing::info!(session = %id, scenario = ?scenario, "session started");

    let (in_tx, mut inbox) = mpsc::channel::<String>(256);
    let (out_tx, mut outbox) = mpsc::channel::<String>(1024);
    let reader = tokio::spawn(async move {
        while let Some(Ok(msg)) = stream.next().await {
            match msg {
                Message::Text(text) => {
                    if in_tx.send(text.to_string()).await.is_err() {
                        break;
                    }
                }
                Message::Close(_) => break,
                _ => {}
            }
        }
    });
    let writer = tokio::spawn(async move {
        while let Some(text) = outbox.recv().await {
            if sink.send(Message::Text(text.into())).await.is_err() {
                break;
            }
        }
        let _ = sink.send(Message::Close(None)).await;
    });

    let _ = out_tx.send(encode_server(&id, first)).await;
    let mut ticker = tokio::time::interval(std::time::Duration::from_secs_f64(engine.config().dt));
    'run: loop {
        ticker.tick().await;
        loop {
            match inbox.try_recv() {
                Ok(text) => {
                    if let Some(reply) = handle(&mut engine, &text, &id) {
                        if out_tx.send(encode_server(&id, reply)).await.is_err() {
                            break 'run;
                        }
                    }
                }
                Err(TryRecvError::Empty) => break,
                Err(TryRecvError::Disconnected) => break 'run,
            }
        }
        match engine.step() {
            // a slow client loses telemetry frames rather than stalling the loop
            Ok(Some(t)) => match out_tx.try_send(encode_server(&id, ServerMessage::Telemetry(t))) {
                Err(mpsc::error::TrySendError::Closed(_)) => break,
                _ => {}
            },
            Ok(None) => {}
            Err(e) => {
                let _ = out_tx.send(encode_server(&id, ServerMessage::Error { message: e.to_string() })).await;
                break;
            }
        }
    }
    engine.close();
    drop(out_tx);
    reader.abort();
    let _ = writer.await;
    tracing::info!(session = %id, "session closed");
}

/// Applies one client frame; returns the reply, if any. Forces are not acknowledged
/// individually: the telemetry `mode` and `u_h` fields reflect them.
fn handle(engine: &mut SessionEngine, text: &str, id: &str) -> Option<ServerMessage> {
    let error = |message: String| Some(ServerMessage::Error { message });
    let msg = match decode_client(text, id) {
        Ok(m) => m,
        Err(e) => return error(e),
    };
    match msg {
        ClientMessage::ApplyForce { force } => engine.apply_force(&force).err().and_then(|e| error(e.to_string())),
        ClientMessage::SetAlpha { alpha } => match engine.set_alpha(alpha) {
            Ok(g) => Some(ServerMessage::GainsChanged(g)),
            Err(e) => error(e.to_string()),
        },
        ClientMessage::SetController { controller } => match engine.set_controller(&controller) {
            Ok(g) => Some(ServerMessage::GainsChanged(g)),
            Err(e) => error(e.to_string()),
        },
        ClientMessage::Reset => engine.reset().err().and_then(|e| error(e.to_string())),
    }
}
