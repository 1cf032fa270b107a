//! Serves the message catalog over the network.
//!
//! - `GET /ws`: WebSocket; one session per connection. Each text frame holds one
//!   or more newline-separated requests, each answered by its own text frame.
//! - `POST /rpc`: a newline-delimited request body run on a fresh session;
//!   replies come back newline-delimited in the same order.
//! - `GET /schema`: the message catalog schema.
//! - `GET /cases/...`: files under the case root, when one is configured.
//! - anything else: the static asset directory, when one is configured.

use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::http::header::CONTENT_TYPE;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use fluoroplan::service::{run_ndjson, ServiceConfig, Session};
use tokio::net::TcpListener;
use tower_http::services::ServeDir;

pub const MESSAGE_SCHEMA: &str = include_str!("../../../schema/messages.schema.json");

#[derive(Debug, Clone, Default)]
pub struct ServerConfig {
    pub service: ServiceConfig,
    pub static_dir: Option<PathBuf>,
}

pub fn router(config: ServerConfig) -> Router {
    let config = Arc::new(config);
    let mut app = Router::new()
        .route("/rpc", post(rpc))
        .route("/ws", get(ws))
        .route("/schema", get(schema));
    if let Some(root) = &config.service.case_root {
        app = app.nest_service("/cases", ServeDir::new(root));
    }
    if let Some(dir) = &config.static_dir {
        app = app.fallback_service(ServeDir::new(dir));
    }
    app.with_state(config)
}

pub async fn serve(listener: TcpListener, config: ServerConfig) -> std::io::Result<()> {
    axum::serve(listener, router(config)).await
}

async fn schema() -> Response {
    ([(CONTENT_TYPE, "application/schema+json")], MESSAGE_SCHEMA).into_response()
}

async fn rpc(State(config): State<Arc<ServerConfig>>, body: Bytes) -> Response {
    let mut session = Session::new(config.service.clone());
    let mut out = Vec::new();
    // Writing into a Vec cannot fail, and reading a byte slice only fails on bad UTF-8.
    if let Err(e) = run_ndjson(&mut session, &body[..], &mut out) {
        return (axum::http::StatusCode::BAD_REQUEST, e.to_string()).into_response();
    }
    ([(CONTENT_TYPE, "application/x-ndjson")], out).into_response()
}

async fn ws(State(config): State<Arc<ServerConfig>>, upgrade: WebSocketUpgrade) -> Response {
    upgrade.on_upgrade(move |socket| session_loop(socket, config))
}

async fn session_loop(mut socket: WebSocket, config: Arc<ServerConfig>) {
    let mut session = Session::new(config.service.clone());
    while let Some(Ok(msg)) = socket.recv().await {
        let text = match msg {
            Message::Text(t) => t,
            Message::Close(_) => break,
            _ => continue,
        };
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let reply = session.handle_line(line);
            if socket.send(Message::Text(reply.into())).await.is_err() {
                return;
            }
        }
    }
}
