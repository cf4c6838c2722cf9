//! HTTP and WebSocket transport.
//!
//! - `POST /sessions` creates a session; body is a [`CreateSession`] document.
//! - `GET /sessions/{id}/log` returns the JSONL export.
//! - `GET /sessions/{id}/metrics` returns the live dashboard numbers.
//! - `GET /sessions/{id}/stream` upgrades to a WebSocket carrying one wire
//!   message per text frame in both directions.
//!
//! [`CreateSession`]: crate::session::CreateSession

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::serve::ListenerExt;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use crate::session::{GatewayError, SessionHandle, SessionManager};
use crate::wire::{ErrorPayload, WireMessage};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateResponse {
    pub session: SessionHandle,
    pub messages: Vec<WireMessage>,
}

pub fn router(manager: Arc<SessionManager>) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}/log", get(log))
        .route("/sessions/{id}/metrics", get(metrics))
        .route("/sessions/{id}/stream", get(stream))
        .with_state(manager)
}

fn status_of(e: &GatewayError) -> StatusCode {
    match e {
        GatewayError::UnknownSession(_) => StatusCode::NOT_FOUND,
        GatewayError::InvalidConfig(_) | GatewayError::BadMessage(_) => StatusCode::BAD_REQUEST,
        GatewayError::OutOfOrderSample { .. } => StatusCode::CONFLICT,
        GatewayError::Pipeline(_) | GatewayError::Task(_) => StatusCode::UNPROCESSABLE_ENTITY,
    }
}

fn error_response(e: GatewayError) -> Response {
    (status_of(&e), Json::<ErrorPayload>(e.payload())).into_response()
}

async fn create(State(m): State<Arc<SessionManager>>, body: String) -> Response {
    match m.create_session(&body) {
        Ok((session, messages)) => (StatusCode::CREATED, Json(CreateResponse { session, messages })).into_response(),
        Err(e) => error_response(e),
    }
}

async fn log(State(m): State<Arc<SessionManager>>, Path(id): Path<String>) -> Response {
    match m.export_log(&id) {
        Ok(text) => ([(header::CONTENT_TYPE, "application/x-ndjson")], text).into_response(),
        Err(e) => error_response(e),
    }
}

async fn metrics(State(m): State<Arc<SessionManager>>, Path(id): Path<String>) -> Response {
    match m.metrics(&id) {
        Ok(v) => Json(v).into_response(),
        Err(e) => error_response(e),
    }
}

async fn stream(ws: WebSocketUpgrade, State(m): State<Arc<SessionManager>>, Path(id): Path<String>) -> Response {
    if !m.contains(&id) {
        return error_response(GatewayError::UnknownSession(id));
    }
    ws.on_upgrade(move |socket| pump(socket, m, id))
}

/// Replies to one inbound frame: the pipeline outputs, or a single `error`
/// message.
pub fn reply_to_frame(m: &SessionManager, session_id: &str, text: &str) -> Vec<WireMessage> {
    let parsed = serde_json::from_str::<WireMessage>(text)
        .map_err(|e| (0.0, GatewayError::BadMessage(e.to_string())))
        .and_then(|msg| {
            if msg.session_id == session_id {
                Ok(msg)
            } else {
                Err((msg.t_ms, GatewayError::BadMessage("session_id does not match stream".into())))
            }
        });
    match parsed {
        Ok(msg) => m
            .ingest(&msg)
            .unwrap_or_else(|e| vec![WireMessage::error(session_id, msg.t_ms, e.payload())]),
        Err((t, e)) => vec![WireMessage::error(session_id, t, e.payload())],
    }
}

async fn pump(mut socket: WebSocket, m: Arc<SessionManager>, id: String) {
    while let Some(Ok(frame)) = socket.recv().await {
        let text = match frame {
            Message::Text(t) => t,
            Message::Close(_) => break,
            _ => continue,
        };
        for reply in reply_to_frame(&m, &id, text.as_str()) {
            if socket.send(Message::Text(reply.to_line().into())).await.is_err() {
                return;
            }
        }
    }
}

/// Binds `addr` and serves until the process exits. Sockets are set to
/// no-delay since the stream is many small frames.
pub async fn serve(addr: SocketAddr, manager: Arc<SessionManager>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?.tap_io(|tcp| {
        let _ = tcp.set_nodelay(true);
    });
    axum::serve(listener, router(manager)).await
}
