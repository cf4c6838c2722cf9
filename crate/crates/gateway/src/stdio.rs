//! Line-delimited transport over any reader/writer pair, for headless runs.
//!
//! Each input line is either a wire message or a control object with an
//! `op` field:
//!
//! - `{"op":"create_session", "request": {...}}` answers with
//!   `{"op":"session_created","session":{...}}` followed by the first
//!   `target_state` message.
//! - `{"op":"export_log","session_id":"..."}` answers with
//!   `{"op":"log","session_id":"...","jsonl":"..."}`.
//! - `{"op":"metrics","session_id":"..."}` answers with
//!   `{"op":"metrics","session_id":"...","metrics":{...}}`.
//!
//! Failures are reported as `error` wire messages.

use std::io::{self, BufRead, Write};

use serde::Deserialize;
use serde_json::{json, Value};

use crate::session::{CreateSession, GatewayError, SessionManager};
use crate::wire::WireMessage;

#[derive(Debug, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
enum Control {
    CreateSession {
        #[serde(default)]
        request: Option<CreateSession>,
    },
    ExportLog {
        session_id: String,
    },
    Metrics {
        session_id: String,
    },
}

fn error_line(session_id: &str, t_ms: f64, e: &GatewayError) -> String {
    WireMessage::error(session_id, t_ms, e.payload()).to_line()
}

/// Handles one input line and returns the output lines.
pub fn handle_line(m: &SessionManager, line: &str) -> Vec<String> {
    let value: Value = match serde_json::from_str(line) {
        Ok(v) => v,
        Err(e) => return vec![error_line("", 0.0, &GatewayError::BadMessage(e.to_string()))],
    };
    if value.get("op").is_some() {
        let control: Control = match serde_json::from_value(value) {
            Ok(c) => c,
            Err(e) => return vec![error_line("", 0.0, &GatewayError::BadMessage(e.to_string()))],
        };
        return match control {
            Control::CreateSession { request } => match m.create(request.unwrap_or_default()) {
                Ok((session, msgs)) => std::iter::once(json!({"op": "session_created", "session": session}).to_string())
                    .chain(msgs.iter().map(WireMessage::to_line))
                    .collect(),
                Err(e) => vec![error_line("", 0.0, &e)],
            },
            Control::ExportLog { session_id } => match m.export_log(&session_id) {
                Ok(text) => vec![json!({"op": "log", "session_id": session_id, "jsonl": text}).to_string()],
                Err(e) => vec![error_line(&session_id, 0.0, &e)],
            },
            Control::Metrics { session_id } => match m.metrics(&session_id) {
                Ok(v) => vec![json!({"op": "metrics", "session_id": session_id, "metrics": v}).to_string()],
                Err(e) => vec![error_line(&session_id, 0.0, &e)],
            },
        };
    }
    match serde_json::from_value::<WireMessage>(value) {
        Ok(msg) => match m.ingest(&msg) {
            Ok(out) => out.iter().map(WireMessage::to_line).collect(),
            Err(e) => vec![error_line(&msg.session_id, msg.t_ms, &e)],
        },
        Err(e) => vec![error_line("", 0.0, &GatewayError::BadMessage(e.to_string()))],
    }
}

/// Runs until `input` is exhausted, flushing after every reply batch.
pub fn run_stdio<R: BufRead, W: Write>(m: &SessionManager, input: R, mut output: W) -> io::Result<()> {
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        for out in handle_line(m, &line) {
            writeln!(output, "{out}")?;
        }
        output.flush()?;
    }
    Ok(())
}
