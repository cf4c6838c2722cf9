//! The message envelope shared by every transport.
//!
//! Each message is one JSON object with exactly the keys `kind`,
//! `session_id`, `t_ms` and `payload`. Payload shapes per kind:
//!
//! | kind           | direction | payload                                            |
//! |----------------|-----------|----------------------------------------------------|
//! | `sample`       | in        | `{x_px, y_px, source, valid?}`                     |
//! | `switch`       | in        | `{switch, pressed}`                                |
//! | `target_state` | out       | `{trial, targets: [Target]}`                       |
//! | `selection`    | out       | `SelectionEvent`                                   |
//! | `trial_result` | out       | `TrialRecord` (trajectory left empty)              |
//! | `error`        | out       | `{code, message, field?}`                          |
//!
//! A `sample` whose `source` is `gaze` feeds the gaze switch; every other
//! source is a cursor sample.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use vtouch_core::adaptation::Target;
use vtouch_core::selection::InputSwitch;
use vtouch_core::CursorSource;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Sample,
    Switch,
    TargetState,
    Selection,
    TrialResult,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireMessage {
    pub kind: Kind,
    pub session_id: String,
    pub t_ms: f64,
    pub payload: Value,
}

impl WireMessage {
    pub fn new(kind: Kind, session_id: &str, t_ms: f64, payload: impl Serialize) -> Self {
        Self {
            kind,
            session_id: session_id.to_string(),
            t_ms,
            payload: serde_json::to_value(payload).expect("payload serializes"),
        }
    }

    pub fn sample(session_id: &str, t_ms: f64, x_px: f64, y_px: f64, source: CursorSource) -> Self {
        Self::new(
            Kind::Sample,
            session_id,
            t_ms,
            SamplePayload {
                x_px,
                y_px,
                source,
                valid: true,
            },
        )
    }

    pub fn switch(session_id: &str, t_ms: f64, switch: InputSwitch, pressed: bool) -> Self {
        Self::new(Kind::Switch, session_id, t_ms, SwitchPayload { switch, pressed })
    }

    pub fn error(session_id: &str, t_ms: f64, payload: ErrorPayload) -> Self {
        Self::new(Kind::Error, session_id, t_ms, payload)
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("wire message serializes")
    }
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplePayload {
    pub x_px: f64,
    pub y_px: f64,
    pub source: CursorSource,
    /// Only meaningful for gaze; a lost gaze sample has `valid: false`.
    #[serde(default = "yes")]
    pub valid: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchPayload {
    pub switch: InputSwitch,
    pub pressed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetStatePayload {
    /// Zero-based index of the trial the layout belongs to.
    pub trial: u64,
    pub targets: Vec<Target>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorPayload {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}
