//! Session registry. Each session owns one pipeline and one task source;
//! its messages are handled one at a time under the session's own lock,
//! while different sessions proceed independently.

use std::collections::HashMap;
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use vtouch_core::adaptation::TargetLayout;
use vtouch_core::gaze::GazeSample;
use vtouch_core::harness::{
    fit_fitts, mean_selection_time, wrong_selection_rate, FittsCondition, FittsFit, HarnessError,
    IncarGridTask, RingTaskSequence, TrialRecord,
};
use vtouch_core::model::ConfigError;
use vtouch_core::pipeline::{Pipeline, PipelineConfig, PipelineError, PipelineEvent};
use vtouch_core::selection::SwitchEvent;
use vtouch_core::synth::incar_condition;
use vtouch_core::{CursorSample, CursorSource, SessionConfig};

use crate::wire::{ErrorPayload, Kind, SamplePayload, SwitchPayload, TargetStatePayload, WireMessage};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GatewayError {
    #[error(transparent)]
    InvalidConfig(#[from] ConfigError),
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("sample at {got} ms precedes previous input at {last} ms")]
    OutOfOrderSample { last: f64, got: f64 },
    #[error("bad message: {0}")]
    BadMessage(String),
    #[error(transparent)]
    Pipeline(PipelineError),
    #[error(transparent)]
    Task(#[from] HarnessError),
}

impl From<PipelineError> for GatewayError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::OutOfOrder { last, got } => GatewayError::OutOfOrderSample { last, got },
            other => GatewayError::Pipeline(other),
        }
    }
}

impl GatewayError {
    pub fn code(&self) -> &'static str {
        match self {
            GatewayError::InvalidConfig(_) => "invalid_config",
            GatewayError::UnknownSession(_) => "unknown_session",
            GatewayError::OutOfOrderSample { .. } => "out_of_order_sample",
            GatewayError::BadMessage(_) => "bad_message",
            GatewayError::Pipeline(_) => "pipeline",
            GatewayError::Task(_) => "task",
        }
    }

    pub fn payload(&self) -> ErrorPayload {
        ErrorPayload {
            code: self.code().to_string(),
            message: self.to_string(),
            field: match self {
                GatewayError::InvalidConfig(c) => Some(c.path.clone()),
                _ => None,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionMode {
    #[default]
    Pointing,
    IncarGrid,
}

/// Body of a session creation request. Every field is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CreateSession {
    pub config: Value,
    pub mode: SessionMode,
    pub adaptive: bool,
    pub modality: String,
    /// Cue time of the first trial, in the client's clock.
    pub start_t_ms: f64,
}

impl Default for CreateSession {
    fn default() -> Self {
        Self {
            config: Value::Object(Default::default()),
            mode: SessionMode::Pointing,
            adaptive: true,
            modality: "pointer_proxy".into(),
            start_t_ms: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionHandle {
    pub session_id: String,
    pub config: SessionConfig,
    pub mode: SessionMode,
    pub adaptive: bool,
    pub modality: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiveMetrics {
    pub trials: usize,
    pub correct: usize,
    pub mean_selection_ms: Option<f64>,
    pub wrong_selection_rate_pct: f64,
    pub fitts: Option<FittsFit>,
}

enum TaskSource {
    Pointing(RingTaskSequence),
    Incar(IncarGridTask),
}

impl TaskSource {
    fn next(&mut self, config: &SessionConfig) -> Result<(FittsCondition, TargetLayout), GatewayError> {
        match self {
            TaskSource::Pointing(seq) => Ok(seq.next_trial()?),
            TaskSource::Incar(task) => {
                let layout = task.next_layout()?;
                let cond = incar_condition(&layout, config.screen).map_err(|e| GatewayError::BadMessage(e.to_string()))?;
                Ok((cond, layout))
            }
        }
    }
}

struct Session {
    handle: SessionHandle,
    pipeline: Pipeline,
    tasks: TaskSource,
    trial_index: u64,
    log: Vec<String>,
    records: Vec<TrialRecord>,
}

impl Session {
    fn cue_next(&mut self, t_ms: f64) -> Result<WireMessage, GatewayError> {
        let (cond, layout) = self.tasks.next(&self.handle.config)?;
        let mut out = self.pipeline.start_trial(cond, layout, t_ms);
        let Some(PipelineEvent::TargetState(layout)) = out.pop() else {
            unreachable!("start_trial reports the new layout")
        };
        Ok(self.target_state(t_ms, layout))
    }

    fn target_state(&self, t_ms: f64, layout: TargetLayout) -> WireMessage {
        WireMessage::new(
            Kind::TargetState,
            &self.handle.session_id,
            t_ms,
            TargetStatePayload {
                trial: self.trial_index,
                targets: layout.targets,
            },
        )
    }

    fn ingest(&mut self, msg: &WireMessage) -> Result<Vec<WireMessage>, GatewayError> {
        let events = match msg.kind {
            Kind::Sample => {
                let p: SamplePayload =
                    serde_json::from_value(msg.payload.clone()).map_err(|e| GatewayError::BadMessage(e.to_string()))?;
                if p.source == CursorSource::Gaze {
                    let g = if p.valid {
                        GazeSample::new(msg.t_ms, p.x_px, p.y_px)
                    } else {
                        GazeSample::lost(msg.t_ms)
                    };
                    self.pipeline.on_gaze(&g)?
                } else {
                    self.pipeline
                        .on_cursor(&CursorSample::new(msg.t_ms, p.x_px, p.y_px, p.source))?
                }
            }
            Kind::Switch => {
                let p: SwitchPayload =
                    serde_json::from_value(msg.payload.clone()).map_err(|e| GatewayError::BadMessage(e.to_string()))?;
                self.pipeline.on_switch(&SwitchEvent {
                    t_ms: msg.t_ms,
                    switch: p.switch,
                    pressed: p.pressed,
                })?
            }
            other => {
                return Err(GatewayError::BadMessage(format!(
                    "{} messages are output only",
                    serde_json::to_string(&other).expect("kind serializes")
                )))
            }
        };
        self.log.push(msg.to_line());

        let id = self.handle.session_id.clone();
        let mut out = Vec::new();
        for ev in events {
            match ev {
                PipelineEvent::TargetState(layout) => out.push(self.target_state(msg.t_ms, layout)),
                PipelineEvent::Selection(sel) => out.push(WireMessage::new(Kind::Selection, &id, msg.t_ms, sel)),
                PipelineEvent::TrialResult(mut rec) => {
                    rec.trajectory.clear();
                    let line = WireMessage::new(Kind::TrialResult, &id, msg.t_ms, &rec);
                    self.log.push(line.to_line());
                    self.records.push(rec);
                    out.push(line);
                    self.trial_index += 1;
                    out.push(self.cue_next(msg.t_ms)?);
                }
            }
        }
        Ok(out)
    }

    fn metrics(&self) -> LiveMetrics {
        LiveMetrics {
            trials: self.records.len(),
            correct: self.records.iter().filter(|r| r.correct).count(),
            mean_selection_ms: mean_selection_time(&self.records),
            wrong_selection_rate_pct: wrong_selection_rate(&self.records),
            fitts: fit_fitts(&self.records).ok(),
        }
    }
}

/// All live sessions of one service instance.
#[derive(Default)]
pub struct SessionManager {
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
}

impl SessionManager {
    pub fn new() -> Self {
        Self::default()
    }

    /// Validates the request, builds the pipeline and cues the first trial.
    /// Returns the handle and the first `target_state`.
    pub fn create_session(&self, request: &str) -> Result<(SessionHandle, Vec<WireMessage>), GatewayError> {
        let req: CreateSession = if request.trim().is_empty() {
            CreateSession::default()
        } else {
            serde_json::from_str(request).map_err(|e| ConfigError {
                path: "$".into(),
                reason: e.to_string(),
            })?
        };
        self.create(req)
    }

    pub fn create(&self, req: CreateSession) -> Result<(SessionHandle, Vec<WireMessage>), GatewayError> {
        let config = SessionConfig::from_json(&req.config.to_string())?;
        let handle = SessionHandle {
            session_id: uuid::Uuid::new_v4().to_string(),
            config: config.clone(),
            mode: req.mode,
            adaptive: req.adaptive,
            modality: req.modality.clone(),
        };
        let pipeline = Pipeline::new(PipelineConfig::from_session(&config, req.adaptive, req.modality))?;
        let tasks = match req.mode {
            SessionMode::Pointing => TaskSource::Pointing(RingTaskSequence::new(config.rng_seed, config.screen)),
            SessionMode::IncarGrid => TaskSource::Incar(IncarGridTask::new(config.rng_seed, config.screen)),
        };
        let mut session = Session {
            handle: handle.clone(),
            pipeline,
            tasks,
            trial_index: 0,
            log: Vec::new(),
            records: Vec::new(),
        };
        let first = session.cue_next(req.start_t_ms)?;
        self.sessions
            .write()
            .insert(handle.session_id.clone(), Arc::new(Mutex::new(session)));
        Ok((handle, vec![first]))
    }

    fn get(&self, id: &str) -> Result<Arc<Mutex<Session>>, GatewayError> {
        self.sessions
            .read()
            .get(id)
            .cloned()
            .ok_or_else(|| GatewayError::UnknownSession(id.to_string()))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.sessions.read().contains_key(id)
    }

    pub fn handle(&self, id: &str) -> Result<SessionHandle, GatewayError> {
        Ok(self.get(id)?.lock().handle.clone())
    }

    /// Advances the session by one input message and returns the replies.
    pub fn ingest(&self, msg: &WireMessage) -> Result<Vec<WireMessage>, GatewayError> {
        let session = self.get(&msg.session_id)?;
        let mut guard = session.lock();
        guard.ingest(msg)
    }

    /// Ingested inputs and trial results in arrival order, one JSON object
    /// per line.
    pub fn export_log(&self, id: &str) -> Result<String, GatewayError> {
        let session = self.get(id)?;
        let guard = session.lock();
        let mut out = String::with_capacity(guard.log.iter().map(|l| l.len() + 1).sum());
        for line in &guard.log {
            out.push_str(line);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn records(&self, id: &str) -> Result<Vec<TrialRecord>, GatewayError> {
        Ok(self.get(id)?.lock().records.clone())
    }

    pub fn metrics(&self, id: &str) -> Result<LiveMetrics, GatewayError> {
        Ok(self.get(id)?.lock().metrics())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use vtouch_core::selection::InputSwitch;

    fn default_session(m: &SessionManager) -> (SessionHandle, TargetStatePayload) {
        let (h, msgs) = m.create_session("").unwrap();
        let ts: TargetStatePayload = serde_json::from_value(msgs[0].payload.clone()).unwrap();
        (h, ts)
    }

    #[test]
    fn fresh_ids() {
        let m = SessionManager::new();
        let (a, ts) = default_session(&m);
        let (b, _) = default_session(&m);
        assert_ne!(a.session_id, b.session_id);
        assert_eq!(ts.trial, 0);
        assert_eq!(ts.targets.len(), 8);
    }

    #[test]
    fn zero_dwell_is_invalid() {
        let m = SessionManager::new();
        let err = m.create_session(r#"{"config":{"dwell_ms":0}}"#).unwrap_err();
        assert_eq!(err.payload().field.as_deref(), Some("dwell_ms"));
        assert_eq!(err.code(), "invalid_config");
        let err = m.create_session(r#"{"config":{"screen":{"width_px":0}}}"#).unwrap_err();
        assert_eq!(err.payload().field.as_deref(), Some("screen.width_px"));
    }

    #[test]
    fn unknown_session() {
        let m = SessionManager::new();
        let msg = WireMessage::sample("nope", 0.0, 1.0, 1.0, CursorSource::PointerProxy);
        assert_eq!(m.ingest(&msg), Err(GatewayError::UnknownSession("nope".into())));
        assert!(m.export_log("nope").is_err());
    }

    #[test]
    fn stationary_cursor_dwells_into_selection() {
        let m = SessionManager::new();
        let (h, ts) = default_session(&m);
        let t = ts.targets.iter().find(|t| t.role == vtouch_core::adaptation::TargetRole::Target).unwrap();
        let mut selection_at = None;
        for k in 0..=110 {
            let tm = f64::from(k) * 10.0;
            let out = m
                .ingest(&WireMessage::sample(&h.session_id, tm, t.x_px, t.y_px, CursorSource::PointerProxy))
                .unwrap();
            if out.iter().any(|w| w.kind == Kind::Selection) {
                selection_at = Some(tm);
                assert!(out.iter().any(|w| w.kind == Kind::TrialResult));
                let next = out.last().unwrap();
                assert_eq!(next.kind, Kind::TargetState);
                assert_eq!(next.payload["trial"], 1);
                break;
            }
        }
        assert_eq!(selection_at, Some(1000.0));
        assert_eq!(m.metrics(&h.session_id).unwrap().trials, 1);
    }

    #[test]
    fn rejects_time_reversal_and_output_kinds() {
        let m = SessionManager::new();
        let (h, _) = default_session(&m);
        let id = &h.session_id;
        m.ingest(&WireMessage::switch(id, 50.0, InputSwitch::ThumbTap, false)).unwrap();
        let err = m
            .ingest(&WireMessage::sample(id, 10.0, 0.0, 0.0, CursorSource::PointerProxy))
            .unwrap_err();
        assert_eq!(err, GatewayError::OutOfOrderSample { last: 50.0, got: 10.0 });
        let bogus = WireMessage::new(Kind::Selection, id, 60.0, serde_json::json!({}));
        assert_eq!(m.ingest(&bogus).unwrap_err().code(), "bad_message");
        // rejected inputs are not logged
        assert_eq!(m.export_log(id).unwrap().lines().count(), 1);
    }

    #[test]
    fn incar_mode_uses_dashboard_grid() {
        let m = SessionManager::new();
        let (_, msgs) = m.create_session(r#"{"mode":"incar_grid","adaptive":false}"#).unwrap();
        let ts: TargetStatePayload = serde_json::from_value(msgs[0].payload.clone()).unwrap();
        assert_eq!(ts.targets.len(), IncarGridTask::DEFAULT_BUTTONS);
        assert!(ts.targets.iter().all(|t| t.base_width_px == 70.0));
    }
}
