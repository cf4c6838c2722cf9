#![allow(dead_code)]

use std::collections::VecDeque;

use vtouch_core::adaptation::TargetRole;
use vtouch_core::synth::min_jerk_trajectory;
use vtouch_core::{CursorSource, Point};
use vtouch_gateway::wire::TargetStatePayload;
use vtouch_gateway::{Kind, WireMessage};

/// Scripted client: reaches for each cued goal along a min-jerk path, then
/// holds still until the dwell fires.
pub struct Driver {
    pub session_id: String,
    pos: Point,
    t_ms: f64,
    queue: VecDeque<WireMessage>,
    trial: Option<u64>,
    pub results: usize,
}

impl Driver {
    pub fn new(session_id: &str, first: &[WireMessage]) -> Self {
        let mut d = Self {
            session_id: session_id.to_string(),
            pos: Point::new(512.0, 384.0),
            t_ms: 0.0,
            queue: VecDeque::new(),
            trial: None,
            results: 0,
        };
        d.observe(first);
        d
    }

    pub fn observe(&mut self, replies: &[WireMessage]) {
        for m in replies {
            assert_ne!(m.kind, Kind::Error, "unexpected error: {}", m.payload);
            match m.kind {
                Kind::TrialResult => self.results += 1,
                Kind::TargetState => {
                    let ts: TargetStatePayload = serde_json::from_value(m.payload.clone()).unwrap();
                    // Width updates within a trial do not change the plan.
                    if self.trial == Some(ts.trial) {
                        continue;
                    }
                    self.trial = Some(ts.trial);
                    let goal = ts.targets.iter().find(|t| t.role == TargetRole::Target).unwrap();
                    let mt = 350.0 + 37.0 * (ts.trial % 7) as f64;
                    let path = min_jerk_trajectory(
                        self.pos,
                        Point::new(goal.x_px, goal.y_px),
                        self.t_ms + 10.0,
                        mt,
                        10.0,
                        CursorSource::PointerProxy,
                    )
                    .unwrap();
                    self.queue = path
                        .iter()
                        .map(|s| WireMessage::sample(&self.session_id, s.t_ms, s.x_px, s.y_px, s.source))
                        .collect();
                }
                _ => {}
            }
        }
    }

    pub fn next_message(&mut self) -> WireMessage {
        let msg = self.queue.pop_front().unwrap_or_else(|| {
            WireMessage::sample(&self.session_id, self.t_ms + 10.0, self.pos.x, self.pos.y, CursorSource::PointerProxy)
        });
        self.t_ms = msg.t_ms;
        self.pos = Point::new(
            msg.payload["x_px"].as_f64().unwrap(),
            msg.payload["y_px"].as_f64().unwrap(),
        );
        msg
    }
}
