//! Turns switch inputs into selection events: steering-wheel gating of the
//! laser, mechanical buttons, thumb tap, dwell timers and gaze triggers.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{CursorSample, CursorSource, Point};

/// Minimum spacing between two emitted events from the same switch.
pub const DEBOUNCE_MS: f64 = 150.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SelectionError {
    #[error("sample at {got} ms precedes previous sample at {last} ms")]
    OutOfOrderSample { last: f64, got: f64 },
    #[error("switch log parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Laser power follows the steering-wheel touch sensor: off while a hand is
/// on the wheel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeState {
    pub laser_enabled: bool,
    pub hand_on_wheel: bool,
}

impl Default for ModeState {
    fn default() -> Self {
        Self {
            laser_enabled: true,
            hand_on_wheel: false,
        }
    }
}

impl ModeState {
    pub fn update(self, wheel_touch: bool) -> Self {
        Self {
            laser_enabled: !wheel_touch,
            hand_on_wheel: wheel_touch,
        }
    }

    /// Whether a cursor sample from `source` should reach the pipeline.
    pub fn admits(&self, source: CursorSource) -> bool {
        source != CursorSource::Laser || self.laser_enabled
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchKind {
    MechanicalLeft,
    MechanicalRight,
    MechanicalDouble,
    ThumbTap,
    Dwell,
    Gaze,
}

impl SwitchKind {
    fn priority(self) -> u8 {
        match self {
            SwitchKind::MechanicalLeft | SwitchKind::MechanicalRight | SwitchKind::MechanicalDouble => 0,
            SwitchKind::ThumbTap => 1,
            SwitchKind::Gaze => 2,
            SwitchKind::Dwell => 3,
        }
    }
}

/// Raw switch lines as ingested from logs or the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputSwitch {
    MechanicalLeft,
    MechanicalRight,
    MechanicalDouble,
    ThumbTap,
    WheelTouch,
}

impl InputSwitch {
    /// The selection switch this input fires, if it is a selection input.
    pub fn selection_kind(self) -> Option<SwitchKind> {
        match self {
            InputSwitch::MechanicalLeft => Some(SwitchKind::MechanicalLeft),
            InputSwitch::MechanicalRight => Some(SwitchKind::MechanicalRight),
            InputSwitch::MechanicalDouble => Some(SwitchKind::MechanicalDouble),
            InputSwitch::ThumbTap => Some(SwitchKind::ThumbTap),
            InputSwitch::WheelTouch => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchEvent {
    pub t_ms: f64,
    pub switch: InputSwitch,
    pub pressed: bool,
}

pub fn parse_switch_jsonl(text: &str) -> Result<Vec<SwitchEvent>, SelectionError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| SelectionError::Parse {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionEvent {
    pub t_ms: f64,
    pub x_px: f64,
    pub y_px: f64,
    pub switch: SwitchKind,
}

impl SelectionEvent {
    pub fn at(switch: SwitchKind, t_ms: f64, pos: Point) -> Self {
        Self {
            t_ms,
            x_px: pos.x,
            y_px: pos.y,
            switch,
        }
    }

    pub fn position(&self) -> Point {
        Point::new(self.x_px, self.y_px)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DwellConfig {
    pub dwell_ms: f64,
    pub radius_px: f64,
}

impl DwellConfig {
    pub const DEFAULT_RADIUS_PX: f64 = 10.0;

    /// Finger-worn IMU: 1.5 s.
    pub fn imu() -> Self {
        Self {
            dwell_ms: 1500.0,
            radius_px: Self::DEFAULT_RADIUS_PX,
        }
    }

    /// IR fingertip tracker: 1000 ms.
    pub fn ir() -> Self {
        Self {
            dwell_ms: 1000.0,
            radius_px: Self::DEFAULT_RADIUS_PX,
        }
    }
}

/// Fires once per episode in which the cursor stays within `radius_px` of the
/// episode's anchor for `dwell_ms`. Leaving the radius re-anchors on the
/// current sample.
#[derive(Debug, Clone, PartialEq)]
pub struct DwellTimer {
    cfg: DwellConfig,
    anchor: Option<(f64, Point)>,
    fired: bool,
    last_t: Option<f64>,
}

impl DwellTimer {
    pub fn new(cfg: DwellConfig) -> Self {
        Self {
            cfg,
            anchor: None,
            fired: false,
            last_t: None,
        }
    }

    pub fn config(&self) -> &DwellConfig {
        &self.cfg
    }

    pub fn anchor_t(&self) -> Option<f64> {
        self.anchor.map(|a| a.0)
    }

    pub fn reset(&mut self) {
        self.anchor = None;
        self.fired = false;
    }

    pub fn update(&mut self, sample: &CursorSample) -> Result<Option<SelectionEvent>, SelectionError> {
        if let Some(last) = self.last_t {
            if sample.t_ms < last {
                return Err(SelectionError::OutOfOrderSample {
                    last,
                    got: sample.t_ms,
                });
            }
        }
        self.last_t = Some(sample.t_ms);
        let pos = sample.position();
        match self.anchor {
            Some((_, a)) if a.distance(pos) <= self.cfg.radius_px => {}
            _ => {
                self.anchor = Some((sample.t_ms, pos));
                self.fired = false;
            }
        }
        let (anchor_t, _) = self.anchor.expect("anchored above");
        if !self.fired && sample.t_ms - anchor_t >= self.cfg.dwell_ms {
            self.fired = true;
            return Ok(Some(SelectionEvent::at(SwitchKind::Dwell, sample.t_ms, pos)));
        }
        Ok(None)
    }
}

/// Picks at most one selection per tick: nothing while the laser is off,
/// otherwise mechanical > thumb tap > gaze > dwell, with repeats of the same
/// switch inside [`DEBOUNCE_MS`] suppressed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Arbiter {
    last_emitted: Vec<(SwitchKind, f64)>,
}

impl Arbiter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn arbitrate(&mut self, events: &[SelectionEvent], mode: &ModeState) -> Option<SelectionEvent> {
        if !mode.laser_enabled {
            return None;
        }
        let pick = events
            .iter()
            .filter(|e| !self.bounced(e))
            .min_by_key(|e| e.switch.priority())
            .copied()?;
        match self.last_emitted.iter_mut().find(|(k, _)| *k == pick.switch) {
            Some(entry) => entry.1 = pick.t_ms,
            None => self.last_emitted.push((pick.switch, pick.t_ms)),
        }
        Some(pick)
    }

    fn bounced(&self, e: &SelectionEvent) -> bool {
        self.last_emitted
            .iter()
            .any(|(k, t)| *k == e.switch && e.t_ms - t < DEBOUNCE_MS)
    }
}
