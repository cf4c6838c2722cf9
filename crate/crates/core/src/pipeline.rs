//! The live input pipeline: cursor samples, switch edges and gaze samples in;
//! target widths, arbitrated selections and finished trials out.
//!
//! Both the synthetic user and the session gateway drive this type, so a
//! replayed stream produces the same outputs regardless of where it came
//! from.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adaptation::{AdaptError, Adapter, AdaptationConfig, TargetLayout};
use crate::gaze::{GazeError, GazeSample, GazeSwitch, GazeSwitchConfig};
use crate::harness::{FittsCondition, Trial, TrialRecord, TrialStatus};
use crate::model::{CursorSample, Point, ScreenSpec, SessionConfig};
use crate::selection::{
    Arbiter, DwellConfig, DwellTimer, InputSwitch, ModeState, SelectionError, SelectionEvent, SwitchEvent,
    SwitchKind,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("input at {got} ms precedes previous input at {last} ms")]
    OutOfOrder { last: f64, got: f64 },
    #[error("non-finite cursor sample")]
    NonFinite,
    #[error(transparent)]
    Adapt(#[from] AdaptError),
    #[error(transparent)]
    Gaze(#[from] GazeError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub screen: ScreenSpec,
    pub adaptive: bool,
    pub adaptation: AdaptationConfig,
    /// Dwell selection on the cursor stream; `None` disables it.
    pub dwell: Option<DwellConfig>,
    /// Gaze fixation switch; `None` disables it.
    pub gaze: Option<GazeSwitchConfig>,
    pub modality: String,
}

impl PipelineConfig {
    /// Mechanical switches only.
    pub fn mechanical(screen: ScreenSpec, adaptive: bool, modality: impl Into<String>) -> Self {
        Self {
            screen,
            adaptive,
            adaptation: AdaptationConfig::default(),
            dwell: None,
            gaze: None,
            modality: modality.into(),
        }
    }

    /// Every switch enabled, as a live session runs.
    pub fn from_session(cfg: &SessionConfig, adaptive: bool, modality: impl Into<String>) -> Self {
        Self {
            screen: cfg.screen,
            adaptive,
            adaptation: cfg.adaptation,
            dwell: Some(DwellConfig {
                dwell_ms: cfg.dwell_ms,
                radius_px: cfg.dwell_radius_px,
            }),
            gaze: Some(cfg.gaze),
            modality: modality.into(),
        }
    }
}

/// Everything the pipeline reports back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum PipelineEvent {
    TargetState(TargetLayout),
    Selection(SelectionEvent),
    TrialResult(TrialRecord),
}

#[derive(Debug, Clone)]
pub struct Pipeline {
    cfg: PipelineConfig,
    layout: TargetLayout,
    adapter: Adapter,
    dwell: Option<DwellTimer>,
    gaze: Option<GazeSwitch>,
    arbiter: Arbiter,
    mode: ModeState,
    trial: Option<Trial>,
    cursor: Option<Point>,
    held: Vec<InputSwitch>,
    last_t: Option<f64>,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig) -> Result<Self, PipelineError> {
        let gaze = match cfg.gaze {
            Some(g) => Some(GazeSwitch::new(g, &cfg.screen)?),
            None => None,
        };
        Ok(Self {
            adapter: Adapter::new(cfg.adaptation),
            dwell: cfg.dwell.map(DwellTimer::new),
            gaze,
            layout: TargetLayout::default(),
            arbiter: Arbiter::new(),
            mode: ModeState::default(),
            trial: None,
            cursor: None,
            held: Vec::new(),
            last_t: None,
            cfg,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn adaptive(&self) -> bool {
        self.cfg.adaptive
    }

    pub fn layout(&self) -> &TargetLayout {
        &self.layout
    }

    pub fn mode(&self) -> ModeState {
        self.mode
    }

    pub fn trial_active(&self) -> bool {
        self.trial.is_some()
    }

    pub fn last_t(&self) -> Option<f64> {
        self.last_t
    }

    /// Installs a fresh layout and cues a trial at `cue_t_ms`. An unfinished
    /// trial is dropped.
    pub fn start_trial(&mut self, condition: FittsCondition, layout: TargetLayout, cue_t_ms: f64) -> Vec<PipelineEvent> {
        self.layout = layout;
        self.layout.revert_all();
        self.adapter.reset();
        if let Some(d) = &mut self.dwell {
            d.reset();
        }
        self.trial = Some(Trial::new(condition, cue_t_ms, self.cfg.adaptive, self.cfg.modality.clone()));
        vec![PipelineEvent::TargetState(self.layout.clone())]
    }

    fn advance_clock(&mut self, t_ms: f64) -> Result<(), PipelineError> {
        if let Some(last) = self.last_t {
            if t_ms < last {
                return Err(PipelineError::OutOfOrder { last, got: t_ms });
            }
        }
        self.last_t = Some(t_ms);
        Ok(())
    }

    fn expire(&mut self, t_ms: f64, out: &mut Vec<PipelineEvent>) {
        if let Some(rec) = self.trial.as_mut().and_then(|t| t.expire(t_ms)) {
            self.trial = None;
            out.push(PipelineEvent::TrialResult(rec));
        }
    }

    fn select(&mut self, candidates: &[SelectionEvent], out: &mut Vec<PipelineEvent>) {
        let Some(sel) = self.arbiter.arbitrate(candidates, &self.mode) else {
            return;
        };
        out.push(PipelineEvent::Selection(sel));
        if let Some(trial) = &mut self.trial {
            if let TrialStatus::Completed(rec) = trial.step(&sel, &self.layout) {
                self.trial = None;
                out.push(PipelineEvent::TrialResult(rec));
            }
        }
    }

    pub fn on_cursor(&mut self, sample: &CursorSample) -> Result<Vec<PipelineEvent>, PipelineError> {
        if !sample.position().is_finite() || !sample.t_ms.is_finite() {
            return Err(PipelineError::NonFinite);
        }
        self.advance_clock(sample.t_ms)?;
        let mut out = Vec::new();
        self.expire(sample.t_ms, &mut out);
        if !self.mode.admits(sample.source) {
            return Ok(out);
        }
        self.cursor = Some(sample.position());
        if let Some(trial) = &mut self.trial {
            trial.push_sample(*sample);
        }
        if self.cfg.adaptive && !self.layout.targets.is_empty() && self.adapter.update(&mut self.layout, sample)? {
            out.push(PipelineEvent::TargetState(self.layout.clone()));
        }
        let mut candidates = Vec::new();
        if let Some(d) = &mut self.dwell {
            candidates.extend(d.update(sample)?);
        }
        self.select(&candidates, &mut out);
        Ok(out)
    }

    /// Press edges of selection switches become candidates at the current
    /// cursor position; a wheel touch toggles the laser.
    pub fn on_switch(&mut self, ev: &SwitchEvent) -> Result<Vec<PipelineEvent>, PipelineError> {
        self.advance_clock(ev.t_ms)?;
        let mut out = Vec::new();
        self.expire(ev.t_ms, &mut out);
        let was_held = self.held.contains(&ev.switch);
        if ev.pressed {
            if !was_held {
                self.held.push(ev.switch);
            }
        } else {
            self.held.retain(|s| *s != ev.switch);
        }
        if ev.switch == InputSwitch::WheelTouch {
            self.mode = self.mode.update(ev.pressed);
            return Ok(out);
        }
        if let (true, false, Some(kind), Some(pos)) = (ev.pressed, was_held, ev.switch.selection_kind(), self.cursor) {
            self.select(&[SelectionEvent::at(kind, ev.t_ms, pos)], &mut out);
        }
        Ok(out)
    }

    /// A completed gaze fixation selects at the cursor, or at the fixation
    /// centroid when no cursor has been seen.
    pub fn on_gaze(&mut self, sample: &GazeSample) -> Result<Vec<PipelineEvent>, PipelineError> {
        self.advance_clock(sample.t_ms)?;
        let mut out = Vec::new();
        self.expire(sample.t_ms, &mut out);
        let Some(g) = &mut self.gaze else {
            return Ok(out);
        };
        if let Some(centroid) = g.update(sample)? {
            let pos = self.cursor.unwrap_or(centroid);
            self.select(&[SelectionEvent::at(SwitchKind::Gaze, sample.t_ms, pos)], &mut out);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adaptation::{Target, TargetRole};
    use crate::model::CursorSource;

    fn layout() -> TargetLayout {
        TargetLayout::new(vec![
            Target::new(0, Point::new(300.0, 300.0), 60.0, TargetRole::Target),
            Target::new(1, Point::new(500.0, 300.0), 60.0, TargetRole::Distracter),
        ])
    }

    fn cursor(t: f64, x: f64, y: f64) -> CursorSample {
        CursorSample::new(t, x, y, CursorSource::PointerProxy)
    }

    fn press(t: f64, switch: InputSwitch, pressed: bool) -> SwitchEvent {
        SwitchEvent { t_ms: t, switch, pressed }
    }

    fn results(events: &[PipelineEvent]) -> Vec<&TrialRecord> {
        events
            .iter()
            .filter_map(|e| match e {
                PipelineEvent::TrialResult(r) => Some(r),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn click_on_target_completes() {
        let mut p = Pipeline::new(PipelineConfig::mechanical(ScreenSpec::default(), false, "laser")).unwrap();
        let ev = p.start_trial(FittsCondition::new(200.0, 60.0), layout(), 0.0);
        assert!(matches!(ev[0], PipelineEvent::TargetState(_)));
        p.on_cursor(&cursor(0.0, 500.0, 300.0)).unwrap();
        let ev = p.on_switch(&press(100.0, InputSwitch::MechanicalLeft, true)).unwrap();
        assert!(matches!(ev[0], PipelineEvent::Selection(_)));
        assert!(results(&ev).is_empty());
        p.on_switch(&press(110.0, InputSwitch::MechanicalLeft, false)).unwrap();
        p.on_cursor(&cursor(400.0, 302.0, 298.0)).unwrap();
        let ev = p.on_switch(&press(700.0, InputSwitch::MechanicalLeft, true)).unwrap();
        let rec = results(&ev)[0];
        assert!(rec.correct);
        assert_eq!(rec.wrong_selections, 1);
        assert_eq!(rec.selection_time_ms(), 700.0);
        assert_eq!(rec.trajectory.len(), 2);
        assert!(!p.trial_active());
    }

    #[test]
    fn held_switch_fires_once() {
        let mut p = Pipeline::new(PipelineConfig::mechanical(ScreenSpec::default(), false, "laser")).unwrap();
        p.start_trial(FittsCondition::new(200.0, 60.0), layout(), 0.0);
        p.on_cursor(&cursor(0.0, 700.0, 700.0)).unwrap();
        let first = p.on_switch(&press(10.0, InputSwitch::ThumbTap, true)).unwrap();
        let again = p.on_switch(&press(500.0, InputSwitch::ThumbTap, true)).unwrap();
        assert_eq!(first.len(), 1);
        assert!(again.is_empty());
    }

    #[test]
    fn wheel_touch_blocks_laser() {
        let mut p = Pipeline::new(PipelineConfig::mechanical(ScreenSpec::default(), false, "laser")).unwrap();
        p.start_trial(FittsCondition::new(200.0, 60.0), layout(), 0.0);
        p.on_switch(&press(0.0, InputSwitch::WheelTouch, true)).unwrap();
        p.on_cursor(&CursorSample::new(5.0, 300.0, 300.0, CursorSource::Laser)).unwrap();
        let ev = p.on_switch(&press(10.0, InputSwitch::MechanicalLeft, true)).unwrap();
        assert!(ev.is_empty());
        p.on_switch(&press(20.0, InputSwitch::MechanicalLeft, false)).unwrap();
        p.on_switch(&press(30.0, InputSwitch::WheelTouch, false)).unwrap();
        p.on_cursor(&CursorSample::new(40.0, 300.0, 300.0, CursorSource::Laser)).unwrap();
        let ev = p.on_switch(&press(50.0, InputSwitch::MechanicalLeft, true)).unwrap();
        assert_eq!(results(&ev).len(), 1);
    }

    #[test]
    fn dwell_selects_at_boundary() {
        let cfg = PipelineConfig::from_session(&SessionConfig::default(), false, "pointer_proxy");
        let mut p = Pipeline::new(cfg).unwrap();
        p.start_trial(FittsCondition::new(200.0, 60.0), layout(), 0.0);
        let mut fired_at = None;
        for k in 0..=120 {
            let t = f64::from(k) * 10.0;
            let ev = p.on_cursor(&cursor(t, 301.0, 299.0)).unwrap();
            if ev.iter().any(|e| matches!(e, PipelineEvent::Selection(_))) {
                fired_at = Some(t);
                break;
            }
        }
        assert_eq!(fired_at, Some(1000.0));
    }

    #[test]
    fn gaze_selects_at_cursor() {
        let cfg = PipelineConfig::from_session(&SessionConfig::default(), false, "laser");
        let mut p = Pipeline::new(cfg).unwrap();
        p.start_trial(FittsCondition::new(200.0, 60.0), layout(), 0.0);
        p.on_cursor(&cursor(0.0, 300.0, 300.0)).unwrap();
        let mut done = None;
        for k in 0..60 {
            let t = f64::from(k) * 1000.0 / 90.0;
            let ev = p.on_gaze(&GazeSample::new(t, 100.0, 100.0)).unwrap();
            if let Some(r) = results(&ev).first() {
                done = Some((*r).clone());
                break;
            }
        }
        let rec = done.expect("gaze trial completes");
        assert!(rec.correct);
        assert!(rec.selection_time_ms() >= 300.0);
    }

    #[test]
    fn decelerating_stream_expands_one_target() {
        let cfg = PipelineConfig::mechanical(ScreenSpec::default(), true, "laser");
        let mut p = Pipeline::new(cfg).unwrap();
        p.start_trial(FittsCondition::new(200.0, 60.0), layout(), 0.0);
        let xs = [100.0, 140.0, 200.0, 250.0, 280.0, 292.0, 297.0];
        let mut widths = None;
        for (i, x) in xs.iter().enumerate() {
            for e in p.on_cursor(&cursor(i as f64 * 10.0, *x, 300.0)).unwrap() {
                if let PipelineEvent::TargetState(l) = e {
                    widths = Some(l.targets.iter().map(|t| t.current_width_px).collect::<Vec<_>>());
                }
            }
        }
        assert_eq!(widths, Some(vec![90.0, 60.0]));
    }

    #[test]
    fn timeout_emits_failed_trial() {
        let mut p = Pipeline::new(PipelineConfig::mechanical(ScreenSpec::default(), false, "laser")).unwrap();
        p.start_trial(FittsCondition::new(200.0, 60.0), layout(), 0.0);
        let ev = p.on_cursor(&cursor(10_001.0, 0.0, 0.0)).unwrap();
        let rec = results(&ev)[0];
        assert!(!rec.correct);
    }

    #[test]
    fn rejects_time_reversal() {
        let mut p = Pipeline::new(PipelineConfig::mechanical(ScreenSpec::default(), false, "laser")).unwrap();
        p.on_cursor(&cursor(100.0, 0.0, 0.0)).unwrap();
        assert_eq!(
            p.on_gaze(&GazeSample::new(50.0, 0.0, 0.0)),
            Err(PipelineError::OutOfOrder { last: 100.0, got: 50.0 })
        );
    }
}
