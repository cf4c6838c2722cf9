//! Kinematics-triggered target expansion.
//!
//! Cursor speed and along-path acceleration are estimated over a short
//! sliding window. When the cursor decelerates (homing phase) or comes to
//! rest, the target nearest the cursor is drawn and hit-tested at 1.5 times
//! its base width; every other target reverts to base width. During the
//! accelerating (ballistic) phase all targets are at base width.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{CursorSample, Point};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdaptError {
    #[error("kinematics window needs at least 3 samples, got {0}")]
    InsufficientWindow(usize),
    #[error("duplicate or decreasing timestamp at {0} ms")]
    DuplicateTimestamps(f64),
    #[error("target layout is empty")]
    EmptyLayout,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kinematics {
    pub speed_px_per_s: f64,
    pub accel_px_per_s2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdaptationConfig {
    pub expansion_factor: f64,
    pub speed_zero_eps_px_per_s: f64,
    pub window_samples: usize,
}

impl Default for AdaptationConfig {
    fn default() -> Self {
        Self {
            expansion_factor: 1.5,
            speed_zero_eps_px_per_s: 5.0,
            window_samples: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetRole {
    Target,
    Distracter,
}

/// Square selectable box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub id: u32,
    pub x_px: f64,
    pub y_px: f64,
    pub base_width_px: f64,
    pub current_width_px: f64,
    pub role: TargetRole,
}

impl Target {
    pub fn new(id: u32, center: Point, width: f64, role: TargetRole) -> Self {
        Self {
            id,
            x_px: center.x,
            y_px: center.y,
            base_width_px: width,
            current_width_px: width,
            role,
        }
    }

    pub fn center(&self) -> Point {
        Point::new(self.x_px, self.y_px)
    }

    pub fn is_expanded(&self) -> bool {
        self.current_width_px != self.base_width_px
    }

    pub fn contains(&self, p: Point) -> bool {
        let half = self.current_width_px / 2.0;
        (p.x - self.x_px).abs() <= half && (p.y - self.y_px).abs() <= half
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TargetLayout {
    pub targets: Vec<Target>,
}

impl TargetLayout {
    pub fn new(targets: Vec<Target>) -> Self {
        Self { targets }
    }

    pub fn target(&self) -> Option<&Target> {
        self.targets.iter().find(|t| t.role == TargetRole::Target)
    }

    pub fn expanded(&self) -> Option<&Target> {
        self.targets.iter().find(|t| t.is_expanded())
    }

    pub fn get(&self, id: u32) -> Option<&Target> {
        self.targets.iter().find(|t| t.id == id)
    }

    /// Target with the closest centre; ties go to the lowest id.
    pub fn nearest(&self, p: Point) -> Option<&Target> {
        self.targets
            .iter()
            .min_by(|a, b| {
                a.center()
                    .distance(p)
                    .total_cmp(&b.center().distance(p))
                    .then(a.id.cmp(&b.id))
            })
    }

    /// The box hit by a click at `p` using current widths. Where boxes
    /// overlap, the one with the nearest centre wins.
    pub fn hit_test(&self, p: Point) -> Option<&Target> {
        self.targets
            .iter()
            .filter(|t| t.contains(p))
            .min_by(|a, b| {
                a.center()
                    .distance(p)
                    .total_cmp(&b.center().distance(p))
                    .then(a.id.cmp(&b.id))
            })
    }

    pub fn revert_all(&mut self) -> bool {
        let mut changed = false;
        for t in &mut self.targets {
            if t.is_expanded() {
                t.current_width_px = t.base_width_px;
                changed = true;
            }
        }
        changed
    }

    /// Expands `id` by `factor` and reverts every other target.
    pub fn expand_only(&mut self, id: u32, factor: f64) -> bool {
        let mut changed = false;
        for t in &mut self.targets {
            let want = if t.id == id {
                t.base_width_px * factor
            } else {
                t.base_width_px
            };
            if t.current_width_px != want {
                t.current_width_px = want;
                changed = true;
            }
        }
        changed
    }
}

/// Speed at the middle sample by central difference, and along-path
/// acceleration as the change between the mean speeds of the window's first
/// and second halves.
pub fn estimate_kinematics(window: &[CursorSample]) -> Result<Kinematics, AdaptError> {
    let n = window.len();
    if n < 3 {
        return Err(AdaptError::InsufficientWindow(n));
    }
    if let Some(w) = window.windows(2).find(|w| w[1].t_ms <= w[0].t_ms) {
        return Err(AdaptError::DuplicateTimestamps(w[1].t_ms));
    }
    let path = |a: usize, b: usize| -> f64 {
        window[a..=b]
            .windows(2)
            .map(|w| w[0].position().distance(w[1].position()))
            .sum()
    };
    let dt_s = |a: usize, b: usize| (window[b].t_ms - window[a].t_ms) / 1000.0;

    let mid = n / 2;
    let speed = path(mid - 1, mid + 1) / dt_s(mid - 1, mid + 1);
    let v_first = path(0, mid) / dt_s(0, mid);
    let v_second = path(mid, n - 1) / dt_s(mid, n - 1);
    let accel = (v_second - v_first) / (dt_s(0, n - 1) / 2.0);
    Ok(Kinematics {
        speed_px_per_s: speed,
        accel_px_per_s2: accel,
    })
}

/// Pure expansion rule: when decelerating or at rest, only the target
/// nearest `cursor` is expanded; otherwise every target is at base width.
pub fn maybe_expand(
    layout: &TargetLayout,
    cursor: &CursorSample,
    k: &Kinematics,
    cfg: &AdaptationConfig,
) -> Result<TargetLayout, AdaptError> {
    let mut out = layout.clone();
    apply_expansion(&mut out, cursor.position(), k, cfg)?;
    Ok(out)
}

/// In-place form of [`maybe_expand`]; returns whether any width changed.
pub fn apply_expansion(
    layout: &mut TargetLayout,
    cursor: Point,
    k: &Kinematics,
    cfg: &AdaptationConfig,
) -> Result<bool, AdaptError> {
    let nearest = layout.nearest(cursor).ok_or(AdaptError::EmptyLayout)?.id;
    let homing = k.accel_px_per_s2 < 0.0 || k.speed_px_per_s <= cfg.speed_zero_eps_px_per_s;
    Ok(if homing {
        layout.expand_only(nearest, cfg.expansion_factor)
    } else {
        layout.revert_all()
    })
}

/// Streaming adapter over a cursor stream.
///
/// Expansion is armed only once the cursor has moved faster than the
/// zero-speed threshold since the last [`Adapter::reset`], so a cursor
/// resting at the trial start point does not expand anything.
#[derive(Debug, Clone)]
pub struct Adapter {
    cfg: AdaptationConfig,
    window: VecDeque<CursorSample>,
    armed: bool,
    last: Option<Kinematics>,
}

impl Adapter {
    pub fn new(cfg: AdaptationConfig) -> Self {
        Self {
            cfg,
            window: VecDeque::with_capacity(cfg.window_samples),
            armed: false,
            last: None,
        }
    }

    pub fn config(&self) -> &AdaptationConfig {
        &self.cfg
    }

    pub fn kinematics(&self) -> Option<Kinematics> {
        self.last
    }

    pub fn reset(&mut self) {
        self.window.clear();
        self.armed = false;
        self.last = None;
    }

    /// Feeds one sample and updates `layout`; returns whether widths changed.
    pub fn update(&mut self, layout: &mut TargetLayout, sample: &CursorSample) -> Result<bool, AdaptError> {
        match self.window.back() {
            Some(prev) if sample.t_ms < prev.t_ms => {
                return Err(AdaptError::DuplicateTimestamps(sample.t_ms))
            }
            Some(prev) if sample.t_ms == prev.t_ms => {
                self.window.pop_back();
            }
            _ => {}
        }
        self.window.push_back(*sample);
        while self.window.len() > self.cfg.window_samples {
            self.window.pop_front();
        }
        if self.window.len() < self.cfg.window_samples {
            return Ok(false);
        }
        let k = estimate_kinematics(self.window.make_contiguous())?;
        self.last = Some(k);
        if k.speed_px_per_s > self.cfg.speed_zero_eps_px_per_s {
            self.armed = true;
        }
        if !self.armed {
            return Ok(layout.revert_all());
        }
        apply_expansion(layout, sample.position(), &k, &self.cfg)
    }
}
