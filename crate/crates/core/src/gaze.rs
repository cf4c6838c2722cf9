//! Eye-gaze switch: a selection fires when gaze holds inside a small
//! visual-angle cone for a dwell period. Also computes glance statistics for
//! cue-driven gaze logs.

use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

use crate::model::{visual_angle_to_pixels, ModelError, Point, ScreenSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GazeError {
    #[error("sample at {got} ms precedes previous sample at {last} ms")]
    OutOfOrderSample { last: f64, got: f64 },
    #[error("no glance into the region after cue at {cue_t_ms} ms")]
    NoGlanceFound { cue_t_ms: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("gaze log parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
}

fn nullable_f64<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

/// One eye-tracker sample. When `valid` is false (eyes not found) the
/// coordinates are meaningless and may be `null` on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GazeSample {
    pub t_ms: f64,
    #[serde(deserialize_with = "nullable_f64", default = "nan")]
    pub x_px: f64,
    #[serde(deserialize_with = "nullable_f64", default = "nan")]
    pub y_px: f64,
    pub valid: bool,
}

fn nan() -> f64 {
    f64::NAN
}

impl GazeSample {
    pub fn new(t_ms: f64, x_px: f64, y_px: f64) -> Self {
        Self {
            t_ms,
            x_px,
            y_px,
            valid: true,
        }
    }

    pub fn lost(t_ms: f64) -> Self {
        Self {
            t_ms,
            x_px: f64::NAN,
            y_px: f64::NAN,
            valid: false,
        }
    }

    pub fn position(&self) -> Point {
        Point::new(self.x_px, self.y_px)
    }

    fn usable(&self) -> bool {
        self.valid && self.position().is_finite()
    }
}

/// Parses one `{t_ms, x_px, y_px, valid}` object per non-blank line.
pub fn parse_gaze_jsonl(text: &str) -> Result<Vec<GazeSample>, GazeError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| GazeError::Parse {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GazeSwitchConfig {
    pub cone_full_angle_deg: f64,
    pub dwell_ms: f64,
    pub refractory_ms: f64,
}

impl Default for GazeSwitchConfig {
    fn default() -> Self {
        Self {
            cone_full_angle_deg: 1.6,
            dwell_ms: 300.0,
            refractory_ms: 500.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Episode {
    anchor: Point,
    anchor_t: f64,
    sum_x: f64,
    sum_y: f64,
    count: usize,
}

impl Episode {
    fn start(s: &GazeSample) -> Self {
        Self {
            anchor: s.position(),
            anchor_t: s.t_ms,
            sum_x: s.x_px,
            sum_y: s.y_px,
            count: 1,
        }
    }

    fn push(&mut self, s: &GazeSample) {
        self.sum_x += s.x_px;
        self.sum_y += s.y_px;
        self.count += 1;
    }

    fn centroid(&self) -> Point {
        let n = self.count as f64;
        Point::new(self.sum_x / n, self.sum_y / n)
    }
}

/// Fixation trigger state machine.
///
/// An episode is anchored on its first sample and survives while every
/// sample stays within `radius_px` of the anchor. Once an episode spans
/// `dwell_ms` it completes: a trigger is emitted at the window centroid
/// unless the previous trigger is less than `refractory_ms` old, and a new
/// episode is anchored on the completing sample either way. An invalid
/// sample discards the current episode.
#[derive(Debug, Clone, PartialEq)]
pub struct GazeSwitch {
    cfg: GazeSwitchConfig,
    radius_px: f64,
    episode: Option<Episode>,
    last_t: Option<f64>,
    last_trigger_t: Option<f64>,
}

impl GazeSwitch {
    pub fn new(cfg: GazeSwitchConfig, screen: &ScreenSpec) -> Result<Self, GazeError> {
        let radius = visual_angle_to_pixels(cfg.cone_full_angle_deg, screen)?;
        Ok(Self::with_radius(cfg, radius))
    }

    pub fn with_radius(cfg: GazeSwitchConfig, radius_px: f64) -> Self {
        Self {
            cfg,
            radius_px,
            episode: None,
            last_t: None,
            last_trigger_t: None,
        }
    }

    pub fn radius_px(&self) -> f64 {
        self.radius_px
    }

    pub fn config(&self) -> &GazeSwitchConfig {
        &self.cfg
    }

    /// Time the current episode has been held, if any.
    pub fn held_ms(&self) -> Option<f64> {
        Some(self.last_t? - self.episode?.anchor_t)
    }

    pub fn update(&mut self, sample: &GazeSample) -> Result<Option<Point>, GazeError> {
        if let Some(last) = self.last_t {
            if sample.t_ms < last {
                return Err(GazeError::OutOfOrderSample {
                    last,
                    got: sample.t_ms,
                });
            }
        }
        self.last_t = Some(sample.t_ms);

        if !sample.usable() {
            self.episode = None;
            return Ok(None);
        }

        let ep = match self.episode.as_mut() {
            Some(ep) if ep.anchor.distance(sample.position()) <= self.radius_px => {
                ep.push(sample);
                ep
            }
            _ => self.episode.insert(Episode::start(sample)),
        };

        if sample.t_ms - ep.anchor_t < self.cfg.dwell_ms {
            return Ok(None);
        }
        let centroid = ep.centroid();
        *ep = Episode::start(sample);
        let ready = self
            .last_trigger_t
            .is_none_or(|t| sample.t_ms - t >= self.cfg.refractory_ms);
        if ready {
            self.last_trigger_t = Some(sample.t_ms);
            Ok(Some(centroid))
        } else {
            Ok(None)
        }
    }
}

/// Axis-aligned screen rectangle; `x`, `y` is the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
}

impl Rect {
    pub fn centered(center: Point, width: f64, height: f64) -> Self {
        Self {
            x: center.x - width / 2.0,
            y: center.y - height / 2.0,
            width,
            height,
        }
    }

    pub fn center(&self) -> Point {
        Point::new(self.x + self.width / 2.0, self.y + self.height / 2.0)
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.x && p.x <= self.x + self.width && p.y >= self.y && p.y <= self.y + self.height
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlanceStats {
    pub mean_x_offset_px: f64,
    pub mean_y_offset_px: f64,
    pub mean_reaction_ms: f64,
    pub mean_glance_ms: f64,
    pub glances: usize,
}

/// Per-cue reaction and glance duration toward `region`.
///
/// For each cue, the glance is the first contiguous run of valid in-region
/// samples starting before the next cue. Reaction is measured from the cue
/// to the run's first sample; duration runs to the first sample that leaves
/// the region (or to the last in-region sample when the log ends inside it).
/// Offsets are the mean absolute per-axis distance of run samples from the
/// region centre. All means are taken over cues.
pub fn glance_metrics(log: &[GazeSample], region: &Rect, cues: &[f64]) -> Result<GlanceStats, GazeError> {
    let center = region.center();
    let inside = |s: &GazeSample| s.usable() && region.contains(s.position());
    let mut reactions = Vec::new();
    let mut durations = Vec::new();
    let mut dx = Vec::new();
    let mut dy = Vec::new();

    for (i, &cue) in cues.iter().enumerate() {
        let next_cue = cues.get(i + 1).copied().unwrap_or(f64::INFINITY);
        let entry = log
            .iter()
            .position(|s| s.t_ms >= cue && s.t_ms < next_cue && inside(s))
            .ok_or(GazeError::NoGlanceFound { cue_t_ms: cue })?;
        let entry_t = log[entry].t_ms;
        let run_len = log[entry..].iter().take_while(|s| inside(s)).count();
        let run = &log[entry..entry + run_len];
        let end_t = log
            .get(entry + run_len)
            .map_or(run[run_len - 1].t_ms, |s| s.t_ms);

        reactions.push(entry_t - cue);
        durations.push(end_t - entry_t);
        dx.push(mean(run.iter().map(|s| (s.x_px - center.x).abs())));
        dy.push(mean(run.iter().map(|s| (s.y_px - center.y).abs())));
    }
    if reactions.is_empty() {
        return Err(GazeError::NoGlanceFound { cue_t_ms: f64::NAN });
    }
    Ok(GlanceStats {
        mean_x_offset_px: mean(dx),
        mean_y_offset_px: mean(dy),
        mean_reaction_ms: mean(reactions),
        mean_glance_ms: mean(durations),
        glances: cues.len(),
    })
}

fn mean(it: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = it.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}
