//! ISO 9241-style pointing tasks: target layouts, the per-trial lifecycle,
//! and Fitts' law analysis of completed trials.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adaptation::{Target, TargetLayout, TargetRole};
use crate::model::{CursorSample, Point, ScreenSpec};
use crate::selection::SelectionEvent;

/// Target widths of the pointing grid (px).
pub const GRID_WIDTHS_PX: [f64; 4] = [45.0, 55.0, 65.0, 75.0];
/// Centre-to-target distances of the pointing grid (px).
pub const GRID_DISTANCES_PX: [f64; 4] = [80.0, 160.0, 240.0, 325.0];
pub const DEFAULT_RING_TARGETS: usize = 8;
pub const TRIAL_TIMEOUT_MS: f64 = 10_000.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarnessError {
    #[error("ring of radius {distance} with width {width} overflows half-extent {half_extent}")]
    RingOverflow { distance: f64, width: f64, half_extent: f64 },
    #[error("need at least {min} targets, got {got}")]
    TooFewTargets { min: usize, got: usize },
    #[error("invalid button size {0} px")]
    InvalidButtonSize(f64),
    #[error("{n} buttons of {px} px do not fit on screen")]
    GridOverflow { n: usize, px: f64 },
    #[error("fit needs at least two distinct ID values")]
    DegenerateDesign,
    #[error("condition must have positive D and W")]
    InvalidCondition,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FittsCondition {
    #[serde(rename = "D_px")]
    pub distance_px: f64,
    #[serde(rename = "W_px")]
    pub width_px: f64,
}

impl FittsCondition {
    pub fn new(distance_px: f64, width_px: f64) -> Self {
        Self {
            distance_px,
            width_px,
        }
    }

    pub fn id_bits(&self) -> f64 {
        fitts_id(self)
    }
}

/// Index of difficulty, `log2(2D / W)` bits.
pub fn fitts_id(cond: &FittsCondition) -> f64 {
    (2.0 * cond.distance_px / cond.width_px).log2()
}

/// The full W × D grid, each condition repeated `reps` times, in a seeded
/// random order.
pub fn pointing_block(reps: usize, rng: &mut impl Rng) -> Vec<FittsCondition> {
    let mut out: Vec<FittsCondition> = GRID_WIDTHS_PX
        .iter()
        .flat_map(|&w| GRID_DISTANCES_PX.iter().map(move |&d| FittsCondition::new(d, w)))
        .flat_map(|c| std::iter::repeat_n(c, reps))
        .collect();
    out.shuffle(rng);
    out
}

/// `n_targets` squares of width W evenly spaced on a circle of radius D
/// around the screen centre; one seeded index is the target.
pub fn generate_ring_task(
    cond: &FittsCondition,
    n_targets: usize,
    seed: u64,
    screen: &ScreenSpec,
) -> Result<TargetLayout, HarnessError> {
    ring_task(cond, n_targets, &mut ChaCha8Rng::seed_from_u64(seed), screen)
}

pub fn ring_task(
    cond: &FittsCondition,
    n_targets: usize,
    rng: &mut impl Rng,
    screen: &ScreenSpec,
) -> Result<TargetLayout, HarnessError> {
    if n_targets < 2 {
        return Err(HarnessError::TooFewTargets {
            min: 2,
            got: n_targets,
        });
    }
    if !(cond.distance_px > 0.0 && cond.width_px > 0.0) {
        return Err(HarnessError::InvalidCondition);
    }
    let half_extent = screen.width().min(screen.height()) / 2.0;
    if cond.distance_px + cond.width_px / 2.0 > half_extent {
        return Err(HarnessError::RingOverflow {
            distance: cond.distance_px,
            width: cond.width_px,
            half_extent,
        });
    }
    let target_idx = rng.random_range(0..n_targets);
    let c = screen.center();
    let targets = (0..n_targets)
        .map(|i| {
            let angle = std::f64::consts::TAU * i as f64 / n_targets as f64;
            let center = Point::new(
                c.x + cond.distance_px * angle.cos(),
                c.y + cond.distance_px * angle.sin(),
            );
            let role = if i == target_idx {
                TargetRole::Target
            } else {
                TargetRole::Distracter
            };
            Target::new(i as u32, center, cond.width_px, role)
        })
        .collect();
    Ok(TargetLayout::new(targets))
}

/// Dashboard button task: `n_buttons` square buttons on a fixed two-row grid
/// (one row for three or fewer), one seeded button highlighted as target.
pub fn generate_grid_task_incar(
    n_buttons: usize,
    button_px: f64,
    rng: &mut impl Rng,
    screen: &ScreenSpec,
) -> Result<TargetLayout, HarnessError> {
    if !(button_px > 0.0 && button_px.is_finite()) {
        return Err(HarnessError::InvalidButtonSize(button_px));
    }
    if n_buttons < 2 {
        return Err(HarnessError::TooFewTargets {
            min: 2,
            got: n_buttons,
        });
    }
    let rows = if n_buttons <= 3 { 1 } else { 2 };
    let cols = n_buttons.div_ceil(rows);
    let pitch_x = screen.width() / (cols + 1) as f64;
    let pitch_y = screen.height() / (rows + 1) as f64;
    if pitch_x < button_px || pitch_y < button_px {
        return Err(HarnessError::GridOverflow {
            n: n_buttons,
            px: button_px,
        });
    }
    let target_idx = rng.random_range(0..n_buttons);
    let targets = (0..n_buttons)
        .map(|i| {
            let (r, c) = (i / cols, i % cols);
            let center = Point::new(pitch_x * (c + 1) as f64, pitch_y * (r + 1) as f64);
            let role = if i == target_idx {
                TargetRole::Target
            } else {
                TargetRole::Distracter
            };
            Target::new(i as u32, center, button_px, role)
        })
        .collect();
    Ok(TargetLayout::new(targets))
}

/// Seeded sequence of in-car grid layouts.
#[derive(Debug, Clone)]
pub struct IncarGridTask {
    rng: ChaCha8Rng,
    screen: ScreenSpec,
    n_buttons: usize,
    button_px: f64,
}

impl IncarGridTask {
    pub const DEFAULT_BUTTONS: usize = 6;
    pub const DEFAULT_BUTTON_PX: f64 = 70.0;

    pub fn new(seed: u64, screen: ScreenSpec) -> Self {
        Self::with_size(seed, screen, Self::DEFAULT_BUTTONS, Self::DEFAULT_BUTTON_PX)
    }

    pub fn with_size(seed: u64, screen: ScreenSpec, n_buttons: usize, button_px: f64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            screen,
            n_buttons,
            button_px,
        }
    }

    pub fn next_layout(&mut self) -> Result<TargetLayout, HarnessError> {
        generate_grid_task_incar(self.n_buttons, self.button_px, &mut self.rng, &self.screen)
    }
}

/// Endless ring-task trials: shuffled full-grid blocks, one after another.
#[derive(Debug, Clone)]
pub struct RingTaskSequence {
    rng: ChaCha8Rng,
    screen: ScreenSpec,
    n_targets: usize,
    queue: Vec<FittsCondition>,
}

impl RingTaskSequence {
    pub fn new(seed: u64, screen: ScreenSpec) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            screen,
            n_targets: DEFAULT_RING_TARGETS,
            queue: Vec::new(),
        }
    }

    pub fn next_trial(&mut self) -> Result<(FittsCondition, TargetLayout), HarnessError> {
        if self.queue.is_empty() {
            self.queue = pointing_block(1, &mut self.rng);
            self.queue.reverse();
        }
        let cond = self.queue.pop().expect("block refilled above");
        let layout = ring_task(&cond, self.n_targets, &mut self.rng, &self.screen)?;
        Ok((cond, layout))
    }
}

/// Optional questionnaire scores attached to a run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WorkloadScores {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tlx: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sus: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub condition: FittsCondition,
    pub cue_t_ms: f64,
    pub select_t_ms: f64,
    /// False when the trial timed out before the target was hit.
    pub correct: bool,
    pub selected_target_id: Option<u32>,
    pub adaptive: bool,
    pub wrong_selections: u32,
    pub modality: String,
    #[serde(default)]
    pub trajectory: Vec<CursorSample>,
    #[serde(default, skip_serializing_if = "is_default_scores")]
    pub scores: WorkloadScores,
}

fn is_default_scores(s: &WorkloadScores) -> bool {
    *s == WorkloadScores::default()
}

impl TrialRecord {
    pub fn selection_time_ms(&self) -> f64 {
        self.select_t_ms - self.cue_t_ms
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome {
    /// Click landed on a distracter.
    Wrong(u32),
    /// Click landed on no box.
    Miss,
    /// Click before the cue.
    Early,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrialStatus {
    InProgress(StepOutcome),
    Completed(TrialRecord),
}

/// One pointing trial from cue to first correct hit (or timeout).
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    condition: FittsCondition,
    cue_t_ms: f64,
    adaptive: bool,
    modality: String,
    trajectory: Vec<CursorSample>,
    wrong_selections: u32,
    timeout_ms: f64,
}

impl Trial {
    pub fn new(condition: FittsCondition, cue_t_ms: f64, adaptive: bool, modality: impl Into<String>) -> Self {
        Self {
            condition,
            cue_t_ms,
            adaptive,
            modality: modality.into(),
            trajectory: Vec::new(),
            wrong_selections: 0,
            timeout_ms: TRIAL_TIMEOUT_MS,
        }
    }

    pub fn cue_t_ms(&self) -> f64 {
        self.cue_t_ms
    }

    pub fn condition(&self) -> &FittsCondition {
        &self.condition
    }

    pub fn wrong_selections(&self) -> u32 {
        self.wrong_selections
    }

    pub fn push_sample(&mut self, s: CursorSample) {
        self.trajectory.push(s);
    }

    fn finish(&mut self, t_ms: f64, correct: bool, selected: Option<u32>) -> TrialRecord {
        TrialRecord {
            condition: self.condition,
            cue_t_ms: self.cue_t_ms,
            select_t_ms: t_ms,
            correct,
            selected_target_id: selected,
            adaptive: self.adaptive,
            wrong_selections: self.wrong_selections,
            modality: self.modality.clone(),
            trajectory: std::mem::take(&mut self.trajectory),
            scores: WorkloadScores::default(),
        }
    }

    /// Aborts the trial if `now_ms` is past the timeout.
    pub fn expire(&mut self, now_ms: f64) -> Option<TrialRecord> {
        (now_ms - self.cue_t_ms > self.timeout_ms).then(|| self.finish(now_ms, false, None))
    }

    /// Hit-tests `event` against the current (possibly expanded) widths.
    pub fn step(&mut self, event: &SelectionEvent, layout: &TargetLayout) -> TrialStatus {
        if let Some(rec) = self.expire(event.t_ms) {
            return TrialStatus::Completed(rec);
        }
        if event.t_ms < self.cue_t_ms {
            return TrialStatus::InProgress(StepOutcome::Early);
        }
        match layout.hit_test(event.position()) {
            Some(t) if t.role == TargetRole::Target => {
                TrialStatus::Completed(self.finish(event.t_ms, true, Some(t.id)))
            }
            Some(t) => {
                self.wrong_selections += 1;
                TrialStatus::InProgress(StepOutcome::Wrong(t.id))
            }
            None => TrialStatus::InProgress(StepOutcome::Miss),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FittsFit {
    pub a_ms: f64,
    pub b_ms_per_bit: f64,
    /// `1000 / b`; `None` when the slope is not positive.
    pub ip_bits_per_s: Option<f64>,
    /// Mean over conditions of `ID / MT`, for comparison.
    pub ip_mean_bits_per_s: f64,
    pub r2: f64,
    pub conditions: usize,
    pub trials: usize,
}

/// Mean selection time of correct trials per (D, W) condition.
pub fn condition_means(trials: &[TrialRecord]) -> Vec<(FittsCondition, f64, usize)> {
    let mut groups: BTreeMap<(u64, u64), (FittsCondition, f64, usize)> = BTreeMap::new();
    for t in trials.iter().filter(|t| t.correct) {
        let key = (t.condition.distance_px.to_bits(), t.condition.width_px.to_bits());
        let e = groups.entry(key).or_insert((t.condition, 0.0, 0));
        e.1 += t.selection_time_ms();
        e.2 += 1;
    }
    groups
        .into_values()
        .map(|(c, sum, n)| (c, sum / n as f64, n))
        .collect()
}

/// Least-squares fit of per-condition mean selection time against ID.
pub fn fit_fitts(trials: &[TrialRecord]) -> Result<FittsFit, HarnessError> {
    let means = condition_means(trials);
    let pts: Vec<(f64, f64)> = means.iter().map(|(c, mt, _)| (fitts_id(c), *mt)).collect();
    let n = pts.len() as f64;
    let mean_x = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    if pts.len() < 2 || sxx <= 1e-12 {
        return Err(HarnessError::DegenerateDesign);
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let b = sxy / sxx;
    let a = mean_y - b * mean_x;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - a - b * p.0).powi(2)).sum();
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    let ip_mean = pts.iter().map(|p| p.0 / (p.1 / 1000.0)).sum::<f64>() / n;
    Ok(FittsFit {
        a_ms: a,
        b_ms_per_bit: b,
        ip_bits_per_s: (b > 0.0).then(|| 1000.0 / b),
        ip_mean_bits_per_s: ip_mean,
        r2: r2.clamp(0.0, 1.0),
        conditions: pts.len(),
        trials: means.iter().map(|m| m.2).sum(),
    })
}

/// Percentage of clicks that landed on distracters.
pub fn wrong_selection_rate(records: &[TrialRecord]) -> f64 {
    let wrong: u64 = records.iter().map(|r| u64::from(r.wrong_selections)).sum();
    let correct = records.iter().filter(|r| r.correct).count() as u64;
    if wrong + correct == 0 {
        return 0.0;
    }
    100.0 * wrong as f64 / (wrong + correct) as f64
}

/// Mean selection time over correct trials.
pub fn mean_selection_time(records: &[TrialRecord]) -> Option<f64> {
    let times: Vec<f64> = records
        .iter()
        .filter(|r| r.correct)
        .map(TrialRecord::selection_time_ms)
        .collect();
    (!times.is_empty()).then(|| times.iter().sum::<f64>() / times.len() as f64)
}
