//! Deterministic synthetic participant.
//!
//! Pointing follows the minimum-jerk profile with Fitts-law movement times,
//! gaze follows a scripted glance between a home fixation and a region, and
//! driving uses a damped proportional lane keeper. Every draw comes from a
//! seeded ChaCha stream; a pointing trial uses its own stream indexed by the
//! trial number, so runs that differ only in adaptation see the same draws
//! trial for trial.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adaptation::{AdaptError, Adapter, TargetLayout};
use crate::driving::{
    mean_lane_deviation, schedule_cues, step_vehicle, steering_angle_sd, CueSchedule, DriveLogEntry,
    DrivingError, ReferencePath, VehicleState, SPEED_CAP_MPS, TICK_MS, WHEELBASE_M,
};
use crate::gaze::{GazeSample, GazeSwitchConfig, Rect};
use crate::harness::{
    fitts_id, pointing_block, ring_task, FittsCondition, HarnessError, IncarGridTask, TrialRecord,
    DEFAULT_RING_TARGETS,
};
use crate::model::{CursorSample, CursorSource, Point, ScreenSpec};
use crate::pipeline::{Pipeline, PipelineConfig, PipelineError, PipelineEvent};
use crate::selection::{DwellConfig, InputSwitch, SwitchEvent};

pub const POINTING_PERIOD_MS: f64 = 10.0;
pub const GAZE_PERIOD_MS: f64 = 1000.0 / 90.0;
const MIN_MT_MS: f64 = 100.0;
const INTER_TRIAL_MS: f64 = 1000.0;
const MAX_ATTEMPTS: usize = 50;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("time {t_ms} ms outside [0, {mt_ms}]")]
    TimeOutOfRange { t_ms: f64, mt_ms: f64 },
    #[error("movement time must be positive, got {0}")]
    NonPositiveMt(f64),
    #[error("invalid user parameter `{0}`")]
    InvalidParams(&'static str),
    #[error("layout has no target")]
    NoTarget,
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Adapt(#[from] AdaptError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Driving(#[from] DrivingError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UserParams {
    pub fitts_a_ms: f64,
    pub fitts_b_ms_per_bit: f64,
    pub reaction_ms: f64,
    pub context_switch_ms: f64,
    /// Endpoint scatter σ in px. `None` scales it with the effective width.
    pub endpoint_noise_px: Option<f64>,
    /// σ as a fraction of effective width when `endpoint_noise_px` is `None`.
    pub endpoint_noise_fraction: f64,
    /// σ of additive Gaussian movement-time noise.
    pub mt_noise_ms: f64,
    pub seed: u64,
}

impl Default for UserParams {
    fn default() -> Self {
        Self {
            fitts_a_ms: 300.0,
            fitts_b_ms_per_bit: 150.0,
            reaction_ms: 250.0,
            context_switch_ms: 400.0,
            endpoint_noise_px: None,
            endpoint_noise_fraction: 1.0 / 12.0,
            mt_noise_ms: 0.0,
            seed: 0,
        }
    }
}

impl UserParams {
    /// Exact Fitts line, no reaction delay and no scatter.
    pub fn noiseless(a_ms: f64, b_ms_per_bit: f64) -> Self {
        Self {
            fitts_a_ms: a_ms,
            fitts_b_ms_per_bit: b_ms_per_bit,
            reaction_ms: 0.0,
            context_switch_ms: 0.0,
            endpoint_noise_px: Some(0.0),
            mt_noise_ms: 0.0,
            ..Self::default()
        }
    }

    /// Parameters tuned so in-car grid selections average about 1.3 s.
    pub fn incar() -> Self {
        Self {
            fitts_a_ms: 200.0,
            fitts_b_ms_per_bit: 150.0,
            reaction_ms: 740.0,
            mt_noise_ms: 250.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let checks = [
            ("fitts_a_ms", self.fitts_a_ms),
            ("fitts_b_ms_per_bit", self.fitts_b_ms_per_bit),
            ("reaction_ms", self.reaction_ms),
            ("context_switch_ms", self.context_switch_ms),
            ("mt_noise_ms", self.mt_noise_ms),
            ("endpoint_noise_fraction", self.endpoint_noise_fraction),
        ];
        for (name, v) in checks {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(SynthError::InvalidParams(name));
            }
        }
        if self.endpoint_noise_px.is_some_and(|v| !(v >= 0.0)) {
            return Err(SynthError::InvalidParams("endpoint_noise_px"));
        }
        Ok(())
    }
}

fn min_jerk_tau(mt_ms: f64, t_ms: f64) -> Result<f64, SynthError> {
    if !(mt_ms > 0.0) {
        return Err(SynthError::NonPositiveMt(mt_ms));
    }
    if !(0.0..=mt_ms).contains(&t_ms) {
        return Err(SynthError::TimeOutOfRange { t_ms, mt_ms });
    }
    Ok(t_ms / mt_ms)
}

fn lerp(x0: Point, x1: Point, s: f64) -> Point {
    Point::new(x0.x + (x1.x - x0.x) * s, x0.y + (x1.y - x0.y) * s)
}

/// `x0 + (x1 - x0)(10τ³ - 15τ⁴ + 6τ⁵)` with `τ = t / MT`.
pub fn min_jerk_position(x0: Point, x1: Point, mt_ms: f64, t_ms: f64) -> Result<Point, SynthError> {
    let tau = min_jerk_tau(mt_ms, t_ms)?;
    let s = tau.powi(3) * (10.0 + tau * (-15.0 + 6.0 * tau));
    Ok(lerp(x0, x1, s))
}

/// Closed-form velocity in px/ms.
pub fn min_jerk_velocity(x0: Point, x1: Point, mt_ms: f64, t_ms: f64) -> Result<Point, SynthError> {
    let tau = min_jerk_tau(mt_ms, t_ms)?;
    let ds = 30.0 * tau.powi(2) * (1.0 - tau).powi(2) / mt_ms;
    Ok(Point::new((x1.x - x0.x) * ds, (x1.y - x0.y) * ds))
}

/// Closed-form acceleration in px/ms².
pub fn min_jerk_accel(x0: Point, x1: Point, mt_ms: f64, t_ms: f64) -> Result<Point, SynthError> {
    let tau = min_jerk_tau(mt_ms, t_ms)?;
    let dds = 60.0 * tau * (1.0 - tau) * (1.0 - 2.0 * tau) / (mt_ms * mt_ms);
    Ok(Point::new((x1.x - x0.x) * dds, (x1.y - x0.y) * dds))
}

/// Samples every `period_ms` from `start_t_ms`, with the final sample at
/// exactly `start_t_ms + mt_ms`.
pub fn min_jerk_trajectory(
    x0: Point,
    x1: Point,
    start_t_ms: f64,
    mt_ms: f64,
    period_ms: f64,
    source: CursorSource,
) -> Result<Vec<CursorSample>, SynthError> {
    if !(mt_ms > 0.0) {
        return Err(SynthError::NonPositiveMt(mt_ms));
    }
    let mut out = Vec::with_capacity((mt_ms / period_ms) as usize + 2);
    let mut k = 0u32;
    loop {
        let t = f64::from(k) * period_ms;
        if t >= mt_ms {
            break;
        }
        let p = min_jerk_position(x0, x1, mt_ms, t)?;
        out.push(CursorSample::new(start_t_ms + t, p.x, p.y, source));
        k += 1;
    }
    out.push(CursorSample::new(start_t_ms + mt_ms, x1.x, x1.y, source));
    Ok(out)
}

/// `a + b · log2(2D / W)`.
pub fn fitts_mt(params: &UserParams, cond: &FittsCondition) -> f64 {
    params.fitts_a_ms + params.fitts_b_ms_per_bit * fitts_id(cond)
}

/// How the synthetic user confirms a selection once on target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SelectionModel {
    /// Button press at arrival.
    Mechanical,
    /// Hold still until the dwell timer fires.
    Dwell(DwellConfig),
    /// Fixate the endpoint until the gaze switch fires.
    Gaze(GazeSwitchConfig),
}

impl SelectionModel {
    /// The pipeline configuration that recognizes this selection model.
    pub fn pipeline_config(&self, screen: ScreenSpec, adaptive: bool, modality: &str) -> PipelineConfig {
        let mut cfg = PipelineConfig::mechanical(screen, adaptive, modality);
        match *self {
            SelectionModel::Mechanical => {}
            SelectionModel::Dwell(d) => cfg.dwell = Some(d),
            SelectionModel::Gaze(g) => cfg.gaze = Some(g),
        }
        cfg
    }
}

/// A seeded synthetic participant bound to one cursor source and one way of
/// selecting.
#[derive(Debug, Clone)]
pub struct SyntheticUser {
    pub params: UserParams,
    pub model: SelectionModel,
    pub source: CursorSource,
    trials_done: u64,
}

impl SyntheticUser {
    pub fn new(params: UserParams, model: SelectionModel, source: CursorSource) -> Result<Self, SynthError> {
        params.validate()?;
        Ok(Self {
            params,
            model,
            source,
            trials_done: 0,
        })
    }

    fn trial_rng(&mut self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.params.seed);
        rng.set_stream(self.trials_done);
        self.trials_done += 1;
        rng
    }

    /// Runs one trial through `pipeline`. See [`simulate_pointing_trial`].
    pub fn point(
        &mut self,
        pipeline: &mut Pipeline,
        condition: FittsCondition,
        layout: TargetLayout,
        cue_t_ms: f64,
        start: Point,
        extra_delay_ms: f64,
    ) -> Result<TrialRecord, SynthError> {
        let mut rng = self.trial_rng();
        simulate_pointing_trial(self, &mut rng, pipeline, condition, layout, cue_t_ms, start, extra_delay_ms)
    }
}

fn normal(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Effective target width for a movement from `from`: the expanded width
/// when an adapter replaying the uncorrected trajectory expands the target
/// first, the base width otherwise.
fn effective_width(
    pipeline: &Pipeline,
    layout: &TargetLayout,
    target_id: u32,
    from: Point,
    to: Point,
    mt_ms: f64,
) -> Result<f64, SynthError> {
    let target = layout.get(target_id).ok_or(SynthError::NoTarget)?;
    if !pipeline.adaptive() || from.distance(to) == 0.0 {
        return Ok(target.base_width_px);
    }
    let cfg = pipeline.config().adaptation;
    let mut adapter = Adapter::new(cfg);
    let mut scratch = layout.clone();
    scratch.revert_all();
    for s in min_jerk_trajectory(from, to, 0.0, mt_ms, POINTING_PERIOD_MS, CursorSource::PointerProxy)? {
        if adapter.update(&mut scratch, &s)? {
            if let Some(first) = scratch.expanded() {
                return Ok(if first.id == target_id {
                    target.base_width_px * cfg.expansion_factor
                } else {
                    target.base_width_px
                });
            }
        }
    }
    Ok(target.base_width_px)
}

fn feed_cursor(
    pipeline: &mut Pipeline,
    samples: &[CursorSample],
    selected: &mut bool,
) -> Result<Option<TrialRecord>, SynthError> {
    for s in samples {
        for ev in pipeline.on_cursor(s)? {
            match ev {
                PipelineEvent::TrialResult(r) => return Ok(Some(r)),
                PipelineEvent::Selection(_) => *selected = true,
                PipelineEvent::TargetState(_) => {}
            }
        }
    }
    Ok(None)
}

fn scan(events: Vec<PipelineEvent>, selected: &mut bool) -> Option<TrialRecord> {
    for ev in events {
        match ev {
            PipelineEvent::TrialResult(r) => return Some(r),
            PipelineEvent::Selection(_) => *selected = true,
            PipelineEvent::TargetState(_) => {}
        }
    }
    None
}

/// One pointing trial, driven sample by sample through `pipeline`.
///
/// The cursor rests at `start` from the cue, starts moving after the
/// reaction time plus `extra_delay_ms`, and follows a 100 Hz minimum-jerk
/// path to the target centre plus Gaussian scatter. Movement time comes from
/// the Fitts line at the effective width plus Gaussian noise. The selection
/// is then confirmed according to the user's [`SelectionModel`]. A miss or a
/// distracter hit triggers a corrective movement from where the click
/// landed, until the pipeline reports the trial finished.
#[allow(clippy::too_many_arguments)]
pub fn simulate_pointing_trial(
    user: &SyntheticUser,
    rng: &mut impl Rng,
    pipeline: &mut Pipeline,
    condition: FittsCondition,
    layout: TargetLayout,
    cue_t_ms: f64,
    start: Point,
    extra_delay_ms: f64,
) -> Result<TrialRecord, SynthError> {
    let p = &user.params;
    let target = *layout.target().ok_or(SynthError::NoTarget)?;
    let aim = target.center();
    pipeline.start_trial(condition, layout.clone(), cue_t_ms);

    let mut selected = false;
    let mut pos = start;
    let mut t = cue_t_ms;
    let at_cue = CursorSample::new(t, pos.x, pos.y, user.source);
    if let Some(r) = feed_cursor(pipeline, &[at_cue], &mut selected)? {
        return Ok(r);
    }
    let mut delay = p.reaction_ms + extra_delay_ms;

    for _ in 0..MAX_ATTEMPTS {
        let z_mt = normal(rng);
        let (zx, zy) = (normal(rng), normal(rng));

        let d = pos.distance(aim);
        let base_cond = FittsCondition::new(d.max(f64::MIN_POSITIVE), target.base_width_px);
        let mut mt = fitts_mt(p, &base_cond).max(p.fitts_a_ms).max(MIN_MT_MS);
        let w_eff = effective_width(pipeline, &layout, target.id, pos, aim, mt)?;
        if w_eff != target.base_width_px {
            mt = fitts_mt(p, &FittsCondition::new(d, w_eff)).max(p.fitts_a_ms);
        }
        mt = (mt + p.mt_noise_ms * z_mt).max(MIN_MT_MS);
        let sigma = p.endpoint_noise_px.unwrap_or(w_eff * p.endpoint_noise_fraction);
        let end = Point::new(aim.x + sigma * zx, aim.y + sigma * zy);

        let move_start = t + delay;
        let path = min_jerk_trajectory(pos, end, move_start, mt, POINTING_PERIOD_MS, user.source)?;
        if let Some(r) = feed_cursor(pipeline, &path, &mut selected)? {
            return Ok(r);
        }
        let arrival = move_start + mt;
        pos = end;
        t = arrival;

        selected = false;
        let mut hold_k = 0u32;
        while !selected {
            let done = match user.model {
                SelectionModel::Mechanical => {
                    let down = SwitchEvent {
                        t_ms: arrival,
                        switch: InputSwitch::MechanicalLeft,
                        pressed: true,
                    };
                    let up = SwitchEvent { pressed: false, ..down };
                    let r = scan(pipeline.on_switch(&down)?, &mut selected);
                    pipeline.on_switch(&up)?;
                    if !selected && r.is_none() {
                        // a press the arbiter swallowed (debounce); try again
                        // on the next correction
                        selected = true;
                    }
                    r
                }
                SelectionModel::Dwell(_) => {
                    hold_k += 1;
                    t = arrival + f64::from(hold_k) * POINTING_PERIOD_MS;
                    let s = CursorSample::new(t, pos.x, pos.y, user.source);
                    feed_cursor(pipeline, &[s], &mut selected)?
                }
                SelectionModel::Gaze(_) => {
                    t = arrival + f64::from(hold_k) * GAZE_PERIOD_MS;
                    hold_k += 1;
                    scan(pipeline.on_gaze(&GazeSample::new(t, pos.x, pos.y))?, &mut selected)
                }
            };
            if let Some(r) = done {
                return Ok(r);
            }
        }
        delay = p.reaction_ms / 2.0;
    }
    // Give up: push the clock past the timeout so the pipeline closes the trial.
    let late = CursorSample::new(
        cue_t_ms + crate::harness::TRIAL_TIMEOUT_MS + 1.0,
        pos.x,
        pos.y,
        user.source,
    );
    feed_cursor(pipeline, &[late], &mut selected)?.ok_or(SynthError::NoTarget)
}

/// One full ring-task block: every grid condition `reps` times in a seeded
/// order, each trial starting from the screen centre.
pub fn run_pointing_block(
    params: &UserParams,
    model: SelectionModel,
    source: CursorSource,
    adaptive: bool,
    reps: usize,
    screen: ScreenSpec,
) -> Result<Vec<TrialRecord>, SynthError> {
    let mut layout_rng = ChaCha8Rng::seed_from_u64(params.seed ^ 0x5eed_1a70);
    let conditions = pointing_block(reps, &mut layout_rng);
    run_conditions(params, model, source, adaptive, &conditions, screen, &mut layout_rng)
}

pub fn run_conditions(
    params: &UserParams,
    model: SelectionModel,
    source: CursorSource,
    adaptive: bool,
    conditions: &[FittsCondition],
    screen: ScreenSpec,
    layout_rng: &mut impl Rng,
) -> Result<Vec<TrialRecord>, SynthError> {
    let modality = modality_name(source);
    let mut pipeline = Pipeline::new(model.pipeline_config(screen, adaptive, modality))?;
    let mut user = SyntheticUser::new(*params, model, source)?;
    let mut out = Vec::with_capacity(conditions.len());
    let mut cue = 0.0;
    for cond in conditions {
        let layout = ring_task(cond, DEFAULT_RING_TARGETS, layout_rng, &screen)?;
        let rec = user.point(&mut pipeline, *cond, layout, cue, screen.center(), 0.0)?;
        cue = rec.select_t_ms.max(pipeline.last_t().unwrap_or(cue)) + INTER_TRIAL_MS;
        out.push(rec);
    }
    Ok(out)
}

/// `n_trials` in-car dashboard selections with a mechanical switch.
pub fn run_incar_block(params: &UserParams, n_trials: usize, screen: ScreenSpec) -> Result<Vec<TrialRecord>, SynthError> {
    let mut task = IncarGridTask::new(params.seed ^ 0x1ca5, screen);
    let mut pipeline = Pipeline::new(PipelineConfig::mechanical(screen, false, "laser"))?;
    let mut user = SyntheticUser::new(*params, SelectionModel::Mechanical, CursorSource::Laser)?;
    let mut out = Vec::with_capacity(n_trials);
    let mut cue = 0.0;
    for _ in 0..n_trials {
        let layout = task.next_layout()?;
        let cond = incar_condition(&layout, screen)?;
        let rec = user.point(&mut pipeline, cond, layout, cue, screen.center(), 0.0)?;
        cue = pipeline.last_t().unwrap_or(cue) + INTER_TRIAL_MS;
        out.push(rec);
    }
    Ok(out)
}

/// Fitts condition of a dashboard layout: distance from the screen centre
/// to the target, and the target width.
pub fn incar_condition(layout: &TargetLayout, screen: ScreenSpec) -> Result<FittsCondition, SynthError> {
    let t = layout.target().ok_or(SynthError::NoTarget)?;
    Ok(FittsCondition::new(t.center().distance(screen.center()), t.base_width_px))
}

pub fn modality_name(source: CursorSource) -> &'static str {
    match source {
        CursorSource::Laser => "laser",
        CursorSource::Imu => "imu",
        CursorSource::Ir => "ir",
        CursorSource::Gaze => "gaze",
        CursorSource::PointerProxy => "pointer_proxy",
    }
}

/// Scripted glance: home fixation from the cue, a jump into `region` after a
/// reaction drawn from [800, 1400] ms, a stay drawn from [200, 1000] ms, then
/// back home for `tail_ms`. The in-region fixation is offset from the region
/// centre by up to the ranges drawn here, clipped to stay inside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scanpath {
    pub samples: Vec<GazeSample>,
    pub reaction_ms: f64,
    pub glance_ms: f64,
    pub fixation: Point,
}

pub const GAZE_REACTION_RANGE_MS: (f64, f64) = (800.0, 1400.0);
pub const GLANCE_RANGE_MS: (f64, f64) = (200.0, 1000.0);
pub const GAZE_X_OFFSET_RANGE_PX: (f64, f64) = (100.0, 200.0);
pub const GAZE_Y_OFFSET_RANGE_PX: (f64, f64) = (0.0, 60.0);
const FIXATION_JITTER_PX: f64 = 1.5;

pub fn gaze_scanpath(rng: &mut impl Rng, region: &Rect, home: Point, cue_t_ms: f64, tail_ms: f64) -> Scanpath {
    let reaction = rng.random_range(GAZE_REACTION_RANGE_MS.0..=GAZE_REACTION_RANGE_MS.1);
    let glance = rng.random_range(GLANCE_RANGE_MS.0..=GLANCE_RANGE_MS.1);
    let margin = 4.0 * FIXATION_JITTER_PX;
    let max_dx = (region.width / 2.0 - margin).max(0.0);
    let max_dy = (region.height / 2.0 - margin).max(0.0);
    let sx = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let sy = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let dx = rng.random_range(GAZE_X_OFFSET_RANGE_PX.0..=GAZE_X_OFFSET_RANGE_PX.1).min(max_dx);
    let dy = rng.random_range(GAZE_Y_OFFSET_RANGE_PX.0..=GAZE_Y_OFFSET_RANGE_PX.1).min(max_dy);
    let c = region.center();
    let fixation = Point::new(c.x + sx * dx, c.y + sy * dy);

    let enter = cue_t_ms + reaction;
    let leave = enter + glance;
    let end = leave + tail_ms;
    let mut samples = Vec::new();
    let mut k = 0u32;
    loop {
        let t = cue_t_ms + f64::from(k) * GAZE_PERIOD_MS;
        if t > end {
            break;
        }
        let base = if t >= enter && t < leave { fixation } else { home };
        let jx = (normal(rng) * FIXATION_JITTER_PX).clamp(-margin, margin);
        let jy = (normal(rng) * FIXATION_JITTER_PX).clamp(-margin, margin);
        samples.push(GazeSample::new(t, base.x + jx, base.y + jy));
        k += 1;
    }
    Scanpath {
        samples,
        reaction_ms: reaction,
        glance_ms: glance,
        fixation,
    }
}

/// Damping ratio of the lane keeper's closed loop.
pub const LANE_KEEPER_DAMPING: f64 = 0.8;
pub const MAX_STEER_RAD: f64 = 0.5;

/// Proportional steering on lateral error with heading damping. For the
/// linearized bicycle model this places the closed-loop poles at damping
/// ratio [`LANE_KEEPER_DAMPING`] regardless of speed.
pub fn lane_keeping_control(state: &VehicleState, reference: &ReferencePath, gain: f64) -> f64 {
    let e = state.y_m - reference.y_ref(state.s_m);
    let heading_err = state.heading_rad - reference.heading_ref(state.s_m);
    let damping = 2.0 * LANE_KEEPER_DAMPING * (gain * WHEELBASE_M).sqrt();
    (-gain * e - damping * heading_err).clamp(-MAX_STEER_RAD, MAX_STEER_RAD)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveConfig {
    pub duration_ms: f64,
    pub dual_task: bool,
    pub gain: f64,
    /// σ of the per-tick heading disturbance (rad).
    pub heading_noise_rad: f64,
    pub target_speed_mps: f64,
    pub first_sign_m: f64,
    pub sign_spacing_m: f64,
    pub seed: u64,
}

impl Default for DriveConfig {
    fn default() -> Self {
        Self {
            duration_ms: 90_000.0,
            dual_task: false,
            gain: 0.1,
            heading_noise_rad: 0.002,
            target_speed_mps: 70.0 / 3.6,
            first_sign_m: 100.0,
            sign_spacing_m: 150.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveRun {
    pub log: Vec<DriveLogEntry>,
    pub reference: ReferencePath,
    pub cues: CueSchedule,
    pub trials: Vec<TrialRecord>,
    pub response_times_ms: Vec<f64>,
    pub mean_deviation_m: f64,
    pub steering_sd_rad: f64,
    pub max_speed_mps: f64,
}

/// Closed-loop lane-change drive. In dual-task mode every cue starts an
/// in-car grid selection; the lane keeper holds its last steering command
/// from the cue until the selection lands. Disturbances are drawn from a
/// stream that does not depend on the mode.
pub fn simulate_drive(params: &UserParams, cfg: &DriveConfig, screen: ScreenSpec) -> Result<DriveRun, SynthError> {
    let course_len = cfg.target_speed_mps.min(SPEED_CAP_MPS) * cfg.duration_ms / 1000.0;
    let reference = ReferencePath::lane_change_course(cfg.seed, course_len, cfg.first_sign_m, cfg.sign_spacing_m);
    let cues = schedule_cues(cfg.seed ^ 0xc0e5, cfg.duration_ms);
    let mut noise = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xd21e);

    let mut task = IncarGridTask::new(cfg.seed ^ 0x1ca5, screen);
    let mut pipeline = Pipeline::new(PipelineConfig::mechanical(screen, false, "laser"))?;
    let mut user = SyntheticUser::new(*params, SelectionModel::Mechanical, CursorSource::Laser)?;

    let mut state = VehicleState {
        y_m: reference.y_ref(0.0),
        ..VehicleState::default()
    };
    let mut log = vec![DriveLogEntry::from(&state)];
    let mut trials = Vec::new();
    let mut response_times = Vec::new();
    let mut frozen_until = f64::NEG_INFINITY;
    let mut next_cue = 0usize;
    let mut steer = 0.0;
    let mut max_speed: f64 = 0.0;

    while state.t_ms < cfg.duration_ms {
        if cfg.dual_task && next_cue < cues.cue_t_ms.len() && state.t_ms >= cues.cue_t_ms[next_cue] {
            let cue = cues.cue_t_ms[next_cue];
            next_cue += 1;
            let layout = task.next_layout()?;
            let cond = incar_condition(&layout, screen)?;
            let rec = user.point(&mut pipeline, cond, layout, cue, screen.center(), params.context_switch_ms)?;
            frozen_until = rec.select_t_ms;
            response_times.push(rec.selection_time_ms());
            trials.push(rec);
        }
        if state.t_ms >= frozen_until {
            steer = lane_keeping_control(&state, &reference, cfg.gain);
        }
        let accel = (cfg.target_speed_mps - state.speed_mps).clamp(-3.0, 3.0);
        state = step_vehicle(&state, steer, accel, TICK_MS)?;
        state.heading_rad += cfg.heading_noise_rad * normal(&mut noise);
        max_speed = max_speed.max(state.speed_mps);
        log.push(DriveLogEntry::from(&state));
    }

    let driven: Vec<(f64, f64)> = dedup_arclength(&log);
    let steering: Vec<f64> = log.iter().map(|e| e.steering_rad).collect();
    Ok(DriveRun {
        mean_deviation_m: mean_lane_deviation(&driven, &reference)?,
        steering_sd_rad: steering_angle_sd(&steering)?,
        max_speed_mps: max_speed,
        log,
        reference,
        cues,
        trials,
        response_times_ms: response_times,
    })
}

/// `(s, y)` pairs with standstill samples (repeated `s`) dropped.
pub fn dedup_arclength(log: &[DriveLogEntry]) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(log.len());
    for e in log {
        if out.last().is_none_or(|last| e.s_m > last.0) {
            out.push((e.s_m, e.y_m));
        }
    }
    out
}
