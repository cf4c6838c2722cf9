//! Lane-change primary task: a kinematic bicycle vehicle, a three-lane
//! reference path, driving metrics and secondary-task cue scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::selection::SelectionEvent;

pub const SPEED_CAP_MPS: f64 = 60.0 / 3.6;
pub const WHEELBASE_M: f64 = 2.6;
pub const LANE_WIDTH_M: f64 = 3.5;
pub const LANE_CENTERS_M: [f64; 3] = [-LANE_WIDTH_M, 0.0, LANE_WIDTH_M];
pub const TRANSITION_LENGTH_M: f64 = 30.0;
pub const CUE_GAP_MIN_MS: f64 = 5000.0;
pub const CUE_GAP_MAX_MS: f64 = 7000.0;
pub const TICK_MS: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DrivingError {
    #[error("time step {0} ms outside (0, 100]")]
    InvalidStep(f64),
    #[error("need at least two samples")]
    TooFewSamples,
    #[error("arclength not strictly increasing at sample {0}")]
    NonMonotoneArclength(usize),
    #[error("selection at {select_t} ms precedes cue at {cue_t} ms")]
    SelectionBeforeCue { cue_t: f64, select_t: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState {
    pub s_m: f64,
    pub y_m: f64,
    pub heading_rad: f64,
    pub speed_mps: f64,
    pub steering_rad: f64,
    pub t_ms: f64,
}

/// One explicit-Euler step of the kinematic bicycle model. Speed is clamped
/// to `[0, 60 km/h]` after the acceleration update.
pub fn step_vehicle(
    state: &VehicleState,
    steering_cmd_rad: f64,
    accel_cmd_mps2: f64,
    dt_ms: f64,
) -> Result<VehicleState, DrivingError> {
    if !(dt_ms > 0.0 && dt_ms <= 100.0) {
        return Err(DrivingError::InvalidStep(dt_ms));
    }
    let dt = dt_ms / 1000.0;
    let v = state.speed_mps;
    Ok(VehicleState {
        s_m: state.s_m + v * state.heading_rad.cos() * dt,
        y_m: state.y_m + v * state.heading_rad.sin() * dt,
        heading_rad: state.heading_rad + v / WHEELBASE_M * steering_cmd_rad.tan() * dt,
        speed_mps: (v + accel_cmd_mps2 * dt).clamp(0.0, SPEED_CAP_MPS),
        steering_rad: steering_cmd_rad,
        t_ms: state.t_ms + dt_ms,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaneChange {
    pub s_start_m: f64,
    pub from_y_m: f64,
    pub to_y_m: f64,
}

/// Piecewise lateral reference: lane centres joined by raised-cosine
/// transitions of [`TRANSITION_LENGTH_M`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferencePath {
    pub start_y_m: f64,
    pub changes: Vec<LaneChange>,
}

impl ReferencePath {
    pub fn straight(y_m: f64) -> Self {
        Self {
            start_y_m: y_m,
            changes: Vec::new(),
        }
    }

    /// Signboards every `sign_spacing_m` starting at `first_sign_m`, each
    /// demanding a seeded change to a different lane.
    pub fn lane_change_course(seed: u64, length_m: f64, first_sign_m: f64, sign_spacing_m: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut lane = 1usize;
        let mut changes = Vec::new();
        let mut s = first_sign_m;
        while s + TRANSITION_LENGTH_M <= length_m {
            let next = (lane + rng.random_range(1..3)) % 3;
            changes.push(LaneChange {
                s_start_m: s,
                from_y_m: LANE_CENTERS_M[lane],
                to_y_m: LANE_CENTERS_M[next],
            });
            lane = next;
            s += sign_spacing_m;
        }
        Self {
            start_y_m: LANE_CENTERS_M[1],
            changes,
        }
    }

    fn active(&self, s: f64) -> (f64, Option<&LaneChange>) {
        let mut y = self.start_y_m;
        for c in &self.changes {
            if s < c.s_start_m {
                break;
            }
            if s < c.s_start_m + TRANSITION_LENGTH_M {
                return (y, Some(c));
            }
            y = c.to_y_m;
        }
        (y, None)
    }

    pub fn y_ref(&self, s: f64) -> f64 {
        match self.active(s) {
            (_, Some(c)) => {
                let u = (s - c.s_start_m) / TRANSITION_LENGTH_M;
                c.from_y_m + (c.to_y_m - c.from_y_m) * (1.0 - (std::f64::consts::PI * u).cos()) / 2.0
            }
            (y, None) => y,
        }
    }

    /// Heading of the reference path, `atan(dy_ref/ds)`.
    pub fn heading_ref(&self, s: f64) -> f64 {
        match self.active(s) {
            (_, Some(c)) => {
                let u = (s - c.s_start_m) / TRANSITION_LENGTH_M;
                let slope = (c.to_y_m - c.from_y_m) * std::f64::consts::PI / (2.0 * TRANSITION_LENGTH_M)
                    * (std::f64::consts::PI * u).sin();
                slope.atan()
            }
            (_, None) => 0.0,
        }
    }
}

/// Arclength-weighted mean absolute lateral deviation: trapezoidal integral
/// of `|y - y_ref(s)|` over `s`, divided by the covered span.
pub fn mean_lane_deviation(driven: &[(f64, f64)], reference: &ReferencePath) -> Result<f64, DrivingError> {
    if driven.len() < 2 {
        return Err(DrivingError::TooFewSamples);
    }
    if let Some(i) = driven.windows(2).position(|w| w[1].0 <= w[0].0) {
        return Err(DrivingError::NonMonotoneArclength(i + 1));
    }
    let dev = |&(s, y): &(f64, f64)| (y - reference.y_ref(s)).abs();
    let integral: f64 = driven
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (dev(&w[0]) + dev(&w[1])) / 2.0)
        .sum();
    Ok(integral / (driven[driven.len() - 1].0 - driven[0].0))
}

/// Population standard deviation of steering angles.
pub fn steering_angle_sd(steering_rad: &[f64]) -> Result<f64, DrivingError> {
    if steering_rad.len() < 2 {
        return Err(DrivingError::TooFewSamples);
    }
    let n = steering_rad.len() as f64;
    let mean = steering_rad.iter().sum::<f64>() / n;
    Ok((steering_rad.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CueSchedule {
    pub cue_t_ms: Vec<f64>,
}

/// Cue times in `(0, duration_ms]`, each gap (including the first, from 0)
/// uniform in `[5000, 7000]` ms.
pub fn schedule_cues(seed: u64, duration_ms: f64) -> CueSchedule {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cues = Vec::new();
    let mut t = 0.0;
    loop {
        t += rng.random_range(CUE_GAP_MIN_MS..=CUE_GAP_MAX_MS);
        if t > duration_ms {
            break;
        }
        cues.push(t);
    }
    CueSchedule { cue_t_ms: cues }
}

pub fn response_time(cue_t_ms: f64, selection: &SelectionEvent) -> Result<f64, DrivingError> {
    if selection.t_ms < cue_t_ms {
        return Err(DrivingError::SelectionBeforeCue {
            cue_t: cue_t_ms,
            select_t: selection.t_ms,
        });
    }
    Ok(selection.t_ms - cue_t_ms)
}

/// One line of a drive log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveLogEntry {
    pub t_ms: f64,
    pub s_m: f64,
    pub y_m: f64,
    pub steering_rad: f64,
    pub speed_mps: f64,
}

impl From<&VehicleState> for DriveLogEntry {
    fn from(v: &VehicleState) -> Self {
        Self {
            t_ms: v.t_ms,
            s_m: v.s_m,
            y_m: v.y_m,
            steering_rad: v.steering_rad,
            speed_mps: v.speed_mps,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Point;
    use crate::selection::SwitchKind;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn straight_line() {
        let s0 = VehicleState { speed_mps: 15.0, ..Default::default() };
        let s1 = step_vehicle(&s0, 0.0, 0.0, 10.0).unwrap();
        assert_eq!(s1.y_m, 0.0);
        assert_abs_diff_eq!(s1.s_m, 0.15, epsilon = 1e-12);
        assert_eq!(s1.t_ms, 10.0);
    }

    #[test]
    fn speed_capped() {
        let s0 = VehicleState { speed_mps: 16.0, ..Default::default() };
        // would reach 19.4 m/s (70 km/h)
        let s1 = step_vehicle(&s0, 0.0, 34.0, 100.0).unwrap();
        assert_abs_diff_eq!(s1.speed_mps, 16.666_666_666_666_668, epsilon = 1e-12);
        let s2 = step_vehicle(&s1, 0.0, -1000.0, 100.0).unwrap();
        assert_eq!(s2.speed_mps, 0.0);
    }

    #[test]
    fn zero_step_rejected() {
        let s0 = VehicleState::default();
        assert_eq!(step_vehicle(&s0, 0.0, 0.0, 0.0), Err(DrivingError::InvalidStep(0.0)));
        assert!(step_vehicle(&s0, 0.0, 0.0, 100.5).is_err());
    }

    #[test]
    fn deviation_examples() {
        let r = ReferencePath::straight(0.0);
        let exact: Vec<_> = (0..10).map(|i| (f64::from(i), 0.0)).collect();
        assert_eq!(mean_lane_deviation(&exact, &r).unwrap(), 0.0);
        let offset: Vec<_> = (0..10).map(|i| (f64::from(i), 0.5)).collect();
        assert_abs_diff_eq!(mean_lane_deviation(&offset, &r).unwrap(), 0.5, epsilon = 1e-12);
        // trapezoids over [0,1], [1,2], [2,3]: 0 + 0.5 + 1 = 1.5 over span 3
        let half = [(0.0, 0.0), (1.0, 0.0), (2.0, 1.0), (3.0, 1.0)];
        assert_abs_diff_eq!(mean_lane_deviation(&half, &r).unwrap(), 0.5, epsilon = 1e-12);
        assert_eq!(
            mean_lane_deviation(&[(0.0, 0.0), (0.0, 1.0)], &r),
            Err(DrivingError::NonMonotoneArclength(1))
        );
    }

    #[test]
    fn steering_sd_examples() {
        assert_abs_diff_eq!(steering_angle_sd(&[0.1; 20]).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(steering_angle_sd(&[-0.1, 0.1]).unwrap(), 0.1, epsilon = 1e-15);
        let square: Vec<f64> = (0..1000).map(|i| if (i / 50) % 2 == 0 { 0.2 } else { -0.2 }).collect();
        let sine: Vec<f64> = (0..1000)
            .map(|i| 0.2 * (std::f64::consts::TAU * f64::from(i) / 100.0).sin())
            .collect();
        let (sq, si) = (steering_angle_sd(&square).unwrap(), steering_angle_sd(&sine).unwrap());
        assert_abs_diff_eq!(sq, 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(si, 0.2 / 2f64.sqrt(), epsilon = 1e-9);
        assert!(sq > si);
    }

    #[test]
    fn cue_counts() {
        for seed in 0..50 {
            let n = schedule_cues(seed, 60_000.0).cue_t_ms.len();
            assert!((8..=12).contains(&n), "{n}");
        }
        assert_eq!(schedule_cues(3, 60_000.0), schedule_cues(3, 60_000.0));
        assert!(schedule_cues(3, 4000.0).cue_t_ms.is_empty());
    }

    #[test]
    fn response_time_examples() {
        let sel = SelectionEvent::at(SwitchKind::Gaze, 11_450.0, Point::new(0.0, 0.0));
        assert_eq!(response_time(10_000.0, &sel).unwrap(), 1450.0);
        assert!(matches!(response_time(12_000.0, &sel), Err(DrivingError::SelectionBeforeCue { .. })));
    }

    #[test]
    fn reference_is_continuous_and_monotone() {
        let r = ReferencePath::lane_change_course(4, 2000.0, 100.0, 150.0);
        assert!(!r.changes.is_empty());
        for c in &r.changes {
            assert_ne!(c.from_y_m, c.to_y_m);
            let mut prev = r.y_ref(c.s_start_m - 1e-9);
            assert_abs_diff_eq!(prev, c.from_y_m, epsilon = 1e-6);
            for k in 1..=300 {
                let y = r.y_ref(c.s_start_m + f64::from(k) * 0.1);
                let step = y - prev;
                assert!(step * (c.to_y_m - c.from_y_m) >= -1e-12);
                assert!(step.abs() < 0.1);
                prev = y;
            }
            assert_abs_diff_eq!(prev, c.to_y_m, epsilon = 1e-9);
        }
    }

    proptest! {
        #[test]
        fn speed_never_exceeds_cap(cmds in prop::collection::vec((-0.5..0.5f64, -20.0..40.0f64, 1.0..100.0f64), 1..300)) {
            let mut s = VehicleState { speed_mps: 10.0, ..Default::default() };
            for (steer, accel, dt) in cmds {
                s = step_vehicle(&s, steer, accel, dt).unwrap();
                prop_assert!(s.speed_mps <= SPEED_CAP_MPS && s.speed_mps >= 0.0);
            }
        }

        #[test]
        fn deviation_translation_and_scale(ys in prop::collection::vec(-3.0..3.0f64, 2..50), c in -10.0..10.0f64, k in 0.1..10.0f64) {
            let driven: Vec<_> = ys.iter().enumerate().map(|(i, &y)| (i as f64 * 2.0, y)).collect();
            let base = mean_lane_deviation(&driven, &ReferencePath::straight(0.5)).unwrap();
            let shifted: Vec<_> = driven.iter().map(|&(s, y)| (s, y + c)).collect();
            let d_shift = mean_lane_deviation(&shifted, &ReferencePath::straight(0.5 + c)).unwrap();
            prop_assert!((base - d_shift).abs() < 1e-9);
            let scaled: Vec<_> = driven.iter().map(|&(s, y)| (s, y * k)).collect();
            let d_scale = mean_lane_deviation(&scaled, &ReferencePath::straight(0.5 * k)).unwrap();
            prop_assert!((d_scale - k * base).abs() < 1e-9 * (1.0 + k));
        }
    }
}
