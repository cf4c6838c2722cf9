use serde::{Deserialize, Serialize};

use super::SourceError;
use crate::model::{Point, ScreenPoint, ScreenSpec};

/// Yaw and pitch limits (degrees) recorded by pointing the finger-worn
/// sensor at the display corners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImuCalibration {
    #[serde(rename = "yaw_LL")]
    pub yaw_ll: f64,
    #[serde(rename = "yaw_RL")]
    pub yaw_rl: f64,
    #[serde(rename = "pitch_TL")]
    pub pitch_tl: f64,
    #[serde(rename = "pitch_BL")]
    pub pitch_bl: f64,
}

impl ImuCalibration {
    pub fn validate(&self) -> Result<(), SourceError> {
        let vals = [self.yaw_ll, self.yaw_rl, self.pitch_tl, self.pitch_bl];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(SourceError::NonFinite);
        }
        if self.yaw_ll == self.yaw_rl {
            return Err(SourceError::ZeroSpan("yaw"));
        }
        if self.pitch_tl == self.pitch_bl {
            return Err(SourceError::ZeroSpan("pitch"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnglePair {
    pub yaw: f64,
    pub pitch: f64,
}

impl AnglePair {
    pub const fn new(yaw: f64, pitch: f64) -> Self {
        Self { yaw, pitch }
    }
}

/// Sensor angles captured at the top-left, top-right, bottom-right and
/// bottom-left display corners, in that order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCorners(pub [AnglePair; 4]);

/// Derives the inner limits of the captured corner quad:
/// top = min of the top pitches, bottom = max of the bottom pitches,
/// left = max of the left yaws, right = min of the right yaws.
pub fn calibrate_imu(corners: &CalibrationCorners) -> Result<ImuCalibration, SourceError> {
    let [tl, tr, br, bl] = corners.0;
    let cal = ImuCalibration {
        pitch_tl: tl.pitch.min(tr.pitch),
        pitch_bl: br.pitch.max(bl.pitch),
        yaw_ll: tl.yaw.max(bl.yaw),
        yaw_rl: tr.yaw.min(br.yaw),
    };
    cal.validate()?;
    Ok(cal)
}

/// Unclamped mapping. `x = (LL - yaw) * resx / |RL - LL|` and, anchored on the
/// top edge, `y = (TL - pitch) * resy / |TL - BL|`.
pub fn imu_map(cal: &ImuCalibration, yaw: f64, pitch: f64, screen: &ScreenSpec) -> Point {
    let x = (cal.yaw_ll - yaw) * screen.width() / (cal.yaw_rl - cal.yaw_ll).abs();
    let y = (cal.pitch_tl - pitch) * screen.height() / (cal.pitch_tl - cal.pitch_bl).abs();
    Point::new(x, y)
}

/// [`imu_map`] clamped to `[0, res - 1]` on each axis.
pub fn imu_to_screen(cal: &ImuCalibration, yaw: f64, pitch: f64, screen: &ScreenSpec) -> ScreenPoint {
    ScreenPoint::clamped(
        imu_map(cal, yaw, pitch, screen),
        screen.width() - 1.0,
        screen.height() - 1.0,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn symmetric() -> ImuCalibration {
        ImuCalibration {
            yaw_ll: 30.0,
            yaw_rl: -30.0,
            pitch_tl: 20.0,
            pitch_bl: -20.0,
        }
    }

    #[test]
    fn inner_limits_from_corners() {
        let cal = calibrate_imu(&CalibrationCorners([
            AnglePair::new(20.0, 15.0),
            AnglePair::new(-20.0, 14.0),
            AnglePair::new(-21.0, -15.0),
            AnglePair::new(21.0, -14.0),
        ]))
        .unwrap();
        assert_eq!(
            cal,
            ImuCalibration {
                yaw_ll: 21.0,
                yaw_rl: -21.0,
                pitch_tl: 14.0,
                pitch_bl: -14.0
            }
        );
    }

    #[test]
    fn symmetric_corners() {
        let cal = calibrate_imu(&CalibrationCorners([
            AnglePair::new(30.0, 20.0),
            AnglePair::new(-30.0, 20.0),
            AnglePair::new(-30.0, -20.0),
            AnglePair::new(30.0, -20.0),
        ]))
        .unwrap();
        assert_eq!(cal, symmetric());
    }

    #[test]
    fn identical_corners_have_zero_span() {
        let c = AnglePair::new(5.0, 5.0);
        assert!(matches!(
            calibrate_imu(&CalibrationCorners([c; 4])),
            Err(SourceError::ZeroSpan(_))
        ));
    }

    #[test]
    fn mapping_examples() {
        let s = ScreenSpec::default();
        let p = imu_to_screen(&symmetric(), 30.0, 20.0, &s);
        assert_eq!((p.x, p.y, p.out_of_bounds), (0.0, 0.0, false));
        let p = imu_to_screen(&symmetric(), 0.0, 0.0, &s);
        assert_eq!((p.x, p.y, p.out_of_bounds), (512.0, 384.0, false));
        let raw = imu_map(&symmetric(), -30.0, -20.0, &s);
        assert_eq!((raw.x, raw.y), (1024.0, 768.0));
        let p = imu_to_screen(&symmetric(), -30.0, -20.0, &s);
        assert_eq!((p.x, p.y, p.out_of_bounds), (1023.0, 767.0, true));
    }

    proptest! {
        #[test]
        fn affine_and_monotone(
            ll in 5.0..60.0f64, rl in -60.0..-5.0f64,
            tl in 5.0..45.0f64, bl in -45.0..-5.0f64,
            yaw in -70.0..70.0f64, dyaw in 0.01..10.0f64,
            pitch in -50.0..50.0f64,
        ) {
            let cal = ImuCalibration { yaw_ll: ll, yaw_rl: rl, pitch_tl: tl, pitch_bl: bl };
            let s = ScreenSpec::default();
            let a = imu_map(&cal, yaw, pitch, &s);
            let b = imu_map(&cal, yaw + dyaw, pitch, &s);
            prop_assert!(b.x < a.x);
            prop_assert!((a.y - b.y).abs() < 1e-9);
            // affine: midpoint of inputs maps to midpoint of outputs
            let m = imu_map(&cal, yaw + dyaw / 2.0, pitch, &s);
            prop_assert!((m.x - (a.x + b.x) / 2.0).abs() < 1e-9);
            let c0 = imu_map(&cal, ll, tl, &s);
            let c2 = imu_map(&cal, rl, bl, &s);
            prop_assert!(c0.x.abs() < 1e-9 && c0.y.abs() < 1e-9);
            prop_assert!((c2.x - 1024.0).abs() < 1e-9 && (c2.y - 768.0).abs() < 1e-9);
        }
    }
}
