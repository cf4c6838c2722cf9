use serde::{Deserialize, Serialize};

use super::SourceError;
use crate::model::{Point, ScreenPoint, ScreenSpec};

/// Constants of the orthogonal fingertip-to-screen projection. `w` and `h`
/// are the sensor-space extents (mm) that span the screen width and height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeapCalibration {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub w: f64,
    pub h: f64,
}

impl LeapCalibration {
    pub fn validate(&self) -> Result<(), SourceError> {
        if [self.a, self.b, self.c, self.d, self.w, self.h]
            .iter()
            .any(|v| !v.is_finite())
        {
            return Err(SourceError::NonFinite);
        }
        if self.w <= 0.0 {
            return Err(SourceError::NonPositiveExtent("w"));
        }
        if self.h <= 0.0 {
            return Err(SourceError::NonPositiveExtent("h"));
        }
        Ok(())
    }
}

/// Fingertip position in the sensor frame (mm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FingertipSample {
    pub ftp_x: f64,
    pub ftp_y: f64,
    pub ftp_z: f64,
    pub t_ms: f64,
}

/// `ScreenX = W / w * (x + a)`, `ScreenY = H / h * (b + c*y - d*z)`.
pub fn fingertip_map(cal: &LeapCalibration, ftp: &FingertipSample, screen: &ScreenSpec) -> Point {
    Point::new(
        screen.width() / cal.w * (ftp.ftp_x + cal.a),
        screen.height() / cal.h * (cal.b + cal.c * ftp.ftp_y - cal.d * ftp.ftp_z),
    )
}

pub fn fingertip_to_screen(cal: &LeapCalibration, ftp: &FingertipSample, screen: &ScreenSpec) -> ScreenPoint {
    ScreenPoint::clamped(
        fingertip_map(cal, ftp, screen),
        screen.width() - 1.0,
        screen.height() - 1.0,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cal() -> LeapCalibration {
        LeapCalibration {
            a: -100.0,
            b: -50.0,
            c: 1.0,
            d: 0.5,
            w: 400.0,
            h: 300.0,
        }
    }

    fn ftp(x: f64, y: f64, z: f64) -> FingertipSample {
        FingertipSample {
            ftp_x: x,
            ftp_y: y,
            ftp_z: z,
            t_ms: 0.0,
        }
    }

    #[test]
    fn hand_evaluated_points() {
        let s = ScreenSpec::default();
        assert_eq!(fingertip_to_screen(&cal(), &ftp(100.0, 200.0, 100.0), &s).x, 0.0);
        let p = fingertip_to_screen(&cal(), &ftp(300.0, 200.0, 100.0), &s);
        assert_eq!(p.x, 512.0);
        assert_eq!(p.y, 256.0);
        assert!(!p.out_of_bounds);
    }

    #[test]
    fn clamps_beyond_extent() {
        let p = fingertip_to_screen(&cal(), &ftp(600.0, 200.0, 100.0), &ScreenSpec::default());
        assert_eq!(p.x, 1023.0);
        assert!(p.out_of_bounds);
    }

    #[test]
    fn rejects_zero_extent() {
        let bad = LeapCalibration { w: 0.0, ..cal() };
        assert_eq!(bad.validate(), Err(SourceError::NonPositiveExtent("w")));
    }

    proptest! {
        #[test]
        fn linear_per_axis(x in -500.0..500.0f64, dx in -100.0..100.0f64,
                           y in -500.0..500.0f64, z in -500.0..500.0f64, dz in -100.0..100.0f64) {
            let s = ScreenSpec::default();
            let base = fingertip_map(&cal(), &ftp(x, y, z), &s);
            let moved = fingertip_map(&cal(), &ftp(x + dx, y, z), &s);
            prop_assert!((moved.x - base.x - 1024.0 / 400.0 * dx).abs() < 1e-9);
            prop_assert_eq!(moved.y, base.y);
            let moved = fingertip_map(&cal(), &ftp(x, y, z + dz), &s);
            prop_assert!((moved.y - base.y + 768.0 / 300.0 * 0.5 * dz).abs() < 1e-9);
        }
    }
}
