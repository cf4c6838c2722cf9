//! Shared geometry, screen/session configuration and visual-angle conversion.
//!
//! Screen coordinates have their origin at the top-left corner with `y`
//! increasing downward. Timestamps are milliseconds on a session-monotonic
//! clock, carried as `f64` so that analytically generated movement times are
//! not quantized.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adaptation::AdaptationConfig;
use crate::gaze::GazeSwitchConfig;
use crate::sources::{Homography, ImuCalibration, LeapCalibration};

/// Default eye-to-display distance used to realize visual-angle rules.
pub const DEFAULT_VIEWING_DISTANCE_MM: f64 = 650.0;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum ModelError {
    #[error("non-positive screen dimension: {0}")]
    NonPositiveDimension(ScreenField),
    #[error("visual angle {0} deg outside [0, 90)")]
    AngleOutOfRange(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScreenField {
    Width,
    Height,
    Pitch,
    ViewingDistance,
}

impl std::fmt::Display for ScreenField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ScreenField::Width => "width_px",
            ScreenField::Height => "height_px",
            ScreenField::Pitch => "pixel_pitch_mm",
            ScreenField::ViewingDistance => "viewing_distance_mm",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScreenSpec {
    pub width_px: i64,
    pub height_px: i64,
    pub pixel_pitch_mm: f64,
    pub viewing_distance_mm: f64,
}

impl Default for ScreenSpec {
    /// 1024×768 at 0.42 mm/px, viewed from 650 mm.
    fn default() -> Self {
        Self {
            width_px: 1024,
            height_px: 768,
            pixel_pitch_mm: 0.42,
            viewing_distance_mm: DEFAULT_VIEWING_DISTANCE_MM,
        }
    }
}

impl ScreenSpec {
    pub fn new(width_px: i64, height_px: i64, pixel_pitch_mm: f64, viewing_distance_mm: f64) -> Self {
        Self {
            width_px,
            height_px,
            pixel_pitch_mm,
            viewing_distance_mm,
        }
    }

    pub fn width(&self) -> f64 {
        self.width_px as f64
    }

    pub fn height(&self) -> f64 {
        self.height_px as f64
    }

    pub fn center(&self) -> Point {
        Point::new(self.width() / 2.0, self.height() / 2.0)
    }
}

/// Returns `spec` unchanged when every dimension is strictly positive.
pub fn validate_screen_spec(spec: ScreenSpec) -> Result<ScreenSpec, ModelError> {
    if spec.width_px <= 0 {
        return Err(ModelError::NonPositiveDimension(ScreenField::Width));
    }
    if spec.height_px <= 0 {
        return Err(ModelError::NonPositiveDimension(ScreenField::Height));
    }
    // `!(x > 0)` also rejects NaN.
    if !(spec.pixel_pitch_mm > 0.0) {
        return Err(ModelError::NonPositiveDimension(ScreenField::Pitch));
    }
    if !(spec.viewing_distance_mm > 0.0) {
        return Err(ModelError::NonPositiveDimension(ScreenField::ViewingDistance));
    }
    Ok(spec)
}

/// On-screen radius in pixels subtended by a cone of `full_angle_deg` at the
/// configured viewing distance: `distance * tan(angle / 2) / pitch`.
pub fn visual_angle_to_pixels(full_angle_deg: f64, spec: &ScreenSpec) -> Result<f64, ModelError> {
    if !(0.0..90.0).contains(&full_angle_deg) {
        return Err(ModelError::AngleOutOfRange(full_angle_deg));
    }
    let half = (full_angle_deg / 2.0).to_radians();
    Ok(spec.viewing_distance_mm * half.tan() / spec.pixel_pitch_mm)
}

/// Inverse of [`visual_angle_to_pixels`].
pub fn pixels_to_visual_angle(radius_px: f64, spec: &ScreenSpec) -> f64 {
    2.0 * (radius_px * spec.pixel_pitch_mm / spec.viewing_distance_mm).atan().to_degrees()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// A mapped screen position. `out_of_bounds` is set when the raw mapping fell
/// outside the screen and the coordinates were clamped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScreenPoint {
    pub x: f64,
    pub y: f64,
    pub out_of_bounds: bool,
}

impl ScreenPoint {
    /// Clamps `raw` into `[0, max_x] × [0, max_y]`.
    pub fn clamped(raw: Point, max_x: f64, max_y: f64) -> Self {
        let x = raw.x.clamp(0.0, max_x);
        let y = raw.y.clamp(0.0, max_y);
        Self {
            x,
            y,
            out_of_bounds: x != raw.x || y != raw.y,
        }
    }

    pub fn point(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CursorSource {
    Laser,
    Imu,
    Ir,
    Gaze,
    PointerProxy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CursorSample {
    pub t_ms: f64,
    pub x_px: f64,
    pub y_px: f64,
    pub source: CursorSource,
}

impl CursorSample {
    pub fn new(t_ms: f64, x_px: f64, y_px: f64, source: CursorSource) -> Self {
        Self {
            t_ms,
            x_px,
            y_px,
            source,
        }
    }

    pub fn position(&self) -> Point {
        Point::new(self.x_px, self.y_px)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid config at `{path}`: {reason}")]
pub struct ConfigError {
    pub path: String,
    pub reason: String,
}

impl ConfigError {
    fn new(path: &str, reason: impl Into<String>) -> Self {
        Self {
            path: path.to_string(),
            reason: reason.into(),
        }
    }
}

/// Per-session configuration. Serialized as one JSON document; unknown
/// fields are rejected, omitted fields take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SessionConfig {
    pub screen: ScreenSpec,
    pub rng_seed: u64,
    pub dwell_radius_px: f64,
    /// Dwell duration for the live cursor source.
    pub dwell_ms: f64,
    pub gaze: GazeSwitchConfig,
    pub adaptation: AdaptationConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub imu: Option<ImuCalibration>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub leap: Option<LeapCalibration>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub homography: Option<Homography>,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            screen: ScreenSpec::default(),
            rng_seed: 0,
            dwell_radius_px: 10.0,
            dwell_ms: 1000.0,
            gaze: GazeSwitchConfig::default(),
            adaptation: AdaptationConfig::default(),
            imu: None,
            leap: None,
            homography: None,
        }
    }
}

impl SessionConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: SessionConfig =
            serde_json::from_str(text).map_err(|e| ConfigError::new("$", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// Checks every invariant, reporting the dotted path of the first bad field.
    pub fn validate(&self) -> Result<(), ConfigError> {
        validate_screen_spec(self.screen)
            .map_err(|e| match e {
                ModelError::NonPositiveDimension(f) => {
                    ConfigError::new(&format!("screen.{f}"), "must be positive")
                }
                other => ConfigError::new("screen", other.to_string()),
            })?;
        positive("dwell_radius_px", self.dwell_radius_px)?;
        positive("dwell_ms", self.dwell_ms)?;
        positive("gaze.cone_full_angle_deg", self.gaze.cone_full_angle_deg)?;
        if self.gaze.cone_full_angle_deg >= 90.0 {
            return Err(ConfigError::new("gaze.cone_full_angle_deg", "must be below 90"));
        }
        positive("gaze.dwell_ms", self.gaze.dwell_ms)?;
        positive("gaze.refractory_ms", self.gaze.refractory_ms)?;
        if !(self.adaptation.expansion_factor > 1.0) {
            return Err(ConfigError::new("adaptation.expansion_factor", "must exceed 1"));
        }
        if !(self.adaptation.speed_zero_eps_px_per_s >= 0.0) {
            return Err(ConfigError::new(
                "adaptation.speed_zero_eps_px_per_s",
                "must be non-negative",
            ));
        }
        if self.adaptation.window_samples < 3 {
            return Err(ConfigError::new("adaptation.window_samples", "must be at least 3"));
        }
        if let Some(cal) = &self.imu {
            cal.validate()
                .map_err(|e| ConfigError::new("imu", e.to_string()))?;
        }
        if let Some(cal) = &self.leap {
            cal.validate()
                .map_err(|e| ConfigError::new("leap", e.to_string()))?;
        }
        if let Some(h) = &self.homography {
            h.validate()
                .map_err(|e| ConfigError::new("homography", e.to_string()))?;
        }
        Ok(())
    }
}

fn positive(path: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::new(path, "must be positive"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn default_screen_validates() {
        let spec = ScreenSpec::new(1024, 768, 0.42, 650.0);
        assert_eq!(validate_screen_spec(spec), Ok(spec));
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert_eq!(
            validate_screen_spec(ScreenSpec::new(0, 768, 0.42, 650.0)),
            Err(ModelError::NonPositiveDimension(ScreenField::Width))
        );
        assert_eq!(
            validate_screen_spec(ScreenSpec::new(1024, 768, -0.1, 650.0)),
            Err(ModelError::NonPositiveDimension(ScreenField::Pitch))
        );
        assert_eq!(
            validate_screen_spec(ScreenSpec::new(1024, 0, 0.42, 650.0)),
            Err(ModelError::NonPositiveDimension(ScreenField::Height))
        );
        assert_eq!(
            validate_screen_spec(ScreenSpec::new(1024, 768, 0.42, f64::NAN)),
            Err(ModelError::NonPositiveDimension(ScreenField::ViewingDistance))
        );
    }

    #[test]
    fn gaze_cone_radius() {
        // 650 * tan(0.8 deg) / 0.42, evaluated offline.
        let r = visual_angle_to_pixels(1.6, &ScreenSpec::default()).unwrap();
        assert_abs_diff_eq!(r, 21.610242718971605, epsilon = 1e-9);
    }

    #[test]
    fn zero_angle_is_zero_pixels() {
        assert_eq!(visual_angle_to_pixels(0.0, &ScreenSpec::default()).unwrap(), 0.0);
    }

    #[test]
    fn one_pixel_angle() {
        let spec = ScreenSpec::default();
        let angle = 2.0 * (0.42f64 / 650.0).atan().to_degrees();
        assert_abs_diff_eq!(visual_angle_to_pixels(angle, &spec).unwrap(), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn angle_range_checked() {
        let spec = ScreenSpec::default();
        assert!(visual_angle_to_pixels(90.0, &spec).is_err());
        assert!(visual_angle_to_pixels(-1.0, &spec).is_err());
        assert!(visual_angle_to_pixels(f64::NAN, &spec).is_err());
    }

    #[test]
    fn clamp_flags_only_when_moved() {
        let p = ScreenPoint::clamped(Point::new(1024.0, 384.0), 1024.0, 768.0);
        assert!(!p.out_of_bounds);
        let p = ScreenPoint::clamped(Point::new(1536.0, 384.0), 1024.0, 768.0);
        assert!(p.out_of_bounds);
        assert_eq!(p.x, 1024.0);
    }

    #[test]
    fn config_rejects_unknown_fields() {
        let err = SessionConfig::from_json(r#"{"rng_seed": 3, "bogus": 1}"#).unwrap_err();
        assert!(err.reason.contains("bogus"));
    }

    #[test]
    fn config_field_paths() {
        let err = SessionConfig::from_json(r#"{"dwell_ms": 0}"#).unwrap_err();
        assert_eq!(err.path, "dwell_ms");
        let err = SessionConfig::from_json(r#"{"gaze": {"dwell_ms": 0}}"#).unwrap_err();
        assert_eq!(err.path, "gaze.dwell_ms");
        let err = SessionConfig::from_json(
            r#"{"screen": {"width_px": 0, "height_px": 768, "pixel_pitch_mm": 0.42, "viewing_distance_mm": 650}}"#,
        )
        .unwrap_err();
        assert_eq!(err.path, "screen.width_px");
    }

    #[test]
    fn config_round_trips() {
        let cfg = SessionConfig {
            rng_seed: 42,
            imu: Some(ImuCalibration {
                yaw_ll: 30.0,
                yaw_rl: -30.0,
                pitch_tl: 20.0,
                pitch_bl: -20.0,
            }),
            ..Default::default()
        };
        let back = SessionConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
    }
}
