//! Virtual-touch cursor sources: camera-tracked laser spot, finger-worn IMU
//! angles and IR fingertip tracking. Each maps raw sensor data to a screen
//! position, clamping out-of-screen results and flagging them rather than
//! dropping them.

mod homography;
mod imu;
mod laser;
mod leap;

pub use homography::{calibrate_homography, project_to_screen, Homography, Quad};
pub use imu::{calibrate_imu, imu_map, imu_to_screen, AnglePair, CalibrationCorners, ImuCalibration};
pub use laser::{detect_laser_spot, Frame};
pub use leap::{fingertip_map, fingertip_to_screen, FingertipSample, LeapCalibration};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SourceError {
    #[error("frame buffer holds {got} pixels, expected {expected}")]
    FrameSize { expected: usize, got: usize },
    #[error("pgm decode failed: {0}")]
    Pgm(String),
    #[error("second bright region peaks at {second} against {brightest}")]
    AmbiguousSpot { brightest: u8, second: u8 },
    #[error("three collinear points in the {0} quad")]
    DegenerateQuad(Quad),
    #[error("homography is singular")]
    SingularHomography,
    #[error("point projects to infinity")]
    ProjectionAtInfinity,
    #[error("calibration span is zero ({0})")]
    ZeroSpan(&'static str),
    #[error("non-finite calibration value")]
    NonFinite,
    #[error("leap calibration extent must be positive ({0})")]
    NonPositiveExtent(&'static str),
}
