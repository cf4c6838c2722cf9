//! Virtual-touch input pipeline and evaluation workbench.
//!
//! Cursor sources ([`sources`]) turn laser frames, IMU angles or fingertip
//! positions into screen points. [`selection`] and [`gaze`] turn switch
//! presses, dwell and fixations into selection events, and [`adaptation`]
//! expands the target nearest a decelerating cursor. [`pipeline`] wires
//! those together for live sessions. [`harness`] and [`driving`] are the two
//! evaluation tasks, [`synth`] is a seeded synthetic participant that drives
//! them, and [`analytics`] holds the statistics.

pub mod adaptation;
pub mod analytics;
pub mod driving;
pub mod gaze;
pub mod harness;
pub mod model;
pub mod pipeline;
pub mod selection;
pub mod sources;
pub mod synth;

pub use model::{CursorSample, CursorSource, Point, ScreenPoint, ScreenSpec, SessionConfig};
