//! Session service for the vtouch pipeline: clients stream cursor samples
//! and switch events in and get target widths, selections and trial results
//! back, over WebSocket or over stdin/stdout.

pub mod server;
pub mod session;
pub mod stdio;
pub mod wire;

pub use session::{CreateSession, GatewayError, LiveMetrics, SessionHandle, SessionManager, SessionMode};
pub use wire::{Kind, WireMessage};
