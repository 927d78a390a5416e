//! Hardware-free bimanual teleoperation simulator.
//!
//! The loop runs leader waypoints through a Kalman filter, ships increments
//! over a lossy datagram channel with a latest-valid receiver and watchdog,
//! applies them to clutched follower arms, and renders contact forces
//! against an analytic digital-twin scene at 1 kHz. Run logs feed the
//! trajectory metrics and the nonparametric test battery.

pub mod filter;
pub mod frames;
pub mod geometry;
pub mod haptics;
pub mod harness;
pub mod metrics;
pub mod stats;
pub mod teleop;
pub mod transport;

pub use frames::Vec3;
