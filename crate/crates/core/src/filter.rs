//! Per-axis constant-velocity Kalman filter for leader hand positions.
//!
//! The leader stream is filtered as positions; increments fed to the
//! follower are differences of consecutive posterior positions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frames::Vec3;

/// Initial velocity variance, (mm/s)^2.
const INITIAL_VELOCITY_VAR: f64 = 1e6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FilterError {
    #[error("non-finite measurement ({0}, {1}, {2})")]
    NonFiniteMeasurement(f64, f64, f64),
    #[error("invalid filter config: {0}")]
    InvalidConfig(String),
    #[error("empty measurement stream")]
    EmptyStream,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KalmanConfig {
    /// Command period, s.
    #[serde(default = "default_dt")]
    pub dt_s: f64,
    /// Process noise spectral density, (mm/s^2)^2.
    #[serde(default = "default_q")]
    pub q: f64,
    /// Measurement noise variance, mm^2.
    #[serde(default = "default_r")]
    pub r: f64,
}

fn default_dt() -> f64 {
    1.0 / 90.0
}
fn default_q() -> f64 {
    100.0
}
fn default_r() -> f64 {
    0.01
}

impl Default for KalmanConfig {
    fn default() -> Self {
        Self {
            dt_s: default_dt(),
            q: default_q(),
            r: default_r(),
        }
    }
}

impl KalmanConfig {
    pub fn validate(&self) -> Result<(), FilterError> {
        if !(self.dt_s > 0.0 && self.dt_s.is_finite()) {
            return Err(FilterError::InvalidConfig(format!("dt_s must be > 0, got {}", self.dt_s)));
        }
        if !(self.q > 0.0 && self.q.is_finite()) {
            return Err(FilterError::InvalidConfig(format!("q must be > 0, got {}", self.q)));
        }
        if !(self.r >= 0.0 && self.r.is_finite()) {
            return Err(FilterError::InvalidConfig(format!("r must be >= 0, got {}", self.r)));
        }
        Ok(())
    }
}

/// Position/velocity estimate and 2x2 covariance for one axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisState {
    pub pos: f64,
    pub vel: f64,
    /// Row-major symmetric covariance `[[pp, pv], [pv, vv]]`.
    pub cov: [[f64; 2]; 2],
}

impl AxisState {
    fn init(z: f64, r: f64) -> Self {
        Self {
            pos: z,
            vel: 0.0,
            cov: [[r, 0.0], [0.0, INITIAL_VELOCITY_VAR]],
        }
    }

    fn step(&self, z: f64, cfg: &KalmanConfig) -> Self {
        let dt = cfg.dt_s;
        let [[p00, p01], [_, p11]] = self.cov;

        // Predict with F = [[1, dt], [0, 1]] and white-acceleration noise.
        let x0 = self.pos + dt * self.vel;
        let x1 = self.vel;
        let dt2 = dt * dt;
        let q00 = cfg.q * dt2 * dt2 / 4.0;
        let q01 = cfg.q * dt2 * dt / 2.0;
        let q11 = cfg.q * dt2;
        let m00 = p00 + 2.0 * dt * p01 + dt2 * p11 + q00;
        let m01 = p01 + dt * p11 + q01;
        let m11 = p11 + q11;

        // Update with H = [1, 0].
        let s = m00 + cfg.r;
        if s <= 0.0 {
            return Self {
                pos: z,
                vel: x1,
                cov: [[0.0, 0.0], [0.0, m11]],
            };
        }
        let k0 = m00 / s;
        let k1 = m01 / s;
        let innov = z - x0;
        let pos = if cfg.r == 0.0 { z } else { x0 + k0 * innov };
        let vel = x1 + k1 * innov;

        // Joseph form: (I - K H) M (I - K H)^T + K r K^T.
        let a = 1.0 - k0;
        let n00 = a * a * m00 + k0 * k0 * cfg.r;
        let n01 = a * (m01 - k1 * m00) + k0 * k1 * cfg.r;
        let n11 = m11 - 2.0 * k1 * m01 + k1 * k1 * m00 + k1 * k1 * cfg.r;
        Self {
            pos,
            vel,
            cov: [[n00, n01], [n01, n11]],
        }
    }
}

/// Filter state for all three axes. `None` until the first measurement.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KalmanState {
    axes: Option<[AxisState; 3]>,
}

impl KalmanState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_initialized(&self) -> bool {
        self.axes.is_some()
    }

    pub fn axes(&self) -> Option<&[AxisState; 3]> {
        self.axes.as_ref()
    }

    pub fn position(&self) -> Option<Vec3> {
        self.axes.map(|a| Vec3::new(a[0].pos, a[1].pos, a[2].pos))
    }

    pub fn velocity(&self) -> Option<Vec3> {
        self.axes.map(|a| Vec3::new(a[0].vel, a[1].vel, a[2].vel))
    }
}

/// One predict+update cycle. The first call initializes the state at the
/// measurement with zero velocity.
pub fn kf_step(
    state: &KalmanState,
    measurement: &Vec3,
    cfg: &KalmanConfig,
) -> Result<KalmanState, FilterError> {
    if !measurement.iter().all(|v| v.is_finite()) {
        return Err(FilterError::NonFiniteMeasurement(
            measurement.x,
            measurement.y,
            measurement.z,
        ));
    }
    let axes = match &state.axes {
        None => [0, 1, 2].map(|i| AxisState::init(measurement[i], cfg.r)),
        Some(prev) => [0, 1, 2].map(|i| prev[i].step(measurement[i], cfg)),
    };
    Ok(KalmanState { axes: Some(axes) })
}

/// Posterior positions after consuming each measurement in turn.
pub fn filter_stream(measurements: &[Vec3], cfg: &KalmanConfig) -> Result<Vec<Vec3>, FilterError> {
    if measurements.is_empty() {
        return Err(FilterError::EmptyStream);
    }
    cfg.validate()?;
    let mut state = KalmanState::new();
    let mut out = Vec::with_capacity(measurements.len());
    for m in measurements {
        state = kf_step(&state, m, cfg)?;
        out.push(state.position().expect("initialized after a step"));
    }
    Ok(out)
}
