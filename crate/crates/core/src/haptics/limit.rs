use serde::{Deserialize, Serialize};

use crate::frames::Vec3;

/// Device output bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForceLimits {
    /// N
    #[serde(default = "default_f_max")]
    pub f_max: f64,
    /// N/s
    #[serde(default = "default_slew")]
    pub slew_max: f64,
}

fn default_f_max() -> f64 {
    3.3
}
fn default_slew() -> f64 {
    500.0
}

impl Default for ForceLimits {
    fn default() -> Self {
        Self {
            f_max: default_f_max(),
            slew_max: default_slew(),
        }
    }
}

impl ForceLimits {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.f_max > 0.0 && self.f_max.is_finite()) {
            return Err(format!("f_max must be > 0, got {}", self.f_max));
        }
        if !(self.slew_max > 0.0 && self.slew_max.is_finite()) {
            return Err(format!("slew_max must be > 0, got {}", self.slew_max));
        }
        Ok(())
    }

    /// Largest allowed change between consecutive outputs `dt` apart.
    pub fn max_step(&self, dt: f64) -> f64 {
        self.slew_max * dt
    }
}

/// Relative margin kept below each bound so rounding never lands above it.
const MARGIN: f64 = 1.0 - 1e-14;

/// Scales `force` into the magnitude bound, then limits the change from
/// `prev` to `slew_max * dt` along the difference. The result satisfies both
/// bounds exactly in floating point, given `prev` within the magnitude bound.
pub fn limit_force(force: &Vec3, prev: &Vec3, limits: &ForceLimits, dt: f64) -> Vec3 {
    let mut f = *force;
    if !f.iter().all(|v| v.is_finite()) {
        f = Vec3::zeros();
    }
    let mag = f.norm();
    if mag > limits.f_max {
        f *= limits.f_max * MARGIN / mag;
    }
    let diff = f - prev;
    let step = diff.norm();
    let max_step = limits.max_step(dt);
    if step > max_step {
        f = prev + diff * (max_step * MARGIN / step);
    }
    f
}
