//! Clutched incremental leader-to-follower mapping with safety gating.
//!
//! Each follower arm is an independent state machine:
//! `p_f <- gate(p_f + alpha * R_hw * delta_hand)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frames::{RigidTransform, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TeleopError {
    #[error("invalid teleop config: {0}")]
    InvalidConfig(String),
}

/// Axis-aligned box in workspace millimeters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Bounds {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn clamp(&self, p: &Vec3) -> Vec3 {
        Vec3::new(
            p.x.clamp(self.min[0], self.max[0]),
            p.y.clamp(self.min[1], self.max[1]),
            p.z.clamp(self.min[2], self.max[2]),
        )
    }

    fn is_valid(&self) -> bool {
        (0..3).all(|i| self.min[i].is_finite() && self.max[i].is_finite() && self.min[i] < self.max[i])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TeleopConfig {
    pub alpha: f64,
    pub hand_to_workspace: RigidTransform,
    pub workspace_bounds: Bounds,
    /// mm/s
    pub max_command_speed: f64,
    /// Nominal period between increments, s.
    pub command_period_s: f64,
}

impl TeleopConfig {
    pub fn new(
        alpha: f64,
        hand_to_workspace: RigidTransform,
        workspace_bounds: Bounds,
        max_command_speed: f64,
    ) -> Result<Self, TeleopError> {
        let cfg = Self {
            alpha,
            hand_to_workspace,
            workspace_bounds,
            max_command_speed,
            command_period_s: 1.0 / 90.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), TeleopError> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(TeleopError::InvalidConfig(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if !self.workspace_bounds.is_valid() {
            return Err(TeleopError::InvalidConfig("workspace bounds are degenerate".into()));
        }
        if !(self.max_command_speed > 0.0 && self.max_command_speed.is_finite()) {
            return Err(TeleopError::InvalidConfig(format!(
                "max_command_speed must be > 0, got {}",
                self.max_command_speed
            )));
        }
        if !(self.command_period_s > 0.0) {
            return Err(TeleopError::InvalidConfig("command period must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Clutch {
    Engaged,
    Disengaged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Gate {
    Normal,
    SafeHold,
}

/// Link health as seen by the follower; drives the safe-hold gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkStatus {
    Live,
    SampleHold,
    SafeHold,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FollowerState {
    pub pose: Vec3,
    pub clutch: Clutch,
    pub gate: Gate,
}

impl FollowerState {
    pub fn new(pose: Vec3) -> Self {
        Self {
            pose,
            clutch: Clutch::Engaged,
            gate: Gate::Normal,
        }
    }
}

/// Clamps `candidate` into the workspace and limits the step from `prev`
/// to `max_command_speed * dt`, shortening it along its direction.
pub fn safety_gate(
    candidate: &Vec3,
    prev: &Vec3,
    cfg: &TeleopConfig,
    dt: f64,
    link: LinkStatus,
) -> (Vec3, Gate) {
    if link == LinkStatus::SafeHold {
        return (*prev, Gate::SafeHold);
    }
    let bounded = cfg.workspace_bounds.clamp(candidate);
    let step = bounded - prev;
    let max_step = cfg.max_command_speed * dt;
    let len = step.norm();
    let out = if len > max_step {
        prev + step * (max_step / len)
    } else {
        bounded
    };
    // prev is in bounds for every reachable state; clamp again so rounding
    // in the shortened step cannot leave the box.
    (cfg.workspace_bounds.clamp(&out), Gate::Normal)
}

/// Applies one hand-frame increment. A disengaged clutch or a held gate
/// leaves the state untouched.
pub fn apply_increment(state: &FollowerState, delta_hand: &Vec3, cfg: &TeleopConfig) -> FollowerState {
    if state.clutch == Clutch::Disengaged || state.gate == Gate::SafeHold {
        return *state;
    }
    if !delta_hand.iter().all(|v| v.is_finite()) {
        return *state;
    }
    let candidate = state.pose + cfg.hand_to_workspace.rotate(delta_hand) * cfg.alpha;
    let (pose, gate) = safety_gate(&candidate, &state.pose, cfg, cfg.command_period_s, LinkStatus::Live);
    FollowerState { pose, gate, ..*state }
}

pub fn clutch(state: &FollowerState, engage: bool) -> FollowerState {
    FollowerState {
        clutch: if engage { Clutch::Engaged } else { Clutch::Disengaged },
        ..*state
    }
}

/// Moves the gate according to link health without moving the pose.
pub fn update_link(state: &FollowerState, link: LinkStatus) -> FollowerState {
    let gate = if link == LinkStatus::SafeHold {
        Gate::SafeHold
    } else {
        Gate::Normal
    };
    FollowerState { gate, ..*state }
}
