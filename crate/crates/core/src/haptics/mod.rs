//! Condition-variable haptic force rendering.
//!
//! The total force is a sum of interchangeable laws (see [`laws`]) driven by
//! the contact state and the material at the current depth, softened by
//! puncture hysteresis and bounded in magnitude and slew before output.

pub mod laws;
pub mod limit;
pub mod material;
pub mod puncture;

use thiserror::Error;

use crate::frames::Vec3;
use crate::geometry::{contact_state, ContactState, Scene};

pub use laws::{ForceBreakdown, ForceLaw, ForceModel, ForceSlot, LawInput, LawRegistry};
pub use limit::{limit_force, ForceLimits};
pub use material::{HapticMaterial, MaterialRegistry};
pub use puncture::{puncture_update, PuncturePhase, PunctureState};

/// Haptic servo period, s.
pub const SERVO_DT_S: f64 = 0.001;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HapticError {
    #[error("unknown material `{0}`")]
    UnknownMaterial(String),
    #[error("material `{id}` is invalid: {reason}")]
    InvalidMaterial { id: String, reason: String },
    #[error("unknown force law `{0}`")]
    UnknownLaw(String),
    #[error("force laws `{first}` and `{second}` fill the same slot")]
    DuplicateSlot {
        first: &'static str,
        second: &'static str,
    },
    #[error("tick period {got} s does not match servo period {want} s")]
    ServoPeriodMismatch { got: f64, want: f64 },
    #[error("invalid force limits: {0}")]
    InvalidLimits(String),
}

/// `modifier * (k0 + U d) d n`.
pub fn elastic_normal(depth: f64, normal: &Vec3, mat: &HapticMaterial, punct: &PunctureState) -> Vec3 {
    if depth <= 0.0 {
        return Vec3::zeros();
    }
    normal * (punct.modifier * mat.stiffness_at(depth) * depth)
}

/// Output of [`assemble_force`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Assembled {
    pub breakdown: ForceBreakdown,
    pub output: Vec3,
    pub puncture: PunctureState,
    pub ruptured: bool,
    /// Normal load that drove the puncture update, N.
    pub normal_load: f64,
}

/// Assembles the force with the default law set.
pub fn assemble_force(
    contact: &ContactState,
    mat: &HapticMaterial,
    punct: &PunctureState,
    prev_force: &Vec3,
    limits: &ForceLimits,
    dt: f64,
) -> Assembled {
    assemble_with(&ForceModel::default(), contact, mat, punct, prev_force, limits, dt)
}

pub fn assemble_with(
    model: &ForceModel,
    contact: &ContactState,
    mat: &HapticMaterial,
    punct: &PunctureState,
    prev_force: &Vec3,
    limits: &ForceLimits,
    dt: f64,
) -> Assembled {
    let breakdown = model.evaluate(&LawInput {
        contact,
        material: mat,
        modifier: punct.modifier,
    });
    let output = limit_force(&breakdown.total, prev_force, limits, dt);
    let normal_load = if contact.depth > 0.0 {
        breakdown.normal_load(&contact.normal)
    } else {
        0.0
    };
    let (puncture, ruptured) = puncture_update(punct, normal_load, mat, dt * 1000.0);
    Assembled {
        breakdown,
        output,
        puncture,
        ruptured,
        normal_load,
    }
}

/// State owned by the servo loop for one tool.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ToolState {
    pub puncture: PunctureState,
    /// Last output force, N.
    pub force: Vec3,
    pub ticks: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TickOutput {
    pub force: Vec3,
    pub breakdown: ForceBreakdown,
    pub contact: ContactState,
    pub ruptured: bool,
}

/// Everything the servo loop needs besides per-tool state.
#[derive(Debug)]
pub struct HapticRenderer {
    pub model: ForceModel,
    pub materials: MaterialRegistry,
    pub limits: ForceLimits,
    pub servo_dt_s: f64,
}

impl HapticRenderer {
    pub fn new(model: ForceModel, materials: MaterialRegistry, limits: ForceLimits) -> Result<Self, HapticError> {
        materials.validate()?;
        limits.validate().map_err(HapticError::InvalidLimits)?;
        Ok(Self {
            model,
            materials,
            limits,
            servo_dt_s: SERVO_DT_S,
        })
    }

    /// One servo tick: contact query, material lookup, force assembly.
    pub fn tick(
        &self,
        scene: &Scene,
        pose: &Vec3,
        velocity: &Vec3,
        state: &mut ToolState,
        dt: f64,
    ) -> Result<TickOutput, HapticError> {
        if (dt - self.servo_dt_s).abs() > 1e-12 {
            return Err(HapticError::ServoPeriodMismatch {
                got: dt,
                want: self.servo_dt_s,
            });
        }
        let contact = contact_state(scene, pose, velocity);
        let mat = self.materials.get(&contact.material)?;
        let a = assemble_with(&self.model, &contact, mat, &state.puncture, &state.force, &self.limits, dt);
        state.puncture = a.puncture;
        state.force = a.output;
        state.ticks += 1;
        Ok(TickOutput {
            force: a.output,
            breakdown: a.breakdown,
            contact,
            ruptured: a.ruptured,
        })
    }
}

/// Free-function form of [`HapticRenderer::tick`].
pub fn haptic_tick(
    renderer: &HapticRenderer,
    scene: &Scene,
    pose: &Vec3,
    velocity: &Vec3,
    state: &mut ToolState,
    dt: f64,
) -> Result<TickOutput, HapticError> {
    renderer.tick(scene, pose, velocity, state, dt)
}

/// Latest-value handoff from the servo rate to the render rate. Each render
/// frame takes the most recent servo value; nothing is averaged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderDecimator<T> {
    latest: Option<T>,
    render_hz: u64,
    next_frame: u64,
}

impl<T: Copy> RenderDecimator<T> {
    pub fn new(render_hz: u64) -> Self {
        assert!(render_hz > 0, "render rate must be positive");
        Self {
            latest: None,
            render_hz,
            next_frame: 0,
        }
    }

    /// Start of render frame `k`, µs (exact rational schedule, rounded up).
    pub fn frame_time_us(&self, k: u64) -> u64 {
        (k * 1_000_000).div_ceil(self.render_hz)
    }

    /// Records a servo value at `t_us`; returns the value to render when a
    /// frame boundary has been reached.
    pub fn push(&mut self, t_us: u64, value: T) -> Option<T> {
        self.latest = Some(value);
        if t_us >= self.frame_time_us(self.next_frame) {
            while self.frame_time_us(self.next_frame) <= t_us {
                self.next_frame += 1;
            }
            return self.latest;
        }
        None
    }

    pub fn latest(&self) -> Option<T> {
        self.latest
    }
}
