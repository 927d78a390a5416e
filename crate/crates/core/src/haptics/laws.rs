//! Interchangeable force laws, registered by name.
//!
//! Each law fills one [`ForceSlot`] of the breakdown. A [`ForceModel`] is an
//! ordered set of laws built from names, so scenarios can swap or drop terms
//! without touching the assembler.

use std::collections::BTreeMap;
use std::fmt;

use crate::frames::Vec3;
use crate::geometry::ContactState;

use super::material::HapticMaterial;
use super::HapticError;

/// Breakdown slot a law writes into. Laws are evaluated in slot order, so a
/// law may read any earlier slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ForceSlot {
    Elastic,
    Puncture,
    NormalDamping,
    TangentialDrag,
    QuadraticDrag,
    GlobalViscosity,
    Friction,
    Adhesion,
}

impl ForceSlot {
    pub const ALL: [ForceSlot; 8] = [
        ForceSlot::Elastic,
        ForceSlot::Puncture,
        ForceSlot::NormalDamping,
        ForceSlot::TangentialDrag,
        ForceSlot::QuadraticDrag,
        ForceSlot::GlobalViscosity,
        ForceSlot::Friction,
        ForceSlot::Adhesion,
    ];
}

/// Per-term decomposition of the pre-limit force, N.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ForceBreakdown {
    pub elastic: Vec3,
    pub damp_n: Vec3,
    pub drag_t: Vec3,
    pub drag_quad: Vec3,
    pub viscous_g: Vec3,
    pub friction: Vec3,
    pub puncture: Vec3,
    pub adhesion: Vec3,
    pub total: Vec3,
}

impl ForceBreakdown {
    pub fn get(&self, slot: ForceSlot) -> Vec3 {
        match slot {
            ForceSlot::Elastic => self.elastic,
            ForceSlot::Puncture => self.puncture,
            ForceSlot::NormalDamping => self.damp_n,
            ForceSlot::TangentialDrag => self.drag_t,
            ForceSlot::QuadraticDrag => self.drag_quad,
            ForceSlot::GlobalViscosity => self.viscous_g,
            ForceSlot::Friction => self.friction,
            ForceSlot::Adhesion => self.adhesion,
        }
    }

    fn slot_mut(&mut self, slot: ForceSlot) -> &mut Vec3 {
        match slot {
            ForceSlot::Elastic => &mut self.elastic,
            ForceSlot::Puncture => &mut self.puncture,
            ForceSlot::NormalDamping => &mut self.damp_n,
            ForceSlot::TangentialDrag => &mut self.drag_t,
            ForceSlot::QuadraticDrag => &mut self.drag_quad,
            ForceSlot::GlobalViscosity => &mut self.viscous_g,
            ForceSlot::Friction => &mut self.friction,
            ForceSlot::Adhesion => &mut self.adhesion,
        }
    }

    /// Sum of the terms in slot order.
    pub fn sum_terms(&self) -> Vec3 {
        ForceSlot::ALL
            .iter()
            .fold(Vec3::zeros(), |acc, s| acc + self.get(*s))
    }

    /// Magnitude of the normal load carried by the elastic, puncture and
    /// damping terms, clamped at zero.
    pub fn normal_load(&self, normal: &Vec3) -> f64 {
        (self.elastic + self.puncture + self.damp_n).dot(normal).max(0.0)
    }
}

/// Inputs shared by every law on one tick.
#[derive(Debug, Clone, Copy)]
pub struct LawInput<'a> {
    pub contact: &'a ContactState,
    pub material: &'a HapticMaterial,
    /// Stiffness multiplier from the puncture hysteresis.
    pub modifier: f64,
}

pub trait ForceLaw: Send + Sync {
    fn name(&self) -> &'static str;
    fn slot(&self) -> ForceSlot;
    /// `partial` holds every earlier slot's contribution for this tick.
    fn evaluate(&self, input: &LawInput<'_>, partial: &ForceBreakdown) -> Vec3;
}

/// Elastic normal force with a linear stiffness ramp: `(k0 + U d) d n`.
/// Evaluated at full stiffness; the puncture law carries the softening.
pub struct Elastic;

impl ForceLaw for Elastic {
    fn name(&self) -> &'static str {
        "elastic"
    }
    fn slot(&self) -> ForceSlot {
        ForceSlot::Elastic
    }
    fn evaluate(&self, input: &LawInput<'_>, _: &ForceBreakdown) -> Vec3 {
        let c = input.contact;
        if c.depth <= 0.0 {
            return Vec3::zeros();
        }
        input.contact.normal * (input.material.stiffness_at(c.depth) * c.depth)
    }
}

/// Alternative reading of the stiffness gain where the gain itself ramps
/// with depth: `(k0 + U d^2) d n`.
pub struct ElasticRampedGain;

impl ForceLaw for ElasticRampedGain {
    fn name(&self) -> &'static str {
        "elastic_ramped_gain"
    }
    fn slot(&self) -> ForceSlot {
        ForceSlot::Elastic
    }
    fn evaluate(&self, input: &LawInput<'_>, _: &ForceBreakdown) -> Vec3 {
        let d = input.contact.depth;
        if d <= 0.0 {
            return Vec3::zeros();
        }
        let m = input.material;
        input.contact.normal * ((m.base_stiffness + m.stiffness_gain * d * d) * d)
    }
}

/// Softening after rupture: `(modifier - 1) * elastic`, so elastic plus
/// puncture equals the modified elastic force.
pub struct Puncture;

impl ForceLaw for Puncture {
    fn name(&self) -> &'static str {
        "puncture"
    }
    fn slot(&self) -> ForceSlot {
        ForceSlot::Puncture
    }
    fn evaluate(&self, input: &LawInput<'_>, partial: &ForceBreakdown) -> Vec3 {
        if input.modifier == 1.0 {
            return Vec3::zeros();
        }
        partial.elastic * (input.modifier - 1.0)
    }
}

/// `-b (v . n) n` while in contact.
pub struct NormalDamping;

impl ForceLaw for NormalDamping {
    fn name(&self) -> &'static str {
        "normal_damping"
    }
    fn slot(&self) -> ForceSlot {
        ForceSlot::NormalDamping
    }
    fn evaluate(&self, input: &LawInput<'_>, _: &ForceBreakdown) -> Vec3 {
        if input.contact.depth <= 0.0 {
            return Vec3::zeros();
        }
        -input.contact.v_normal * input.material.normal_damping
    }
}

/// Depth-adaptive tangential drag `-(c0 + c1 d) v_t`.
pub struct TangentialDrag;

impl ForceLaw for TangentialDrag {
    fn name(&self) -> &'static str {
        "tangential_drag"
    }
    fn slot(&self) -> ForceSlot {
        ForceSlot::TangentialDrag
    }
    fn evaluate(&self, input: &LawInput<'_>, _: &ForceBreakdown) -> Vec3 {
        tangential_drag(input.contact.depth, &input.contact.v_tangential, input.material)
    }
}

/// `-q_t |v_t| v_t` while in contact.
pub struct QuadraticDrag;

impl ForceLaw for QuadraticDrag {
    fn name(&self) -> &'static str {
        "quadratic_drag"
    }
    fn slot(&self) -> ForceSlot {
        ForceSlot::QuadraticDrag
    }
    fn evaluate(&self, input: &LawInput<'_>, _: &ForceBreakdown) -> Vec3 {
        quadratic_drag(input.contact.depth, &input.contact.v_tangential, input.material)
    }
}

/// `-c_g v` inside the interaction zone (in contact or within adhesion range).
pub struct GlobalViscosity;

impl ForceLaw for GlobalViscosity {
    fn name(&self) -> &'static str {
        "global_viscosity"
    }
    fn slot(&self) -> ForceSlot {
        ForceSlot::GlobalViscosity
    }
    fn evaluate(&self, input: &LawInput<'_>, _: &ForceBreakdown) -> Vec3 {
        let c = input.contact;
        if c.depth > 0.0 || c.phi < input.material.adh_range {
            -c.velocity * input.material.global_viscosity
        } else {
            Vec3::zeros()
        }
    }
}

/// Stribeck friction scaled by the normal load of the earlier slots.
pub struct Friction;

impl ForceLaw for Friction {
    fn name(&self) -> &'static str {
        "friction"
    }
    fn slot(&self) -> ForceSlot {
        ForceSlot::Friction
    }
    fn evaluate(&self, input: &LawInput<'_>, partial: &ForceBreakdown) -> Vec3 {
        if input.contact.depth <= 0.0 {
            return Vec3::zeros();
        }
        let load = partial.normal_load(&input.contact.normal);
        friction_force(input.contact, load, input.material)
    }
}

/// Short-range pull toward the surface just outside it.
pub struct Adhesion;

impl ForceLaw for Adhesion {
    fn name(&self) -> &'static str {
        "adhesion"
    }
    fn slot(&self) -> ForceSlot {
        ForceSlot::Adhesion
    }
    fn evaluate(&self, input: &LawInput<'_>, _: &ForceBreakdown) -> Vec3 {
        adhesion_force(input.contact.phi, &input.contact.normal, input.material)
    }
}

pub fn tangential_drag(depth: f64, v_t: &Vec3, mat: &HapticMaterial) -> Vec3 {
    if depth <= 0.0 {
        return Vec3::zeros();
    }
    -v_t * (mat.drag_linear + mat.drag_depth * depth)
}

pub fn quadratic_drag(depth: f64, v_t: &Vec3, mat: &HapticMaterial) -> Vec3 {
    if depth <= 0.0 {
        return Vec3::zeros();
    }
    -v_t * (mat.drag_quadratic * v_t.norm())
}

/// Stribeck coefficient `mu_k + (mu_s - mu_k) exp(-(v / v_s)^2)`.
pub fn stribeck_mu(speed: f64, mat: &HapticMaterial) -> f64 {
    let r = speed / mat.v_s;
    mat.mu_k + (mat.mu_s - mat.mu_k) * (-(r * r)).exp()
}

/// Friction opposing the tangential velocity with magnitude
/// `mu(|v_t|) * normal_load`. Below `v_stick` the force ramps linearly to
/// zero with speed, staying under `mu_s * normal_load`.
pub fn friction_force(contact: &ContactState, normal_load: f64, mat: &HapticMaterial) -> Vec3 {
    let v_t = &contact.v_tangential;
    let speed = v_t.norm();
    if speed == 0.0 || normal_load <= 0.0 {
        return Vec3::zeros();
    }
    let dir = v_t / speed;
    let mag = if speed < mat.v_stick {
        stribeck_mu(mat.v_stick, mat) * normal_load * (speed / mat.v_stick)
    } else {
        stribeck_mu(speed, mat) * normal_load
    };
    -dir * mag
}

/// Zero outside `[0, adh_range)`; inside, magnitude `k_adh phi (1 - phi / range)`
/// directed toward the surface.
pub fn adhesion_force(phi: f64, normal: &Vec3, mat: &HapticMaterial) -> Vec3 {
    if phi < 0.0 || phi >= mat.adh_range || mat.adh_range <= 0.0 {
        return Vec3::zeros();
    }
    -normal * (mat.k_adh * phi * (1.0 - phi / mat.adh_range))
}

type LawFactory = fn() -> Box<dyn ForceLaw>;

/// Name -> constructor for every available force law.
pub struct LawRegistry {
    factories: BTreeMap<&'static str, LawFactory>,
}

impl fmt::Debug for LawRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.factories.keys()).finish()
    }
}

impl Default for LawRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl LawRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register("elastic", || Box::new(Elastic));
        r.register("elastic_ramped_gain", || Box::new(ElasticRampedGain));
        r.register("puncture", || Box::new(Puncture));
        r.register("normal_damping", || Box::new(NormalDamping));
        r.register("tangential_drag", || Box::new(TangentialDrag));
        r.register("quadratic_drag", || Box::new(QuadraticDrag));
        r.register("global_viscosity", || Box::new(GlobalViscosity));
        r.register("friction", || Box::new(Friction));
        r.register("adhesion", || Box::new(Adhesion));
        r
    }

    pub fn register(&mut self, name: &'static str, factory: LawFactory) {
        self.factories.insert(name, factory);
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.factories.keys().copied()
    }

    pub fn create(&self, name: &str) -> Result<Box<dyn ForceLaw>, HapticError> {
        self.factories
            .get(name)
            .map(|f| f())
            .ok_or_else(|| HapticError::UnknownLaw(name.to_owned()))
    }

    /// Builds a model from law names. At most one law per slot.
    pub fn build<S: AsRef<str>>(&self, names: &[S]) -> Result<ForceModel, HapticError> {
        let mut laws = Vec::with_capacity(names.len());
        for name in names {
            laws.push(self.create(name.as_ref())?);
        }
        ForceModel::new(laws)
    }
}

/// Ordered set of force laws evaluated each tick.
pub struct ForceModel {
    laws: Vec<Box<dyn ForceLaw>>,
}

impl fmt::Debug for ForceModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.laws.iter().map(|l| l.name())).finish()
    }
}

impl Default for ForceModel {
    fn default() -> Self {
        LawRegistry::builtin()
            .build(ForceModel::DEFAULT_LAWS)
            .expect("default laws are registered")
    }
}

impl ForceModel {
    pub const DEFAULT_LAWS: &'static [&'static str] = &[
        "elastic",
        "puncture",
        "normal_damping",
        "tangential_drag",
        "quadratic_drag",
        "global_viscosity",
        "friction",
        "adhesion",
    ];

    pub fn new(mut laws: Vec<Box<dyn ForceLaw>>) -> Result<Self, HapticError> {
        laws.sort_by_key(|l| l.slot());
        for pair in laws.windows(2) {
            if pair[0].slot() == pair[1].slot() {
                return Err(HapticError::DuplicateSlot {
                    first: pair[0].name(),
                    second: pair[1].name(),
                });
            }
        }
        Ok(Self { laws })
    }

    pub fn law_names(&self) -> Vec<&'static str> {
        self.laws.iter().map(|l| l.name()).collect()
    }

    /// Evaluates every law and sums them in slot order.
    pub fn evaluate(&self, input: &LawInput<'_>) -> ForceBreakdown {
        let mut out = ForceBreakdown::default();
        for law in &self.laws {
            let f = law.evaluate(input, &out);
            *out.slot_mut(law.slot()) = f;
        }
        out.total = out.sum_terms();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ContactState;

    fn contact(depth: f64, v: Vec3) -> ContactState {
        let n = Vec3::z();
        let v_normal = n * v.dot(&n);
        ContactState {
            depth,
            normal: n,
            velocity: v,
            v_normal,
            v_tangential: v - v_normal,
            material: "m".into(),
            clearance: 0.0,
            phi: -depth,
        }
    }

    #[test]
    fn drag_values() {
        let mat = HapticMaterial {
            drag_linear: 0.01,
            drag_depth: 0.005,
            drag_quadratic: 0.0,
            ..Default::default()
        };
        assert_eq!(tangential_drag(2.0, &Vec3::zeros(), &mat), Vec3::zeros());
        let f = tangential_drag(2.0, &Vec3::new(10.0, 0.0, 0.0), &mat);
        assert!((f - Vec3::new(-0.2, 0.0, 0.0)).norm() < 1e-15);

        let mat = HapticMaterial {
            drag_quadratic: 0.001,
            ..Default::default()
        };
        let v = Vec3::new(3.0, 4.0, 0.0);
        let a = quadratic_drag(1.0, &v, &mat);
        let b = quadratic_drag(1.0, &(v * 2.0), &mat);
        assert!((b - a * 4.0).norm() < 1e-15);
    }

    #[test]
    fn stribeck_limits() {
        let mat = HapticMaterial::default();
        assert!((stribeck_mu(1e-9, &mat) - mat.mu_s).abs() < 1e-12);
        assert!((stribeck_mu(1e3 * mat.v_s, &mat) - mat.mu_k).abs() < 1e-12);
        let closed_form = mat.mu_k + (mat.mu_s - mat.mu_k) / std::f64::consts::E;
        assert!((stribeck_mu(mat.v_s, &mat) - closed_form).abs() < 1e-15);
    }

    #[test]
    fn friction_opposes_slip_and_is_capped() {
        let mat = HapticMaterial::default();
        let c = contact(1.0, Vec3::new(10.0, 0.0, 0.0));
        let f = friction_force(&c, 1.0, &mat);
        assert!(f.x < 0.0 && f.y == 0.0 && f.z == 0.0);
        assert!((f.norm() - stribeck_mu(10.0, &mat)).abs() < 1e-12);
        for s in [1e-6, 0.01, 0.05, 0.099] {
            let c = contact(1.0, Vec3::new(s, 0.0, 0.0));
            assert!(friction_force(&c, 2.0, &mat).norm() <= mat.mu_s * 2.0);
        }
        assert_eq!(friction_force(&contact(1.0, Vec3::zeros()), 2.0, &mat), Vec3::zeros());
    }

    #[test]
    fn adhesion_profile() {
        let mat = HapticMaterial {
            k_adh: 0.2,
            adh_range: 1.0,
            ..Default::default()
        };
        let n = Vec3::z();
        assert_eq!(adhesion_force(1.0, &n, &mat), Vec3::zeros());
        assert_eq!(adhesion_force(0.0, &n, &mat), Vec3::zeros());
        assert_eq!(adhesion_force(-0.1, &n, &mat), Vec3::zeros());
        let f = adhesion_force(0.5, &n, &mat);
        assert!((f - Vec3::new(0.0, 0.0, -0.2 * 1.0 / 4.0)).norm() < 1e-15);
    }

    #[test]
    fn registry_builds_and_rejects() {
        let reg = LawRegistry::builtin();
        assert!(reg.names().any(|n| n == "elastic_ramped_gain"));
        let model = reg.build(&["friction", "elastic"]).unwrap();
        assert_eq!(model.law_names(), ["elastic", "friction"]);
        assert!(matches!(reg.build(&["elastic", "elastic_ramped_gain"]), Err(HapticError::DuplicateSlot { .. })));
        assert!(matches!(reg.build(&["springy"]), Err(HapticError::UnknownLaw(_))));
    }

    #[test]
    fn ramped_gain_variant() {
        let reg = LawRegistry::builtin();
        let model = reg.build(&["elastic_ramped_gain"]).unwrap();
        let mat = HapticMaterial::default();
        let c = contact(2.0, Vec3::zeros());
        let b = model.evaluate(&LawInput {
            contact: &c,
            material: &mat,
            modifier: 1.0,
        });
        // (0.5 + 0.3 * 4) * 2
        assert!((b.total.z - 3.4).abs() < 1e-12);
    }
}
