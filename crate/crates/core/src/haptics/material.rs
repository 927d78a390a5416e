//! Per-tissue interaction parameters and the material registry.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::HapticError;

/// Every coefficient of the contact force model for one tissue type.
///
/// Units: lengths mm, forces N, velocities mm/s, times ms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HapticMaterial {
    /// Base stiffness k0, N/mm.
    #[serde(rename = "k0")]
    pub base_stiffness: f64,
    /// Depth-dependent stiffness gain U, N/mm^2.
    #[serde(rename = "u")]
    pub stiffness_gain: f64,
    /// Normal damping b, N*s/mm.
    #[serde(rename = "b")]
    pub normal_damping: f64,
    /// Tangential drag c0, N*s/mm.
    #[serde(rename = "c0")]
    pub drag_linear: f64,
    /// Depth-adaptive tangential drag c1, N*s/mm^2.
    #[serde(rename = "c1")]
    pub drag_depth: f64,
    /// Quadratic tangential drag q_t, N*s^2/mm^2.
    #[serde(rename = "q_t")]
    pub drag_quadratic: f64,
    /// Global viscosity c_g, N*s/mm.
    #[serde(rename = "c_g")]
    pub global_viscosity: f64,
    pub mu_s: f64,
    pub mu_k: f64,
    /// Stribeck velocity, mm/s.
    pub v_s: f64,
    /// Below this tangential speed friction is in the stick regime, mm/s.
    pub v_stick: f64,
    /// Normal force at which the membrane ruptures, N.
    pub f_thresh: f64,
    /// Stiffness multiplier held after rupture.
    #[serde(default = "default_drop")]
    pub puncture_drop: f64,
    #[serde(default = "default_window")]
    pub puncture_window_ms: f64,
    /// Width of the rupture transition band, N.
    #[serde(default = "default_sigmoid_width")]
    pub sigmoid_width: f64,
    /// Duration of the descent from full stiffness to the dropped level, ms.
    #[serde(default = "default_onset")]
    pub rupture_onset_ms: f64,
    /// Duration of the smooth return to full stiffness, ms.
    #[serde(default = "default_recovery")]
    pub recovery_ms: f64,
    #[serde(default)]
    pub k_adh: f64,
    #[serde(default)]
    pub adh_range: f64,
}

fn default_drop() -> f64 {
    0.5
}
fn default_window() -> f64 {
    50.0
}
fn default_sigmoid_width() -> f64 {
    0.1
}
fn default_onset() -> f64 {
    4.0
}
fn default_recovery() -> f64 {
    200.0
}

impl Default for HapticMaterial {
    /// Tuned soft-tissue values: k0 = 0.5 N/mm, U = 0.3 N/mm^2, b = 0.02 N*s/mm.
    fn default() -> Self {
        Self {
            base_stiffness: 0.5,
            stiffness_gain: 0.3,
            normal_damping: 0.02,
            drag_linear: 0.01,
            drag_depth: 0.005,
            drag_quadratic: 0.0002,
            global_viscosity: 0.002,
            mu_s: 0.3,
            mu_k: 0.2,
            v_s: 5.0,
            v_stick: 0.1,
            f_thresh: 1.2,
            puncture_drop: default_drop(),
            puncture_window_ms: default_window(),
            sigmoid_width: default_sigmoid_width(),
            rupture_onset_ms: default_onset(),
            recovery_ms: default_recovery(),
            k_adh: 0.05,
            adh_range: 0.5,
        }
    }
}

impl HapticMaterial {
    /// Pial membrane over cortex: tuned stiffness, low rupture threshold.
    pub fn membrane() -> Self {
        Self {
            f_thresh: 1.0,
            ..Self::default()
        }
    }

    pub fn parenchyma() -> Self {
        Self {
            base_stiffness: 0.2,
            stiffness_gain: 0.15,
            normal_damping: 0.02,
            mu_s: 0.2,
            mu_k: 0.1,
            f_thresh: 2.8,
            k_adh: 0.08,
            adh_range: 0.8,
            ..Self::default()
        }
    }

    pub fn vessel_wall() -> Self {
        Self {
            base_stiffness: 1.0,
            stiffness_gain: 0.5,
            normal_damping: 0.03,
            mu_s: 0.4,
            mu_k: 0.3,
            f_thresh: 1.8,
            k_adh: 0.02,
            adh_range: 0.3,
            ..Self::default()
        }
    }

    /// Stiffness k(d) = k0 + U d at depth `d`, N/mm.
    pub fn stiffness_at(&self, depth: f64) -> f64 {
        self.base_stiffness + self.stiffness_gain * depth
    }

    pub fn validate(&self) -> Result<(), String> {
        let all = [
            self.base_stiffness,
            self.stiffness_gain,
            self.normal_damping,
            self.drag_linear,
            self.drag_depth,
            self.drag_quadratic,
            self.global_viscosity,
            self.mu_s,
            self.mu_k,
            self.v_s,
            self.v_stick,
            self.f_thresh,
            self.puncture_drop,
            self.puncture_window_ms,
            self.sigmoid_width,
            self.rupture_onset_ms,
            self.recovery_ms,
            self.k_adh,
            self.adh_range,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err("all coefficients must be finite".into());
        }
        let non_negative = [
            ("k0", self.base_stiffness),
            ("u", self.stiffness_gain),
            ("b", self.normal_damping),
            ("c0", self.drag_linear),
            ("c1", self.drag_depth),
            ("q_t", self.drag_quadratic),
            ("c_g", self.global_viscosity),
            ("k_adh", self.k_adh),
            ("adh_range", self.adh_range),
            ("rupture_onset_ms", self.rupture_onset_ms),
            ("v_stick", self.v_stick),
        ];
        for (name, v) in non_negative {
            if v < 0.0 {
                return Err(format!("{name} must be >= 0, got {v}"));
            }
        }
        if !(self.mu_s >= self.mu_k && self.mu_k >= 0.0) {
            return Err(format!("need mu_s >= mu_k >= 0, got {} / {}", self.mu_s, self.mu_k));
        }
        if self.v_s <= 0.0 {
            return Err("v_s must be > 0".into());
        }
        if self.f_thresh <= 0.0 {
            return Err("f_thresh must be > 0".into());
        }
        if !(self.puncture_drop > 0.0 && self.puncture_drop <= 1.0) {
            return Err(format!("puncture_drop must be in (0, 1], got {}", self.puncture_drop));
        }
        if self.puncture_window_ms < 0.0 || self.sigmoid_width <= 0.0 || self.recovery_ms <= 0.0 {
            return Err("puncture timing and sigmoid width must be positive".into());
        }
        Ok(())
    }
}

/// Material id -> profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MaterialRegistry {
    materials: BTreeMap<String, HapticMaterial>,
}

impl Default for MaterialRegistry {
    fn default() -> Self {
        Self::presets()
    }
}

impl MaterialRegistry {
    pub fn empty() -> Self {
        Self {
            materials: BTreeMap::new(),
        }
    }

    /// Built-in tissue presets: `membrane`, `parenchyma`, `vessel_wall`.
    pub fn presets() -> Self {
        let mut r = Self::empty();
        r.insert("membrane", HapticMaterial::membrane());
        r.insert("parenchyma", HapticMaterial::parenchyma());
        r.insert("vessel_wall", HapticMaterial::vessel_wall());
        r
    }

    pub fn insert(&mut self, id: impl Into<String>, mat: HapticMaterial) {
        self.materials.insert(id.into(), mat);
    }

    pub fn get(&self, id: &str) -> Result<&HapticMaterial, HapticError> {
        self.materials
            .get(id)
            .ok_or_else(|| HapticError::UnknownMaterial(id.to_owned()))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.materials.contains_key(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &HapticMaterial)> {
        self.materials.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.materials.is_empty()
    }

    /// Inserts or replaces every profile of `other`.
    pub fn extend(&mut self, other: &MaterialRegistry) {
        for (id, m) in other.iter() {
            self.insert(id.clone(), m.clone());
        }
    }

    pub fn validate(&self) -> Result<(), HapticError> {
        for (id, m) in &self.materials {
            m.validate().map_err(|reason| HapticError::InvalidMaterial {
                id: id.clone(),
                reason,
            })?;
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, HapticError> {
        let reg: Self = serde_json::from_str(text).map_err(|e| HapticError::InvalidMaterial {
            id: "<registry>".into(),
            reason: e.to_string(),
        })?;
        reg.validate()?;
        Ok(reg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid() {
        MaterialRegistry::presets().validate().unwrap();
        assert!(MaterialRegistry::presets().contains("vessel_wall"));
    }

    #[test]
    fn default_profile_matches_tuned_values() {
        let m = HapticMaterial::default();
        assert_eq!((m.base_stiffness, m.stiffness_gain, m.normal_damping), (0.5, 0.3, 0.02));
        assert_eq!(m.puncture_drop, 0.5);
        assert_eq!(m.puncture_window_ms, 50.0);
    }

    #[test]
    fn rejects_bad_profiles() {
        let bad = HapticMaterial {
            mu_s: 0.1,
            mu_k: 0.2,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = HapticMaterial {
            puncture_drop: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = HapticMaterial {
            f_thresh: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn registry_json_round_trip() {
        let reg = MaterialRegistry::presets();
        let text = serde_json::to_string_pretty(&reg).unwrap();
        assert_eq!(MaterialRegistry::from_json(&text).unwrap(), reg);
        assert!(matches!(reg.get("bone"), Err(HapticError::UnknownMaterial(_))));
    }
}
