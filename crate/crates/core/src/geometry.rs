//! Analytic signed-distance scene for the digital twin.
//!
//! Distances are millimeters, negative inside. The scene is a min-union of
//! primitives; each primitive carries a base material and an optional stack
//! of tissue layers indexed by penetration depth.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frames::Vec3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("scene has no primitives")]
    EmptyScene,
    #[error("invalid primitive #{index}: {reason}")]
    InvalidPrimitive { index: usize, reason: String },
    #[error("invalid layer stack on primitive #{index}: {reason}")]
    InvalidLayers { index: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SdfPrimitive {
    Sphere {
        center: [f64; 3],
        radius: f64,
    },
    HalfSpace {
        point: [f64; 3],
        /// Outward normal; the solid lies on the opposite side.
        normal: [f64; 3],
    },
    Capsule {
        a: [f64; 3],
        b: [f64; 3],
        radius: f64,
    },
    RoundedBox {
        center: [f64; 3],
        half_extents: [f64; 3],
        radius: f64,
    },
}

impl SdfPrimitive {
    fn validate(&self) -> Result<(), String> {
        let finite = |xs: &[f64]| xs.iter().all(|v| v.is_finite());
        match self {
            SdfPrimitive::Sphere { center, radius } => {
                if !finite(center) || !(*radius > 0.0 && radius.is_finite()) {
                    return Err("sphere needs finite center and radius > 0".into());
                }
            }
            SdfPrimitive::HalfSpace { point, normal } => {
                let n = Vec3::from(*normal);
                if !finite(point) || !finite(normal) || (n.norm() - 1.0).abs() > 1e-9 {
                    return Err("half-space normal must be unit length".into());
                }
            }
            SdfPrimitive::Capsule { a, b, radius } => {
                if !finite(a) || !finite(b) || !(*radius > 0.0 && radius.is_finite()) {
                    return Err("capsule needs finite endpoints and radius > 0".into());
                }
            }
            SdfPrimitive::RoundedBox {
                center,
                half_extents,
                radius,
            } => {
                if !finite(center) || !finite(half_extents) || !(*radius > 0.0 && radius.is_finite()) {
                    return Err("rounded box needs finite fields and radius > 0".into());
                }
                if half_extents.iter().any(|h| *h < *radius) {
                    return Err("rounding radius exceeds a half extent".into());
                }
            }
        }
        Ok(())
    }

    /// Exact signed distance and outward unit normal at `p`.
    pub fn eval(&self, p: &Vec3) -> (f64, Vec3) {
        match self {
            SdfPrimitive::Sphere { center, radius } => {
                let d = p - Vec3::from(*center);
                let len = d.norm();
                let n = if len > 0.0 { d / len } else { Vec3::z() };
                (len - radius, n)
            }
            SdfPrimitive::HalfSpace { point, normal } => {
                let n = Vec3::from(*normal);
                ((p - Vec3::from(*point)).dot(&n), n)
            }
            SdfPrimitive::Capsule { a, b, radius } => {
                let a = Vec3::from(*a);
                let ab = Vec3::from(*b) - a;
                let ap = p - a;
                let len2 = ab.norm_squared();
                let h = if len2 > 0.0 {
                    (ap.dot(&ab) / len2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                let d = ap - ab * h;
                let len = d.norm();
                let n = if len > 0.0 {
                    d / len
                } else {
                    any_perpendicular(&ab)
                };
                (len - radius, n)
            }
            SdfPrimitive::RoundedBox {
                center,
                half_extents,
                radius,
            } => {
                let local = p - Vec3::from(*center);
                let inner = Vec3::from(*half_extents).add_scalar(-radius);
                let q = local.abs() - inner;
                let outside = q.map(|v| v.max(0.0));
                let out_len = outside.norm();
                let max_q = q.max();
                let signs = local.map(|v| if v < 0.0 { -1.0 } else { 1.0 });
                if out_len > 0.0 {
                    let n = outside.component_mul(&signs) / out_len;
                    (out_len - radius, n)
                } else {
                    // Inside the core box: nearest face is the axis of max q.
                    let axis = (0..3)
                        .max_by(|&i, &j| q[i].total_cmp(&q[j]).then(j.cmp(&i)))
                        .expect("3 axes");
                    let mut n = Vec3::zeros();
                    n[axis] = signs[axis];
                    (max_q - radius, n)
                }
            }
        }
    }
}

fn any_perpendicular(v: &Vec3) -> Vec3 {
    let trial = if v.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let c = v.cross(&trial);
    let n = c.norm();
    if n > 0.0 {
        c / n
    } else {
        Vec3::z()
    }
}

/// Depth band `[start, start + thickness)` mapped to a material. The last
/// layer extends to infinite depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layer {
    pub thickness_mm: f64,
    pub material: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    #[serde(flatten)]
    pub primitive: SdfPrimitive,
    pub material: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub layers: Vec<Layer>,
}

impl SceneObject {
    pub fn new(primitive: SdfPrimitive, material: impl Into<String>) -> Self {
        Self {
            primitive,
            material: material.into(),
            layers: Vec::new(),
        }
    }

    pub fn with_layers(mut self, layers: Vec<Layer>) -> Self {
        self.layers = layers;
        self
    }

    /// Material at penetration depth `depth_mm` (0 at the surface).
    pub fn material_at(&self, depth_mm: f64) -> &str {
        let mut top = 0.0;
        for (i, layer) in self.layers.iter().enumerate() {
            top += layer.thickness_mm;
            if depth_mm < top || i + 1 == self.layers.len() {
                return &layer.material;
            }
        }
        &self.material
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    objects: Vec<SceneObject>,
}

impl Scene {
    pub fn new(objects: Vec<SceneObject>) -> Result<Self, GeometryError> {
        if objects.is_empty() {
            return Err(GeometryError::EmptyScene);
        }
        for (index, obj) in objects.iter().enumerate() {
            obj.primitive
                .validate()
                .map_err(|reason| GeometryError::InvalidPrimitive { index, reason })?;
            for layer in &obj.layers {
                if !(layer.thickness_mm > 0.0 && layer.thickness_mm.is_finite()) {
                    return Err(GeometryError::InvalidLayers {
                        index,
                        reason: format!("thickness must be > 0, got {}", layer.thickness_mm),
                    });
                }
            }
        }
        Ok(Self { objects })
    }

    pub fn objects(&self) -> &[SceneObject] {
        &self.objects
    }

    /// Every material id referenced by the scene.
    pub fn material_ids(&self) -> impl Iterator<Item = &str> {
        self.objects
            .iter()
            .flat_map(|o| std::iter::once(o.material.as_str()).chain(o.layers.iter().map(|l| l.material.as_str())))
    }

    /// Index of the minimizing primitive with its distance and normal. Ties
    /// go to the lowest index.
    fn nearest(&self, p: &Vec3) -> (usize, f64, Vec3) {
        let mut best = (0, f64::INFINITY, Vec3::z());
        for (i, obj) in self.objects.iter().enumerate() {
            let (phi, n) = obj.primitive.eval(p);
            if phi < best.1 {
                best = (i, phi, n);
            }
        }
        best
    }
}

/// Result of [`signed_distance`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdfSample<'a> {
    pub phi: f64,
    pub normal: Vec3,
    pub material: &'a str,
    pub object: usize,
}

pub fn signed_distance<'a>(scene: &'a Scene, p: &Vec3) -> SdfSample<'a> {
    let (object, phi, normal) = scene.nearest(p);
    let depth = (-phi).max(0.0);
    SdfSample {
        phi,
        normal,
        material: scene.objects[object].material_at(depth),
        object,
    }
}

/// Per-tick geometric contact summary.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactState {
    /// Penetration depth, mm, >= 0.
    pub depth: f64,
    /// Unit outward normal of the nearest surface.
    pub normal: Vec3,
    pub velocity: Vec3,
    pub v_normal: Vec3,
    pub v_tangential: Vec3,
    pub material: String,
    /// Distance to the nearest surface when outside, else 0.
    pub clearance: f64,
    /// Raw signed distance.
    pub phi: f64,
}

impl ContactState {
    pub fn in_contact(&self) -> bool {
        self.depth > 0.0
    }
}

pub fn contact_state(scene: &Scene, p: &Vec3, v: &Vec3) -> ContactState {
    let s = signed_distance(scene, p);
    let v_normal = s.normal * v.dot(&s.normal);
    ContactState {
        depth: (-s.phi).max(0.0),
        normal: s.normal,
        velocity: *v,
        v_normal,
        v_tangential: v - v_normal,
        material: s.material.to_owned(),
        clearance: s.phi.max(0.0),
        phi: s.phi,
    }
}

pub fn clearance(scene: &Scene, p: &Vec3) -> f64 {
    signed_distance(scene, p).phi.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(r: f64) -> SdfPrimitive {
        SdfPrimitive::Sphere {
            center: [0.0; 3],
            radius: r,
        }
    }

    #[test]
    fn sphere_surface_and_interior() {
        let scene = Scene::new(vec![SceneObject::new(sphere(5.0), "parenchyma")]).unwrap();
        let s = signed_distance(&scene, &Vec3::new(5.0, 0.0, 0.0));
        assert_eq!(s.phi, 0.0);
        assert_eq!(s.normal, Vec3::x());
        assert_eq!(signed_distance(&scene, &Vec3::new(2.0, 0.0, 0.0)).phi, -3.0);
        assert_eq!(clearance(&scene, &Vec3::new(10.0, 0.0, 0.0)), 5.0);
        assert_eq!(clearance(&scene, &Vec3::new(1.0, 0.0, 0.0)), 0.0);
    }

    #[test]
    fn empty_scene_rejected() {
        assert_eq!(Scene::new(vec![]), Err(GeometryError::EmptyScene));
    }

    #[test]
    fn invalid_primitives_rejected() {
        let bad = SceneObject::new(sphere(0.0), "m");
        assert!(Scene::new(vec![bad]).is_err());
        let bad = SceneObject::new(
            SdfPrimitive::HalfSpace {
                point: [0.0; 3],
                normal: [0.0, 0.0, 2.0],
            },
            "m",
        );
        assert!(Scene::new(vec![bad]).is_err());
        let bad = SceneObject::new(
            SdfPrimitive::RoundedBox {
                center: [0.0; 3],
                half_extents: [1.0, 1.0, 0.5],
                radius: 0.8,
            },
            "m",
        );
        assert!(Scene::new(vec![bad]).is_err());
    }

    #[test]
    fn contact_outside_and_radial() {
        let scene = Scene::new(vec![SceneObject::new(sphere(5.0), "parenchyma")]).unwrap();
        let c = contact_state(&scene, &Vec3::new(0.0, 8.0, 0.0), &Vec3::new(1.0, 2.0, 3.0));
        assert_eq!(c.depth, 0.0);
        assert_eq!(c.clearance, 3.0);

        let v = Vec3::new(-2.0, 0.0, 0.0);
        let c = contact_state(&scene, &Vec3::new(4.0, 0.0, 0.0), &v);
        assert_eq!(c.depth, 1.0);
        assert_eq!(c.v_tangential, Vec3::zeros());
        assert_eq!(c.v_normal, v);
        assert_eq!(c.v_normal + c.v_tangential, c.velocity);
    }

    #[test]
    fn layered_material_lookup() {
        let obj = SceneObject::new(sphere(10.0), "parenchyma").with_layers(vec![
            Layer {
                thickness_mm: 2.0,
                material: "membrane".into(),
            },
            Layer {
                thickness_mm: 1.0,
                material: "parenchyma".into(),
            },
        ]);
        // Hand-built band table: [0,2) membrane, [2,inf) parenchyma.
        for (depth, want) in [(0.0, "membrane"), (1.99, "membrane"), (2.0, "parenchyma"), (3.0, "parenchyma"), (9.0, "parenchyma")] {
            assert_eq!(obj.material_at(depth), want, "depth {depth}");
        }
        let scene = Scene::new(vec![obj]).unwrap();
        let c = contact_state(&scene, &Vec3::new(7.0, 0.0, 0.0), &Vec3::zeros());
        assert_eq!(c.depth, 3.0);
        assert_eq!(c.material, "parenchyma");
    }

    #[test]
    fn tie_goes_to_lowest_index() {
        let scene = Scene::new(vec![
            SceneObject::new(sphere(5.0), "a"),
            SceneObject::new(sphere(5.0), "b"),
        ])
        .unwrap();
        assert_eq!(signed_distance(&scene, &Vec3::new(7.0, 0.0, 0.0)).material, "a");
    }

    #[test]
    fn capsule_and_box_values() {
        let cap = SdfPrimitive::Capsule {
            a: [0.0, 0.0, 0.0],
            b: [10.0, 0.0, 0.0],
            radius: 1.0,
        };
        let (phi, n) = cap.eval(&Vec3::new(5.0, 3.0, 0.0));
        assert!((phi - 2.0).abs() < 1e-12);
        assert!((n - Vec3::y()).norm() < 1e-12);
        let (phi, _) = cap.eval(&Vec3::new(-2.0, 0.0, 0.0));
        assert!((phi - 1.0).abs() < 1e-12);

        let rb = SdfPrimitive::RoundedBox {
            center: [0.0; 3],
            half_extents: [2.0, 3.0, 4.0],
            radius: 0.5,
        };
        let (phi, n) = rb.eval(&Vec3::new(0.0, 0.0, 6.0));
        assert!((phi - 2.0).abs() < 1e-12);
        assert_eq!(n, Vec3::z());
        let (phi, n) = rb.eval(&Vec3::new(1.5, 0.0, 0.0));
        assert!((phi + 0.5).abs() < 1e-12);
        assert_eq!(n, Vec3::x());
    }

    #[test]
    fn scene_objects_parse_from_json() {
        let json = r#"[
            {"type": "sphere", "center": [0, 0, 0], "radius": 5, "material": "parenchyma",
             "layers": [{"thickness_mm": 2, "material": "membrane"}, {"thickness_mm": 1, "material": "parenchyma"}]},
            {"type": "half_space", "point": [0, 0, -5], "normal": [0, 0, 1], "material": "vessel_wall"}
        ]"#;
        let objs: Vec<SceneObject> = serde_json::from_str(json).unwrap();
        let scene = Scene::new(objs).unwrap();
        let ids: Vec<_> = scene.material_ids().collect();
        assert_eq!(ids, ["parenchyma", "membrane", "parenchyma", "vessel_wall"]);
    }
}
