//! Rigid frame registration between the hand, workspace and twin frames.
//!
//! Lengths are millimeters throughout. The twin renders in its own units,
//! related to millimeters by a fixed isotropic scale.

use nalgebra::{Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Position or direction in millimeters.
pub type Vec3 = Vector3<f64>;

const ORTHONORMAL_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrameError {
    #[error("degenerate fiducials: {0}")]
    DegenerateFiducials(String),
    #[error("rotation is not orthonormal with det +1 (error {0:e})")]
    NotARotation(f64),
    #[error("calibration field `{field}` is invalid: {reason}")]
    InvalidCalibration { field: &'static str, reason: String },
}

/// Rotation followed by translation, `p -> R p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vec3,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
        }
    }

    /// Builds a transform, rejecting matrices that are not proper rotations.
    pub fn new(rotation: Matrix3<f64>, translation: Vec3) -> Result<Self, FrameError> {
        let ortho_err = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        let det_err = (rotation.determinant() - 1.0).abs();
        let err = ortho_err.max(det_err);
        if !err.is_finite() || err > ORTHONORMAL_TOL || !translation.iter().all(|v| v.is_finite()) {
            return Err(FrameError::NotARotation(err));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    /// Rotation of `angle_rad` about `axis`, no translation.
    pub fn from_axis_angle(axis: Vec3, angle_rad: f64) -> Self {
        let rot = Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle_rad);
        Self {
            rotation: *rot.matrix(),
            translation: Vec3::zeros(),
        }
    }

    /// Row-major 3x3 rotation plus translation, as stored in scenario files.
    pub fn from_row_major(rows: [[f64; 3]; 3], translation: [f64; 3]) -> Result<Self, FrameError> {
        let m = Matrix3::new(
            rows[0][0], rows[0][1], rows[0][2], rows[1][0], rows[1][1], rows[1][2], rows[2][0],
            rows[2][1], rows[2][2],
        );
        Self::new(m, Vec3::from(translation))
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    /// Applies only the rotation; used for increments and directions.
    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// Angle of the relative rotation between `self` and `other`, in radians.
    pub fn rotation_angle_to(&self, other: &RigidTransform) -> f64 {
        let rel = self.rotation.transpose() * other.rotation;
        let c = ((rel.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
        c.acos()
    }
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

pub fn transform_point(t: &RigidTransform, p: &Vec3) -> Vec3 {
    t.transform_point(p)
}

/// Result of a fiducial registration.
#[derive(Debug, Clone, Copy)]
pub struct Registration {
    pub transform: RigidTransform,
    /// Root-mean-square residual of the fitted correspondences, mm.
    pub rms_mm: f64,
}

/// Least-squares rigid transform mapping each `src` point onto its `dst`
/// partner (orthogonal Procrustes via SVD of the cross-covariance).
pub fn register_rig(pairs: &[(Vec3, Vec3)]) -> Result<Registration, FrameError> {
    if pairs.len() < 3 {
        return Err(FrameError::DegenerateFiducials(format!(
            "need at least 3 correspondences, got {}",
            pairs.len()
        )));
    }
    if pairs
        .iter()
        .any(|(a, b)| !a.iter().chain(b.iter()).all(|v| v.is_finite()))
    {
        return Err(FrameError::DegenerateFiducials("non-finite coordinate".into()));
    }

    let n = pairs.len() as f64;
    let src_c = pairs.iter().fold(Vec3::zeros(), |acc, (a, _)| acc + a) / n;
    let dst_c = pairs.iter().fold(Vec3::zeros(), |acc, (_, b)| acc + b) / n;

    let mut h = Matrix3::zeros();
    let mut spread = 0.0_f64;
    for (a, b) in pairs {
        let da = a - src_c;
        h += da * (b - dst_c).transpose();
        spread = spread.max(da.norm());
    }

    // Collinear sets leave a rank <= 1 scatter matrix.
    let scatter = pairs
        .iter()
        .fold(Matrix3::zeros(), |acc, (a, _)| {
            let d = a - src_c;
            acc + d * d.transpose()
        });
    let sv = scatter.singular_values();
    let mut sorted = [sv[0], sv[1], sv[2]];
    sorted.sort_by(|x, y| y.total_cmp(x));
    let scale = spread.max(1.0);
    if sorted[1] <= 1e-12 * scale * scale * n {
        return Err(FrameError::DegenerateFiducials(
            "points are collinear or coincident".into(),
        ));
    }

    let svd = h.svd(true, true);
    let u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    let v = v_t.transpose();
    let mut rotation = v * u.transpose();
    if rotation.determinant() < 0.0 {
        // Flip the axis of the smallest singular value.
        let (min_idx, _) = svd
            .singular_values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("three singular values");
        let mut flip = Matrix3::identity();
        flip[(min_idx, min_idx)] = -1.0;
        rotation = v * flip * u.transpose();
    }
    let translation = dst_c - rotation * src_c;
    let transform = RigidTransform {
        rotation,
        translation,
    };

    let sq: f64 = pairs
        .iter()
        .map(|(a, b)| (transform.transform_point(a) - b).norm_squared())
        .sum();
    Ok(Registration {
        transform,
        rms_mm: (sq / n).sqrt(),
    })
}

/// Fixed workspace calibration: needle length, table extent and the
/// metric-to-render scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkspaceCalibration {
    #[serde(default = "default_needle_length")]
    pub needle_length_mm: f64,
    #[serde(default = "default_table_extent")]
    pub table_extent_mm: [f64; 2],
    #[serde(default = "default_units_per_mm")]
    pub units_per_mm: f64,
    #[serde(default)]
    pub hand_to_workspace: TransformSpec,
}

fn default_needle_length() -> f64 {
    35.0
}
fn default_table_extent() -> [f64; 2] {
    [600.0, 400.0]
}
fn default_units_per_mm() -> f64 {
    0.01
}

impl Default for WorkspaceCalibration {
    fn default() -> Self {
        Self {
            needle_length_mm: default_needle_length(),
            table_extent_mm: default_table_extent(),
            units_per_mm: default_units_per_mm(),
            hand_to_workspace: TransformSpec::default(),
        }
    }
}

impl WorkspaceCalibration {
    pub fn validate(&self) -> Result<RigidTransform, FrameError> {
        if !(self.units_per_mm > 0.0 && self.units_per_mm.is_finite()) {
            return Err(FrameError::InvalidCalibration {
                field: "units_per_mm",
                reason: format!("must be > 0, got {}", self.units_per_mm),
            });
        }
        if !self.table_extent_mm.iter().all(|v| *v > 0.0 && v.is_finite()) {
            return Err(FrameError::InvalidCalibration {
                field: "table_extent_mm",
                reason: "extents must be > 0".into(),
            });
        }
        if !(self.needle_length_mm > 0.0 && self.needle_length_mm.is_finite()) {
            return Err(FrameError::InvalidCalibration {
                field: "needle_length_mm",
                reason: "must be > 0".into(),
            });
        }
        self.hand_to_workspace.to_transform()
    }

    pub fn mm_to_render_units(&self, x_mm: f64) -> f64 {
        mm_to_render_units(x_mm, self.units_per_mm)
    }

    pub fn render_units_to_mm(&self, units: f64) -> f64 {
        render_units_to_mm(units, self.units_per_mm)
    }
}

pub fn mm_to_render_units(x_mm: f64, units_per_mm: f64) -> f64 {
    x_mm * units_per_mm
}

pub fn render_units_to_mm(units: f64, units_per_mm: f64) -> f64 {
    units / units_per_mm
}

/// Serialized form of a [`RigidTransform`]: row-major rotation + translation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformSpec {
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
}

impl Default for TransformSpec {
    fn default() -> Self {
        Self {
            rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            translation: [0.0; 3],
        }
    }
}

impl TransformSpec {
    pub fn to_transform(&self) -> Result<RigidTransform, FrameError> {
        RigidTransform::from_row_major(self.rotation, self.translation)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    // Plain triple-loop matrix-vector product, independent of nalgebra.
    fn matvec(m: [[f64; 3]; 3], p: [f64; 3]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for i in 0..3 {
            for j in 0..3 {
                out[i] += m[i][j] * p[j];
            }
        }
        out
    }

    #[test]
    fn identity_and_translation() {
        let p = Vec3::new(1.0, 2.0, 3.0);
        assert_eq!(transform_point(&RigidTransform::identity(), &p), p);
        let t = RigidTransform::from_translation(Vec3::new(0.0, 0.0, 5.0));
        assert_eq!(t.transform_point(&Vec3::zeros()), Vec3::new(0.0, 0.0, 5.0));
    }

    #[test]
    fn quarter_turn_about_z() {
        let t = RigidTransform::from_axis_angle(Vec3::z(), FRAC_PI_2);
        let got = t.transform_point(&Vec3::x());
        let rows = [
            [FRAC_PI_2.cos(), -FRAC_PI_2.sin(), 0.0],
            [FRAC_PI_2.sin(), FRAC_PI_2.cos(), 0.0],
            [0.0, 0.0, 1.0],
        ];
        let want = matvec(rows, [1.0, 0.0, 0.0]);
        for i in 0..3 {
            assert!((got[i] - want[i]).abs() < 1e-12);
        }
        assert!((got - Vec3::y()).norm() < 1e-12);
    }

    #[test]
    fn rejects_reflection_and_skew() {
        let reflect = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, -1.0]];
        assert!(RigidTransform::from_row_major(reflect, [0.0; 3]).is_err());
        let skew = [[1.0, 0.1, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert!(RigidTransform::from_row_major(skew, [0.0; 3]).is_err());
    }

    #[test]
    fn register_identical_sets() {
        let pts = [
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(10.0, 0.0, 0.0),
            Vec3::new(0.0, 20.0, 0.0),
            Vec3::new(0.0, 0.0, 35.0),
        ];
        let pairs: Vec<_> = pts.iter().map(|p| (*p, *p)).collect();
        let reg = register_rig(&pairs).unwrap();
        assert!(reg.rms_mm < 1e-12);
        assert!((reg.transform.rotation() - Matrix3::identity()).abs().max() < 1e-12);
        assert!(reg.transform.translation().norm() < 1e-12);
    }

    #[test]
    fn register_pure_translation() {
        let pts = [
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(600.0, 0.0, 0.0),
            Vec3::new(0.0, 400.0, 0.0),
            Vec3::new(0.0, 0.0, 35.0),
        ];
        let shift = Vec3::new(10.0, 0.0, 0.0);
        let pairs: Vec<_> = pts.iter().map(|p| (*p, p + shift)).collect();
        let reg = register_rig(&pairs).unwrap();
        assert!((reg.transform.translation() - shift).norm() < 1e-9);
        assert!(reg.transform.rotation_angle_to(&RigidTransform::identity()) < 1e-9);
    }

    #[test]
    fn register_degenerate() {
        let a = Vec3::new(1.0, 2.0, 3.0);
        let two = vec![(a, a), (a * 2.0, a * 2.0)];
        assert!(matches!(register_rig(&two), Err(FrameError::DegenerateFiducials(_))));
        let collinear: Vec<_> = (0..5).map(|i| (a * i as f64, a * i as f64)).collect();
        assert!(matches!(
            register_rig(&collinear),
            Err(FrameError::DegenerateFiducials(_))
        ));
    }

    #[test]
    fn render_scale() {
        let cal = WorkspaceCalibration::default();
        assert!((cal.mm_to_render_units(10.0) - 0.1).abs() < 1e-15);
        assert_eq!(cal.mm_to_render_units(0.0), 0.0);
        assert!((cal.mm_to_render_units(cal.needle_length_mm) - 0.35).abs() < 1e-15);
        let x = 123.456;
        let back = cal.render_units_to_mm(cal.mm_to_render_units(x));
        assert!((back - x).abs() <= 4.0 * f64::EPSILON * x);
    }

    #[test]
    fn calibration_validation() {
        let mut cal = WorkspaceCalibration::default();
        assert!(cal.validate().is_ok());
        cal.units_per_mm = 0.0;
        assert!(cal.validate().is_err());
        let cal = WorkspaceCalibration {
            table_extent_mm: [600.0, -1.0],
            ..Default::default()
        };
        assert!(cal.validate().is_err());
    }
}
