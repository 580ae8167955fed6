//! Rigid SE(3) poses and small pose increments (twists).
//!
//! Units are millimeters and degrees throughout. Rotations are stored as 3×3
//! matrices; twists carry a degree-valued axis-angle vector.

use nalgebra::{Matrix3, Matrix4, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::GeometryError;

/// Orthonormality tolerance enforced on construction.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// A rigid transform: `x_world = rotation * x_local + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    translation: Vector3<f64>,
    rotation: Matrix3<f64>,
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            translation: Vector3::zeros(),
            rotation: Matrix3::identity(),
        }
    }

    /// Builds a pose, rejecting rotations that are not proper orthonormal.
    pub fn new(translation: Vector3<f64>, rotation: Matrix3<f64>) -> Result<Self, GeometryError> {
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(GeometryError::InvalidPose("non-finite translation".into()));
        }
        let err = (rotation.transpose() * rotation - Matrix3::identity()).amax();
        if !err.is_finite() || err >= ROTATION_TOLERANCE {
            return Err(GeometryError::InvalidPose(format!(
                "rotation is not orthonormal (|RᵀR − I|∞ = {err:e})"
            )));
        }
        if rotation.determinant() <= 0.0 {
            return Err(GeometryError::InvalidPose("rotation has negative determinant".into()));
        }
        Ok(Self { translation, rotation })
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            translation,
            rotation: Matrix3::identity(),
        }
    }

    /// Rotation from a degree-valued axis-angle vector plus a translation.
    pub fn from_axis_angle_deg(translation: Vector3<f64>, axis_angle_deg: Vector3<f64>) -> Self {
        Self {
            translation,
            rotation: rotation_from_axis_angle_deg(&axis_angle_deg),
        }
    }

    /// Rotation `Rz(yaw) · Ry(pitch) · Rx(roll)`, angles in degrees.
    pub fn from_rpy_deg(translation: Vector3<f64>, roll: f64, pitch: f64, yaw: f64) -> Self {
        let rot = Rotation3::from_euler_angles(roll.to_radians(), pitch.to_radians(), yaw.to_radians());
        Self {
            translation,
            rotation: *rot.matrix(),
        }
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            translation: self.rotation * other.translation + self.translation,
            rotation: self.rotation * other.rotation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose {
            translation: -(rt * self.translation),
            rotation: rt,
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn inverse_transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.transpose() * (p - self.translation)
    }

    /// Homogeneous 4×4 matrix.
    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Applies a twist in the world frame about this pose's origin: the
    /// translation is added and the rotation is pre-multiplied.
    pub fn apply_twist(&self, twist: &Twist) -> Pose {
        Pose {
            translation: self.translation + twist.d_translation,
            rotation: rotation_from_axis_angle_deg(&twist.d_rotation) * self.rotation,
        }
    }

    /// Translation in row 0..3 followed by the row-major rotation.
    pub fn to_array12(&self) -> [f64; 12] {
        let mut out = [0.0; 12];
        out[..3].copy_from_slice(self.translation.as_slice());
        for r in 0..3 {
            for c in 0..3 {
                out[3 + 3 * r + c] = self.rotation[(r, c)];
            }
        }
        out
    }

    pub fn from_array12(values: &[f64; 12]) -> Result<Pose, GeometryError> {
        let t = Vector3::new(values[0], values[1], values[2]);
        let r = Matrix3::from_row_slice(&values[3..]);
        Pose::new(t, r)
    }

    /// Translational distance in mm.
    pub fn translation_distance(&self, other: &Pose) -> f64 {
        (self.translation - other.translation).norm()
    }

    /// Geodesic rotation distance in degrees.
    pub fn rotation_distance_deg(&self, other: &Pose) -> f64 {
        rotation_log_deg(&(other.rotation * self.rotation.transpose())).norm()
    }
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

/// Serialized pose: translation (mm) and roll/pitch/yaw (degrees).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct PoseSpec {
    #[serde(default)]
    pub translation: [f64; 3],
    #[serde(default)]
    pub rpy_deg: [f64; 3],
}

impl PoseSpec {
    pub fn to_pose(&self) -> Pose {
        let [x, y, z] = self.translation;
        let [r, p, yw] = self.rpy_deg;
        Pose::from_rpy_deg(Vector3::new(x, y, z), r, p, yw)
    }
}

/// A small SE(3) increment: mm for translation, degrees (axis-angle) for rotation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Twist {
    pub d_translation: Vector3<f64>,
    pub d_rotation: Vector3<f64>,
}

impl Twist {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn new(d_translation: Vector3<f64>, d_rotation: Vector3<f64>) -> Self {
        Self { d_translation, d_rotation }
    }

    pub fn from_array(v: [f64; 6]) -> Self {
        Self {
            d_translation: Vector3::new(v[0], v[1], v[2]),
            d_rotation: Vector3::new(v[3], v[4], v[5]),
        }
    }

    pub fn to_array(&self) -> [f64; 6] {
        [
            self.d_translation.x,
            self.d_translation.y,
            self.d_translation.z,
            self.d_rotation.x,
            self.d_rotation.y,
            self.d_rotation.z,
        ]
    }

    pub fn is_zero(&self) -> bool {
        self.to_array().iter().all(|v| *v == 0.0)
    }

    pub fn scale(&self, s: f64) -> Twist {
        Twist::new(self.d_translation * s, self.d_rotation * s)
    }

    /// Rescales each part so its Euclidean norm does not exceed the limit.
    pub fn clamp_norm(&self, max_tr: f64, max_rot: f64) -> Twist {
        Twist::new(clamp_norm(self.d_translation, max_tr), clamp_norm(self.d_rotation, max_rot))
    }

    /// Clamps every component independently to `±max_tr` / `±max_rot`.
    pub fn clamp_per_axis(&self, max_tr: f64, max_rot: f64) -> Twist {
        Twist::new(
            self.d_translation.map(|v| v.clamp(-max_tr, max_tr)),
            self.d_rotation.map(|v| v.clamp(-max_rot, max_rot)),
        )
    }

    pub fn within_limits(&self, max_tr: f64, max_rot: f64) -> bool {
        let slack = 1e-12;
        self.d_translation.iter().all(|v| v.abs() <= max_tr + slack)
            && self.d_rotation.iter().all(|v| v.abs() <= max_rot + slack)
    }
}

impl std::ops::Add for Twist {
    type Output = Twist;

    fn add(self, rhs: Twist) -> Twist {
        Twist::new(self.d_translation + rhs.d_translation, self.d_rotation + rhs.d_rotation)
    }
}

pub(crate) fn clamp_norm(v: Vector3<f64>, max: f64) -> Vector3<f64> {
    let n = v.norm();
    if n > max && n > 0.0 {
        v * (max / n)
    } else {
        v
    }
}

/// Exponential map of a degree-valued axis-angle vector.
pub fn rotation_from_axis_angle_deg(axis_angle_deg: &Vector3<f64>) -> Matrix3<f64> {
    let w = axis_angle_deg.map(f64::to_radians);
    *Rotation3::new(w).matrix()
}

/// Logarithm map of a rotation matrix, returned as a degree-valued axis-angle vector.
pub fn rotation_log_deg(rotation: &Matrix3<f64>) -> Vector3<f64> {
    // Through the quaternion: stays finite when rounding pushes the trace past 3.
    UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*rotation))
        .scaled_axis()
        .map(f64::to_degrees)
}

/// Twist that carries `from` onto `to` under [`Pose::apply_twist`].
pub fn pose_delta(from: &Pose, to: &Pose) -> Twist {
    Twist {
        d_translation: to.translation - from.translation,
        d_rotation: rotation_log_deg(&(to.rotation * from.rotation.transpose())),
    }
}
