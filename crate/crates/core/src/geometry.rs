//! Rotation and rigid/similarity transform math.
//!
//! Quaternions are stored as `(w, x, y, z)` everywhere. Construction keeps the
//! raw components untouched; hemisphere canonicalization (`w >= 0`) only
//! happens in [`Quaternion::normalize`], so values read from files survive a
//! write unchanged.

use std::fmt;
use std::ops::{Mul, Neg};

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// 3-vector used for positions and directions. Units depend on context.
pub type Vec3 = nalgebra::Vector3<f64>;

/// Tolerance used when validating that a matrix read from outside is a rotation.
const ROTATION_CHECK_TOL: f64 = 1e-6;

/// Below this rotation-vector norm the Taylor branches of log/exp are used.
const SMALL_ANGLE: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid quaternion ({0}): zero norm or non-finite component")]
    InvalidQuaternion(Quaternion),
    #[error("invalid rotation matrix: {0}")]
    InvalidRotation(String),
    #[error("invalid similarity transform: scale must be positive and finite, got {0}")]
    InvalidScale(f64),
}

/// A quaternion `w + xi + yj + zk`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl fmt::Display for Quaternion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.w, self.x, self.y, self.z)
    }
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    /// Rotation of `angle` radians about `axis` (need not be unit length).
    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        let n = axis.norm();
        if n == 0.0 {
            return Self::IDENTITY;
        }
        let half = 0.5 * angle;
        let v = axis * (half.sin() / n);
        Self::new(half.cos(), v.x, v.y, v.z)
    }

    pub fn vector(&self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }

    pub fn dot(&self, other: &Quaternion) -> f64 {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.w.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn conjugate(&self) -> Self {
        Self::new(self.w, -self.x, -self.y, -self.z)
    }

    pub fn scale(&self, k: f64) -> Self {
        Self::new(self.w * k, self.x * k, self.y * k, self.z * k)
    }

    /// Unit-norm quaternion on the canonical hemisphere: `w > 0`, or when
    /// `w == 0` the first nonzero of `x, y, z` is positive.
    pub fn normalize(&self) -> Result<Self, GeometryError> {
        let n = self.norm();
        if !self.is_finite() || !n.is_finite() || n == 0.0 {
            return Err(GeometryError::InvalidQuaternion(*self));
        }
        let q = self.scale(1.0 / n);
        Ok(q.canonical())
    }

    /// Representative of `{q, -q}` on the canonical hemisphere, without rescaling.
    pub fn canonical(&self) -> Self {
        let lead = [self.w, self.x, self.y, self.z]
            .into_iter()
            .find(|c| *c != 0.0)
            .unwrap_or(0.0);
        if lead < 0.0 {
            -*self
        } else {
            *self
        }
    }

    /// Rotate a vector by this (unit) quaternion.
    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        let u = self.vector();
        let t = 2.0 * u.cross(v);
        v + self.w * t + u.cross(&t)
    }

    pub fn to_rotmat(&self) -> RotMat3 {
        quat_to_rotmat(self)
    }
}

impl Neg for Quaternion {
    type Output = Quaternion;

    fn neg(self) -> Quaternion {
        Quaternion::new(-self.w, -self.x, -self.y, -self.z)
    }
}

/// Hamilton product.
impl Mul for Quaternion {
    type Output = Quaternion;

    fn mul(self, r: Quaternion) -> Quaternion {
        let l = self;
        Quaternion::new(
            l.w * r.w - l.x * r.x - l.y * r.y - l.z * r.z,
            l.w * r.x + l.x * r.w + l.y * r.z - l.z * r.y,
            l.w * r.y - l.x * r.z + l.y * r.w + l.z * r.x,
            l.w * r.z + l.x * r.y - l.y * r.x + l.z * r.w,
        )
    }
}

/// Orthonormal 3x3 rotation matrix with determinant +1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotMat3(Matrix3<f64>);

impl RotMat3 {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Validates orthonormality and orientation before wrapping.
    pub fn new(m: Matrix3<f64>) -> Result<Self, GeometryError> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::InvalidRotation("non-finite entry".into()));
        }
        let ortho = (m.transpose() * m - Matrix3::identity()).abs().max();
        if ortho > ROTATION_CHECK_TOL {
            return Err(GeometryError::InvalidRotation(format!(
                "not orthonormal (max |RᵀR - I| = {ortho:e})"
            )));
        }
        let det = m.determinant();
        if (det - 1.0).abs() > ROTATION_CHECK_TOL {
            return Err(GeometryError::InvalidRotation(format!(
                "determinant {det} is not +1"
            )));
        }
        Ok(Self(m))
    }

    pub fn from_row_major(r: [f64; 9]) -> Result<Self, GeometryError> {
        Self::new(Matrix3::from_row_slice(&r))
    }

    pub fn to_row_major(&self) -> [f64; 9] {
        let m = &self.0;
        [
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 0)],
            m[(1, 1)],
            m[(1, 2)],
            m[(2, 0)],
            m[(2, 1)],
            m[(2, 2)],
        ]
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }
}

pub fn quat_to_rotmat(q: &Quaternion) -> RotMat3 {
    let Quaternion { w, x, y, z } = *q;
    RotMat3(Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    ))
}

/// Shepperd's method: pivot on the largest of the four squared components.
pub fn rotmat_to_quat(r: &RotMat3) -> Quaternion {
    let m = &r.0;
    let trace = m[(0, 0)] + m[(1, 1)] + m[(2, 2)];
    let q = if trace > m[(0, 0)].max(m[(1, 1)]).max(m[(2, 2)]) {
        let s = 2.0 * (1.0 + trace).sqrt();
        Quaternion::new(
            0.25 * s,
            (m[(2, 1)] - m[(1, 2)]) / s,
            (m[(0, 2)] - m[(2, 0)]) / s,
            (m[(1, 0)] - m[(0, 1)]) / s,
        )
    } else if m[(0, 0)] >= m[(1, 1)] && m[(0, 0)] >= m[(2, 2)] {
        let s = 2.0 * (1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).sqrt();
        Quaternion::new(
            (m[(2, 1)] - m[(1, 2)]) / s,
            0.25 * s,
            (m[(0, 1)] + m[(1, 0)]) / s,
            (m[(0, 2)] + m[(2, 0)]) / s,
        )
    } else if m[(1, 1)] >= m[(2, 2)] {
        let s = 2.0 * (1.0 + m[(1, 1)] - m[(0, 0)] - m[(2, 2)]).sqrt();
        Quaternion::new(
            (m[(0, 2)] - m[(2, 0)]) / s,
            (m[(0, 1)] + m[(1, 0)]) / s,
            0.25 * s,
            (m[(1, 2)] + m[(2, 1)]) / s,
        )
    } else {
        let s = 2.0 * (1.0 + m[(2, 2)] - m[(0, 0)] - m[(1, 1)]).sqrt();
        Quaternion::new(
            (m[(1, 0)] - m[(0, 1)]) / s,
            (m[(0, 2)] + m[(2, 0)]) / s,
            (m[(1, 2)] + m[(2, 1)]) / s,
            0.25 * s,
        )
    };
    let n = q.norm();
    q.scale(1.0 / n).canonical()
}

/// Logarithm of a unit quaternion: `axis * angle / 2`.
pub fn log_quat(q: &Quaternion) -> Vec3 {
    let q = q.canonical();
    let v = q.vector();
    let n = v.norm();
    if n < SMALL_ANGLE {
        // atan2(n, w) / n ≈ 1/w for tiny n
        return v / q.w;
    }
    v * (n.atan2(q.w) / n)
}

pub fn exp_quat(v: &Vec3) -> Quaternion {
    let theta = v.norm();
    let sinc = if theta < SMALL_ANGLE {
        1.0 - theta * theta / 6.0
    } else {
        theta.sin() / theta
    };
    Quaternion::new(theta.cos(), v.x * sinc, v.y * sinc, v.z * sinc)
}

/// Intrinsic z-y-x Euler angles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerZyx {
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
}

/// `R = Rz(yaw) · Ry(pitch) · Rx(roll)`. At gimbal lock roll is folded into yaw.
pub fn quat_to_euler(q: &Quaternion) -> EulerZyx {
    let m = quat_to_rotmat(q).0;
    let cos_pitch = m[(0, 0)].hypot(m[(1, 0)]);
    let pitch = (-m[(2, 0)]).atan2(cos_pitch);
    if cos_pitch < 1e-12 {
        EulerZyx {
            yaw: (-m[(0, 1)]).atan2(m[(1, 1)]),
            pitch,
            roll: 0.0,
        }
    } else {
        EulerZyx {
            yaw: m[(1, 0)].atan2(m[(0, 0)]),
            pitch,
            roll: m[(2, 1)].atan2(m[(2, 2)]),
        }
    }
}

pub fn euler_to_quat(e: &EulerZyx) -> Quaternion {
    let qz = Quaternion::from_axis_angle(&Vec3::z(), e.yaw);
    let qy = Quaternion::from_axis_angle(&Vec3::y(), e.pitch);
    let qx = Quaternion::from_axis_angle(&Vec3::x(), e.roll);
    (qz * qy * qx).canonical()
}

/// Angle in degrees of the relative rotation between two unit quaternions.
///
/// Equal to `2·acos(|⟨q1,q2⟩|)` but evaluated as `4·atan2(|q1 − s·q2|, |q1 + s·q2|)`
/// with `s = sign⟨q1,q2⟩`, which stays in range without clamping, is exact
/// for `q2 = ±q1`, and keeps full precision for small angles.
pub fn rotation_error_deg(q1: &Quaternion, q2: &Quaternion) -> f64 {
    let s = if q1.dot(q2) < 0.0 { -1.0 } else { 1.0 };
    let d = [q1.w - s * q2.w, q1.x - s * q2.x, q1.y - s * q2.y, q1.z - s * q2.z];
    let p = [q1.w + s * q2.w, q1.x + s * q2.x, q1.y + s * q2.y, q1.z + s * q2.z];
    let dn = d.iter().map(|v| v * v).sum::<f64>().sqrt();
    let pn = p.iter().map(|v| v * v).sum::<f64>().sqrt();
    (4.0 * dn.atan2(pn)).to_degrees().clamp(0.0, 180.0)
}

pub fn translation_error(p1: &Vec3, p2: &Vec3) -> f64 {
    (p1 - p2).norm()
}

/// World-frame camera center `C = −Rᵀt` from world-to-camera extrinsics.
pub fn camera_center_from_extrinsics(qvec: &Quaternion, tvec: &Vec3) -> Vec3 {
    -qvec.conjugate().rotate(tvec)
}

/// Inverse of [`camera_center_from_extrinsics`]: `t = −R·C`.
pub fn tvec_from_camera_center(qvec: &Quaternion, center: &Vec3) -> Vec3 {
    -qvec.rotate(center)
}

/// Camera position plus camera-to-world orientation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose6DoF {
    pub position: Vec3,
    pub orientation: Quaternion,
}

impl Pose6DoF {
    pub fn new(position: Vec3, orientation: Quaternion) -> Self {
        Self {
            position,
            orientation,
        }
    }

    pub fn identity() -> Self {
        Self::new(Vec3::zeros(), Quaternion::IDENTITY)
    }

    /// Pose of a camera given world-to-camera extrinsics.
    pub fn from_extrinsics(qvec: &Quaternion, tvec: &Vec3) -> Self {
        Self::new(
            camera_center_from_extrinsics(qvec, tvec),
            qvec.conjugate(),
        )
    }
}

/// `p ↦ s·R·p + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityTransform {
    pub scale: f64,
    pub rotation: Quaternion,
    pub translation: Vec3,
}

impl SimilarityTransform {
    pub fn identity() -> Self {
        Self {
            scale: 1.0,
            rotation: Quaternion::IDENTITY,
            translation: Vec3::zeros(),
        }
    }

    /// Normalizes `rotation` and rejects non-positive scales.
    pub fn new(scale: f64, rotation: Quaternion, translation: Vec3) -> Result<Self, GeometryError> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(GeometryError::InvalidScale(scale));
        }
        Ok(Self {
            scale,
            rotation: rotation.normalize()?,
            translation,
        })
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.scale * self.rotation.rotate(p) + self.translation
    }

    pub fn apply_to_pose(&self, pose: &Pose6DoF) -> Pose6DoF {
        Pose6DoF::new(
            self.apply(&pose.position),
            self.rotation * pose.orientation,
        )
    }

    pub fn inverse(&self) -> Self {
        let rot_inv = self.rotation.conjugate();
        Self {
            scale: 1.0 / self.scale,
            rotation: rot_inv,
            translation: -rot_inv.rotate(&self.translation) / self.scale,
        }
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &SimilarityTransform) -> Self {
        Self {
            scale: self.scale * other.scale,
            rotation: self.rotation * other.rotation,
            translation: self.apply(&other.translation),
        }
    }
}

pub fn apply_similarity(t: &SimilarityTransform, p: &Vec3) -> Vec3 {
    t.apply(p)
}

pub fn apply_similarity_to_pose(t: &SimilarityTransform, pose: &Pose6DoF) -> Pose6DoF {
    t.apply_to_pose(pose)
}
