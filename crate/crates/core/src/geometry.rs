//! Planar pose algebra shared by every other module.
//!
//! Frame convention: world Y is up and the ground plane is XZ. A camera
//! looks down its own −Z axis. Yaw θ is the right-handed rotation about +Y
//! (counter-clockwise when viewed from above), with θ = 0 facing world −Z.
//! The forward direction of a planar pose is therefore `(−sin θ, −cos θ)` in
//! `(x, z)`, and a positive bearing means "to the agent's left".
//!
//! Headings are stored only as unit vectors `(u, v) = (cos θ, sin θ)`; raw
//! radians appear only at API boundaries.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

const ROTATION_TOL: f64 = 1e-6;
const VERTICAL_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("degenerate pose: camera forward axis is vertical")]
    DegeneratePose,
    #[error("rotation is not a proper orthonormal matrix (deviation {0:.3e})")]
    NotARotation(f64),
    #[error("scale must be positive and finite, got {0}")]
    InvalidScale(f64),
}

/// Wraps an angle into `(−π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Planar heading as a unit vector `(cos θ, sin θ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Heading {
    u: f64,
    v: f64,
}

impl Heading {
    pub const ZERO: Heading = Heading { u: 1.0, v: 0.0 };

    pub fn from_angle(theta: f64) -> Result<Self, GeometryError> {
        if !theta.is_finite() {
            return Err(GeometryError::InvalidArgument(format!(
                "heading angle must be finite, got {theta}"
            )));
        }
        let (v, u) = theta.sin_cos();
        Ok(Self { u, v })
    }

    /// Normalizes an arbitrary non-zero `(u, v)`.
    pub fn from_components(u: f64, v: f64) -> Result<Self, GeometryError> {
        let n = u.hypot(v);
        if !n.is_finite() || n < 1e-12 {
            return Err(GeometryError::InvalidArgument(format!(
                "cannot normalize heading components ({u}, {v})"
            )));
        }
        Ok(Self { u: u / n, v: v / n })
    }

    pub fn u(&self) -> f64 {
        self.u
    }

    pub fn v(&self) -> f64 {
        self.v
    }

    pub fn angle(&self) -> f64 {
        self.v.atan2(self.u)
    }

    /// Cosine similarity `a·b`. The retrieval filter and its brute-force
    /// check must both go through this exact expression.
    #[inline]
    pub fn cosine(&self, other: &Heading) -> f64 {
        self.u * other.u + self.v * other.v
    }

    /// Rotates by `delta` radians (positive = turn left), renormalized.
    pub fn rotated(&self, delta: f64) -> Heading {
        let (s, c) = delta.sin_cos();
        let u = self.u * c - self.v * s;
        let v = self.u * s + self.v * c;
        let n = u.hypot(v);
        Heading { u: u / n, v: v / n }
    }

    /// Unit forward direction in world `(x, z)`.
    #[inline]
    pub fn forward(&self) -> (f64, f64) {
        (-self.v, -self.u)
    }

    /// Heading whose forward direction is `(dx, dz)`.
    pub fn facing(dx: f64, dz: f64) -> Result<Self, GeometryError> {
        Heading::from_components(-dz, -dx)
    }
}

/// Free-function form of [`Heading::from_angle`].
pub fn heading_from_angle(theta: f64) -> Result<Heading, GeometryError> {
    Heading::from_angle(theta)
}

pub fn heading_cosine(a: &Heading, b: &Heading) -> f64 {
    a.cosine(b)
}

/// Planar agent or camera pose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose3 {
    pub x: f64,
    pub z: f64,
    pub heading: Heading,
}

impl Pose3 {
    pub fn new(x: f64, z: f64, heading: Heading) -> Result<Self, GeometryError> {
        if !x.is_finite() || !z.is_finite() {
            return Err(GeometryError::InvalidArgument(format!(
                "pose position must be finite, got ({x}, {z})"
            )));
        }
        Ok(Self { x, z, heading })
    }

    pub fn from_xz_theta(x: f64, z: f64, theta: f64) -> Result<Self, GeometryError> {
        Pose3::new(x, z, Heading::from_angle(theta)?)
    }

    pub fn position(&self) -> (f64, f64) {
        (self.x, self.z)
    }

    pub fn distance_to(&self, x: f64, z: f64) -> f64 {
        (self.x - x).hypot(self.z - z)
    }

    /// Polar goal vector `(distance, bearing)` in this pose's frame,
    /// bearing in `(−π, π]`, positive to the left.
    pub fn goal_vector(&self, gx: f64, gz: f64) -> (f64, f64) {
        let dx = gx - self.x;
        let dz = gz - self.z;
        let dist = dx.hypot(dz);
        if dist == 0.0 {
            return (0.0, 0.0);
        }
        let target = (-dx).atan2(-dz);
        (dist, wrap_angle(target - self.heading.angle()))
    }
}

fn rotation_deviation(r: &Matrix3<f64>) -> f64 {
    let ortho = (r.transpose() * r - Matrix3::identity()).abs().max();
    let det = (r.determinant() - 1.0).abs();
    ortho.max(det)
}

fn check_rotation(r: &Matrix3<f64>) -> Result<(), GeometryError> {
    let dev = rotation_deviation(r);
    if dev.is_finite() && dev <= ROTATION_TOL {
        Ok(())
    } else {
        Err(GeometryError::NotARotation(dev))
    }
}

/// Rotation by `angle` radians about world +Y.
pub fn yaw_matrix(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

/// Yaw of the −Z axis mapped through `r`, or `None` when it is vertical.
fn yaw_of(r: &Matrix3<f64>) -> Option<f64> {
    let fwd = -r.column(2);
    if fwd.x.hypot(fwd.z) < VERTICAL_TOL {
        None
    } else {
        Some((-fwd.x).atan2(-fwd.z))
    }
}

/// Full camera pose: world-from-camera rotation plus camera centre.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose6 {
    rotation: Matrix3<f64>,
    position: Vector3<f64>,
}

impl Pose6 {
    pub fn new(rotation: Matrix3<f64>, position: Vector3<f64>) -> Result<Self, GeometryError> {
        check_rotation(&rotation)?;
        if !position.iter().all(|c| c.is_finite()) {
            return Err(GeometryError::InvalidArgument(
                "camera position must be finite".into(),
            ));
        }
        Ok(Self { rotation, position })
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn position(&self) -> &Vector3<f64> {
        &self.position
    }

    /// Drops altitude, pitch and roll.
    pub fn to_pose3(&self) -> Result<Pose3, GeometryError> {
        let yaw = yaw_of(&self.rotation).ok_or(GeometryError::DegeneratePose)?;
        Pose3::new(self.position.x, self.position.z, Heading::from_angle(yaw)?)
    }

    /// Re-expresses the pose through a similarity transform.
    pub fn transformed(&self, t: &SimilarityTransform) -> Pose6 {
        Pose6 {
            rotation: t.rotation * self.rotation,
            position: t.apply(&self.position),
        }
    }
}

pub fn pose6_to_pose3(p: &Pose6) -> Result<Pose3, GeometryError> {
    p.to_pose3()
}

/// `p ↦ scale · R · p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityTransform {
    scale: f64,
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl SimilarityTransform {
    pub fn new(
        scale: f64,
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
    ) -> Result<Self, GeometryError> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(GeometryError::InvalidScale(scale));
        }
        check_rotation(&rotation)?;
        if !translation.iter().all(|c| c.is_finite()) {
            return Err(GeometryError::InvalidArgument(
                "translation must be finite".into(),
            ));
        }
        Ok(Self {
            scale,
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            scale: 1.0,
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    #[inline]
    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.scale * (self.rotation * p) + self.translation
    }

    pub fn inverse(&self) -> SimilarityTransform {
        let rt = self.rotation.transpose();
        let inv_scale = 1.0 / self.scale;
        SimilarityTransform {
            scale: inv_scale,
            rotation: rt,
            translation: -(inv_scale * (rt * self.translation)),
        }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &SimilarityTransform) -> SimilarityTransform {
        SimilarityTransform {
            scale: self.scale * other.scale,
            rotation: self.rotation * other.rotation,
            translation: self.scale * (self.rotation * other.translation) + self.translation,
        }
    }

    /// Yaw the rotation imparts on a level camera; zero if the camera's
    /// forward axis is sent to vertical.
    pub fn yaw(&self) -> f64 {
        yaw_of(&self.rotation).unwrap_or(0.0)
    }
}

pub fn apply_similarity(t: &SimilarityTransform, p: &Vector3<f64>) -> Vector3<f64> {
    t.apply(p)
}
