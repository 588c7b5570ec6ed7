//! Rigid frames, local/global transforms and bearing vectors.
//!
//! Every vector is stored as a 3-vector. Planar scenarios live in the
//! `z = 0` plane and their frames rotate only the x-y block.

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};

use crate::error::GeometryError;

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Tolerance on `QᵀQ = I` and `det Q = 1`.
pub const ROTATION_TOLERANCE: f64 = 1e-12;

/// Two agents closer than this (meters) have no defined bearing.
pub const COINCIDENCE_THRESHOLD: f64 = 1e-9;

/// Checks that `q` is a proper rotation.
pub fn validate_rotation(q: &Mat3) -> Result<Mat3, GeometryError> {
    if q.iter().any(|v| !v.is_finite()) {
        return Err(GeometryError::NotOrthogonal { defect: f64::NAN });
    }
    let defect = (q.transpose() * q - Mat3::identity()).abs().max();
    if defect > ROTATION_TOLERANCE {
        return Err(GeometryError::NotOrthogonal { defect });
    }
    let det = q.determinant();
    if (det - 1.0).abs() > ROTATION_TOLERANCE {
        return Err(GeometryError::NotProperRotation { det });
    }
    Ok(*q)
}

/// Rotation of `angle` radians about `axis` (right-hand rule).
pub fn axis_angle(axis: &Vec3, angle: f64) -> Result<Mat3, GeometryError> {
    let norm = axis.norm();
    if !(norm > COINCIDENCE_THRESHOLD) {
        return Err(GeometryError::ZeroAxis);
    }
    let axis = Unit::new_unchecked(axis / norm);
    Ok(Rotation3::from_axis_angle(&axis, angle).into_inner())
}

/// Planar rotation about the global z-axis.
pub fn rot_z(angle: f64) -> Mat3 {
    let (s, c) = angle.sin_cos();
    Mat3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// An agent's private, time-invariant frame.
///
/// `rotation` maps local directions to global ones. A point expressed
/// globally as `p` reads `rotationᵀ (p + translation)` in the local frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentFrame {
    rotation: Mat3,
    translation: Vec3,
}

impl Default for AgentFrame {
    fn default() -> Self {
        Self::identity()
    }
}

impl AgentFrame {
    pub fn new(rotation: Mat3, translation: Vec3) -> Result<Self, GeometryError> {
        let rotation = validate_rotation(&rotation)?;
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Mat3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn rotation(&self) -> &Mat3 {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    /// Whether the frame keeps the z-axis fixed (a valid planar frame).
    pub fn is_planar(&self) -> bool {
        let q = &self.rotation;
        (q[(2, 2)] - 1.0).abs() <= ROTATION_TOLERANCE
            && q[(0, 2)].abs() <= ROTATION_TOLERANCE
            && q[(1, 2)].abs() <= ROTATION_TOLERANCE
            && self.translation.z == 0.0
    }

    /// Global point to local coordinates.
    pub fn to_local(&self, p_global: &Vec3) -> Vec3 {
        self.rotation.tr_mul(&(p_global + self.translation))
    }

    /// Local point to global coordinates; inverse of [`AgentFrame::to_local`].
    pub fn from_local(&self, p_local: &Vec3) -> Vec3 {
        self.rotation * p_local - self.translation
    }

    /// Global direction (free vector) to local coordinates.
    pub fn vector_to_local(&self, v_global: &Vec3) -> Vec3 {
        self.rotation.tr_mul(v_global)
    }

    pub fn vector_from_local(&self, v_local: &Vec3) -> Vec3 {
        self.rotation * v_local
    }
}

/// Which frame a vector is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameTag {
    Global,
    /// Private frame of the agent with this (0-based) index.
    Local(usize),
}

/// Unit vector pointing from one agent to another.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BearingVector {
    g: Vec3,
    frame: FrameTag,
}

impl BearingVector {
    /// Normalizes `v`, failing when it is shorter than the coincidence threshold.
    pub fn from_vector(v: &Vec3, frame: FrameTag) -> Result<Self, GeometryError> {
        let len = v.norm();
        if !(len > COINCIDENCE_THRESHOLD) {
            return Err(GeometryError::CoincidentAgents { distance: len });
        }
        Ok(Self { g: v / len, frame })
    }

    pub fn vector(&self) -> &Vec3 {
        &self.g
    }

    pub fn frame(&self) -> FrameTag {
        self.frame
    }

    pub fn dot(&self, other: &BearingVector) -> f64 {
        self.g.dot(&other.g)
    }
}

/// Global bearing from `p_i` toward `p_j`.
pub fn bearing(p_i: &Vec3, p_j: &Vec3) -> Result<BearingVector, GeometryError> {
    BearingVector::from_vector(&(p_j - p_i), FrameTag::Global)
}

/// Bearing from `p_i` toward `p_j`, both already in agent `agent`'s frame.
pub fn local_bearing(agent: usize, p_i: &Vec3, p_j: &Vec3) -> Result<BearingVector, GeometryError> {
    BearingVector::from_vector(&(p_j - p_i), FrameTag::Local(agent))
}
