//! Vector geometry shared by every fluent family: vertex angles by the Law
//! of Cosines, the torso-anchored reference frame and its anatomical planes.

use thiserror::Error;

use crate::skeleton::{Frame, JointId, PoseError, Side, Vec3};

/// Relative tolerance on cross-product norms (sine of the spanned angle).
pub const CROSS_TOLERANCE: f64 = 1e-12;
/// Relative tolerance on link lengths for vertex angles.
pub const LINK_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("degenerate torso: {0}")]
    DegenerateTorso(&'static str),
    #[error(transparent)]
    Pose(#[from] PoseError),
}

/// Angle at the shared vertex of two links, in `[0, pi]` when valid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleMeasurement {
    radians: f64,
    valid: bool,
}

impl AngleMeasurement {
    pub fn invalid() -> Self {
        AngleMeasurement {
            radians: f64::NAN,
            valid: false,
        }
    }

    pub fn radians(&self) -> f64 {
        self.radians
    }

    pub fn is_valid(&self) -> bool {
        self.valid
    }

    pub fn value(&self) -> Option<f64> {
        self.valid.then_some(self.radians)
    }
}

/// Angle at `b` of triangle `abc` from the three side lengths.
///
/// Invalid when either link meeting at `b` is shorter than
/// `1e-9 * max(1, |ac|)`.
pub fn angle_at_vertex(a: Vec3, b: Vec3, c: Vec3) -> AngleMeasurement {
    let ab = (b - a).norm();
    let bc = (c - b).norm();
    let ca = (a - c).norm();
    let floor = LINK_TOLERANCE * ca.max(1.0);
    if !(ab >= floor && bc >= floor) || !ca.is_finite() {
        return AngleMeasurement::invalid();
    }
    let cos = (ab * ab + bc * bc - ca * ca) / (2.0 * ab * bc);
    AngleMeasurement {
        radians: cos.clamp(-1.0, 1.0).acos(),
        valid: true,
    }
}

pub fn project_onto_plane(v: Vec3, normal: Vec3) -> Vec3 {
    v - v.dot(&normal) * normal
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Plane {
    /// Spanned by forward and up.
    Sagittal,
    /// Spanned by lateral and up.
    Frontal,
    /// Spanned by forward and lateral.
    Transverse,
}

/// Orthonormal body frame for one side of the torso.
///
/// `forward` is the torso-plane normal, `lateral` points away from the body
/// on the chosen side, `up` points from the hips toward the shoulders.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorsoFrame {
    pub side: Side,
    pub forward: Vec3,
    pub lateral: Vec3,
    pub up: Vec3,
}

impl TorsoFrame {
    pub fn normal(&self, plane: Plane) -> Vec3 {
        match plane {
            Plane::Sagittal => self.lateral,
            Plane::Frontal => self.forward,
            Plane::Transverse => self.up,
        }
    }

    pub fn project(&self, v: Vec3, plane: Plane) -> Vec3 {
        project_onto_plane(v, self.normal(plane))
    }

    /// Vertex angle at `vertex` after projecting both links onto `plane`.
    pub fn projected_angle(&self, a: Vec3, vertex: Vec3, c: Vec3, plane: Plane) -> AngleMeasurement {
        let a = vertex + self.project(a - vertex, plane);
        let c = vertex + self.project(c - vertex, plane);
        angle_at_vertex(a, vertex, c)
    }
}

fn nearly_parallel(cross: Vec3, a: Vec3, b: Vec3) -> bool {
    !(cross.norm() > CROSS_TOLERANCE * a.norm() * b.norm())
}

/// Builds the torso frame for `side` from the shoulders and hips.
///
/// The raw normal is `(left shoulder -> left hip) x (left shoulder -> right
/// shoulder)`; its sign is flipped when the nose lies behind the neck. The
/// lateral axis comes from `(side shoulder -> side hip) x forward`,
/// orthogonalised against `forward` and oriented away from the body.
pub fn torso_frame(frame: &Frame, side: Side) -> Result<TorsoFrame, GeometryError> {
    let ls = frame.position(JointId::LeftShoulder)?;
    let rs = frame.position(JointId::RightShoulder)?;
    let lh = frame.position(JointId::LeftHip)?;
    let rh = frame.position(JointId::RightHip)?;

    let down = lh - ls;
    let across = rs - ls;
    let normal = down.cross(&across);
    if nearly_parallel(normal, down, across) {
        return Err(GeometryError::DegenerateTorso("shoulder and hip links are parallel"));
    }
    let mut forward = normal.normalize();
    let neck = 0.5 * (ls + rs);
    if let Some(nose) = frame.get(JointId::Nose) {
        let head = nose - neck;
        if head.norm() > 0.0 && head.dot(&forward) < 0.0 {
            forward = -forward;
        }
    }

    let (shoulder, hip, other_shoulder) = match side {
        Side::Left => (ls, lh, rs),
        Side::Right => (rs, rh, ls),
    };
    let side_down = hip - shoulder;
    let raw_lateral = side_down.cross(&forward);
    let ortho = raw_lateral - raw_lateral.dot(&forward) * forward;
    if nearly_parallel(ortho, side_down, forward) {
        return Err(GeometryError::DegenerateTorso("side link is parallel to the torso normal"));
    }
    let mut lateral = ortho.normalize();
    if (shoulder - other_shoulder).dot(&lateral) < 0.0 {
        lateral = -lateral;
    }

    let mut up = lateral.cross(&forward);
    let mid_hip = 0.5 * (lh + rh);
    if (neck - mid_hip).dot(&up) < 0.0 {
        up = -up;
    }
    Ok(TorsoFrame {
        side,
        forward,
        lateral,
        up,
    })
}
