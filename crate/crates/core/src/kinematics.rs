//! Planar forward kinematics and the cost observables built on it.

use std::f64::consts::{PI, TAU};
use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position2 {
    pub x: f64,
    pub y: f64,
}

impl Position2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm_sqr(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn norm(self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn distance_sqr(self, other: Position2) -> f64 {
        (self - other).norm_sqr()
    }
}

impl Add for Position2 {
    type Output = Position2;
    fn add(self, rhs: Position2) -> Position2 {
        Position2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Position2 {
    type Output = Position2;
    fn sub(self, rhs: Position2) -> Position2 {
        Position2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

fn check_length(name: &str, l: f64) -> Result<()> {
    if l.is_finite() && l > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("link length {name} = {l} must be positive")))
    }
}

pub fn fk_one(l1: f64, theta1: f64) -> Result<Position2> {
    check_length("l1", l1)?;
    Ok(Position2::new(l1 * theta1.cos(), l1 * theta1.sin()))
}

/// Tip of a planar 2R chain rooted at the origin.
pub fn fk_two(l1: f64, l2: f64, theta1: f64, theta2: f64) -> Result<Position2> {
    check_length("l1", l1)?;
    check_length("l2", l2)?;
    Ok(fk_two_unchecked(l1, l2, theta1, theta2))
}

fn fk_two_unchecked(l1: f64, l2: f64, theta1: f64, theta2: f64) -> Position2 {
    let t12 = theta1 + theta2;
    Position2::new(l1 * theta1.cos() + l2 * t12.cos(), l1 * theta1.sin() + l2 * t12.sin())
}

/// Two planar 2R arms with fixed bases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualArm {
    pub base1: Position2,
    pub base2: Position2,
    pub links1: [f64; 2],
    pub links2: [f64; 2],
}

impl DualArm {
    pub fn validate(&self) -> Result<()> {
        check_length("arm 1 l1", self.links1[0])?;
        check_length("arm 1 l2", self.links1[1])?;
        check_length("arm 2 l1", self.links2[0])?;
        check_length("arm 2 l2", self.links2[1])
    }
}

pub fn fk_dual(model: &DualArm, q1: [f64; 2], q2: [f64; 2]) -> Result<(Position2, Position2)> {
    model.validate()?;
    let p1 = model.base1 + fk_two_unchecked(model.links1[0], model.links1[1], q1[0], q1[1]);
    let p2 = model.base2 + fk_two_unchecked(model.links2[0], model.links2[1], q2[0], q2[1]);
    Ok((p1, p2))
}

/// `∂p/∂(θ1, θ2)` of the planar 2R chain, row-major.
pub fn jacobian_two(l1: f64, l2: f64, theta1: f64, theta2: f64) -> [[f64; 2]; 2] {
    let (s1, c1) = theta1.sin_cos();
    let (s12, c12) = (theta1 + theta2).sin_cos();
    [[-l1 * s1 - l2 * s12, -l2 * s12], [l1 * c1 + l2 * c12, l2 * c12]]
}

/// Yoshikawa manipulability `√det(J Jᵀ)`.
pub fn manipulability(j: &[[f64; 2]; 2]) -> Result<f64> {
    if j.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite Jacobian entry".into()));
    }
    // For square J, det(J Jᵀ) = det(J)², which avoids the cancellation of
    // forming J Jᵀ first near singularities.
    let det_j = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let det = det_j * det_j;
    Ok(det.max(0.0).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix(pub [[f64; 3]; 3]);

impl RotationMatrix {
    pub fn identity() -> Self {
        Self([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    }

    /// Rodrigues' formula; `axis` need not be normalized.
    pub fn from_axis_angle(axis: [f64; 3], angle: f64) -> Self {
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        let [x, y, z] = [axis[0] / n, axis[1] / n, axis[2] / n];
        let (s, c) = angle.sin_cos();
        let t = 1.0 - c;
        Self([
            [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
            [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
            [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
        ])
    }

    /// Planar heading embedded as a rotation about z.
    pub fn rot_z(angle: f64) -> Self {
        Self::from_axis_angle([0.0, 0.0, 1.0], angle)
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn is_rotation(&self, tol: f64) -> bool {
        let m = &self.0;
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| m[k][i] * m[k][j]).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                if (dot - expected).abs() > tol {
                    return false;
                }
            }
        }
        (self.determinant() - 1.0).abs() <= tol
    }
}

/// Geodesic distance on SO(3): `arccos((Tr(R1ᵀ R2) − 1)/2)`.
pub fn orientation_geodesic(r1: &RotationMatrix, r2: &RotationMatrix) -> Result<f64> {
    if !r1.is_rotation(1e-9) || !r2.is_rotation(1e-9) {
        return Err(Error::Domain("orientation is not a proper rotation matrix".into()));
    }
    let trace: f64 = (0..3).map(|i| (0..3).map(|k| r1.0[k][i] * r2.0[k][i]).sum::<f64>()).sum();
    Ok(((trace - 1.0) / 2.0).clamp(-1.0, 1.0).acos())
}

/// `|wrap(a − b)|` with the difference wrapped into `(−π, π]`.
pub fn planar_angle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    if d > PI {
        TAU - d
    } else {
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseWeights {
    pub alpha_p: f64,
    pub alpha_r: f64,
}

impl PoseWeights {
    pub fn new(alpha_p: f64, alpha_r: f64) -> Result<Self> {
        let w = Self { alpha_p, alpha_r };
        w.validate()?;
        Ok(w)
    }

    pub fn position_only() -> Self {
        Self { alpha_p: 1.0, alpha_r: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.alpha_p.is_finite()
            && self.alpha_r.is_finite()
            && self.alpha_p >= 0.0
            && self.alpha_r >= 0.0
            && (self.alpha_p > 0.0 || self.alpha_r > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "pose weights α_p = {}, α_R = {} must be non-negative and not both zero",
                self.alpha_p, self.alpha_r
            )))
        }
    }
}

/// `α_p ‖p − p*‖² + α_R d²` with `d` the wrapped planar heading error.
pub fn pose_cost(
    p: Position2,
    target: Position2,
    phi: Option<f64>,
    phi_target: Option<f64>,
    w: &PoseWeights,
) -> Result<f64> {
    let position = w.alpha_p * p.distance_sqr(target);
    if w.alpha_r == 0.0 {
        return Ok(position);
    }
    match (phi, phi_target) {
        (Some(a), Some(b)) => {
            let d = planar_angle_distance(a, b);
            Ok(position + w.alpha_r * d * d)
        }
        _ => Err(Error::Contract("α_R > 0 needs both a heading and a target heading".into())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraspTask {
    pub center: Position2,
    pub radius: f64,
    pub axis: f64,
    pub contact1: Position2,
    pub contact2: Position2,
}

impl GraspTask {
    pub fn new(center: Position2, radius: f64, axis: f64) -> Result<Self> {
        let (contact1, contact2) = antipodal_points(center, radius, axis)?;
        Ok(Self { center, radius, axis, contact1, contact2 })
    }
}

/// Contacts at `center ∓ r·(cos axis, sin axis)`; the first is on the negative side.
pub fn antipodal_points(center: Position2, radius: f64, axis: f64) -> Result<(Position2, Position2)> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::Domain(format!("object radius {radius} must be positive")));
    }
    let offset = Position2::new(radius * axis.cos(), radius * axis.sin());
    Ok((center - offset, center + offset))
}

pub fn grasp_cost(p1: Position2, p2: Position2, task: &GraspTask) -> f64 {
    p1.distance_sqr(task.contact1) + p2.distance_sqr(task.contact2)
}

/// Kinematic structure. Which entries of a parameter vector it consumes
/// is fixed per variant, see [`RobotModel::forward`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RobotModel {
    OneLink { l1: f64 },
    TwoLink { l1: f64, l2: f64 },
    DualArm(DualArm),
}

/// End effector(s) of a configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tips {
    Single { position: Position2, heading: f64 },
    Pair(Position2, Position2),
}

impl Tips {
    pub fn coordinates(&self) -> Vec<f64> {
        match *self {
            Tips::Single { position, .. } => vec![position.x, position.y],
            Tips::Pair(a, b) => vec![a.x, a.y, b.x, b.y],
        }
    }
}

impl RobotModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            RobotModel::OneLink { l1 } => check_length("l1", *l1),
            RobotModel::TwoLink { l1, l2 } => {
                check_length("l1", *l1)?;
                check_length("l2", *l2)
            }
            RobotModel::DualArm(d) => d.validate(),
        }
    }

    /// Number of output coordinates (2 per tip).
    pub fn output_dim(&self) -> usize {
        match self {
            RobotModel::DualArm(_) => 4,
            _ => 2,
        }
    }

    /// Evaluates the configuration `z`:
    ///
    /// * `OneLink`: `[θ1]` with the model length, or `[l1, θ1]`.
    /// * `TwoLink`: `[θ1, θ2]` with the model lengths, or `[θ1, θ2, l1, l2]`.
    /// * `DualArm`: `[θ11, θ12, θ21, θ22]`.
    pub fn forward(&self, z: &[f64]) -> Result<Tips> {
        let bad = |expected: &str| Error::Contract(format!("{expected} expected, got {} parameters", z.len()));
        match *self {
            RobotModel::OneLink { l1 } => {
                let (l, t) = match *z {
                    [t] => (l1, t),
                    [l, t] => (l, t),
                    _ => return Err(bad("[θ1] or [l1, θ1]")),
                };
                Ok(Tips::Single { position: fk_one(l, t)?, heading: t })
            }
            RobotModel::TwoLink { l1, l2 } => {
                let (a, b, t1, t2) = match *z {
                    [t1, t2] => (l1, l2, t1, t2),
                    [t1, t2, a, b] => (a, b, t1, t2),
                    _ => return Err(bad("[θ1, θ2] or [θ1, θ2, l1, l2]")),
                };
                Ok(Tips::Single { position: fk_two(a, b, t1, t2)?, heading: t1 + t2 })
            }
            RobotModel::DualArm(ref d) => match *z {
                [a, b, c, e] => {
                    let (p1, p2) = fk_dual(d, [a, b], [c, e])?;
                    Ok(Tips::Pair(p1, p2))
                }
                _ => Err(bad("[θ11, θ12, θ21, θ22]")),
            },
        }
    }
}

/// Objective the search minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Task {
    Pose {
        target: Position2,
        #[serde(default)]
        heading: Option<f64>,
    },
    Grasp(GraspTask),
}

impl Task {
    /// Cost of an end-effector output.
    pub fn cost(&self, tips: &Tips, w: &PoseWeights) -> Result<f64> {
        match (self, tips) {
            (Task::Pose { target, heading }, Tips::Single { position, heading: phi }) => {
                pose_cost(*position, *target, Some(*phi), *heading, w)
            }
            (Task::Grasp(g), Tips::Pair(p1, p2)) => Ok(grasp_cost(*p1, *p2, g)),
            _ => Err(Error::Contract("task does not match the robot's end-effector count".into())),
        }
    }

    /// Cost from raw predicted coordinates (no heading available).
    pub fn cost_from_coordinates(&self, coords: &[f64], w: &PoseWeights) -> Result<f64> {
        match (self, coords) {
            (Task::Pose { target, heading }, [x, y]) => pose_cost(Position2::new(*x, *y), *target, None, *heading, w),
            (Task::Grasp(g), [x1, y1, x2, y2]) => Ok(grasp_cost(Position2::new(*x1, *y1), Position2::new(*x2, *y2), g)),
            _ => Err(Error::Contract("predicted coordinates do not match the task".into())),
        }
    }

    /// Euclidean distance of the tip(s) from their goals (summed for pairs).
    pub fn position_error(&self, tips: &Tips) -> Result<f64> {
        match (self, tips) {
            (Task::Pose { target, .. }, Tips::Single { position, .. }) => Ok((*position - *target).norm()),
            (Task::Grasp(g), Tips::Pair(p1, p2)) => Ok((*p1 - g.contact1).norm() + (*p2 - g.contact2).norm()),
            _ => Err(Error::Contract("task does not match the robot's end-effector count".into())),
        }
    }
}
