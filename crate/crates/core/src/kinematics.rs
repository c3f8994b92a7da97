//! Closed-form kinematics of the rotary (revolute-input) delta robot.
//!
//! Conventions: the robot base frame has its origin at the center of the
//! motor plane, z pointing up, so the effector works at negative z. Shoulder
//! joints sit at `base_radius` from the origin along azimuths 0/120/240 deg;
//! their axes are horizontal and tangential. Joint angles are in degrees,
//! 0 = upper arm horizontal, positive = arm swinging downward. All public
//! angles are degrees; radians stay internal.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::policy::SkillParams;

/// Fixed shoulder azimuths of the three arms, degrees.
pub const ARM_AZIMUTHS_DEG: [f64; 3] = [0.0, 120.0, 240.0];

/// Maximum radial reach of the skill action space, mm.
pub const ACTION_RADIUS_MM: f64 = 30.0;

const DEG: f64 = std::f64::consts::PI / 180.0;

#[derive(Debug, Error, PartialEq)]
pub enum KinematicsError {
    /// Circle-circle intersection has no solution for this arm.
    #[error("target unreachable for arm {arm}")]
    Unreachable { arm: usize },
    /// The elbow-down solution exists but lies outside the servo range.
    #[error("arm {arm} solution {angle_deg:.3} deg outside servo range")]
    OutOfServoRange { arm: usize, angle_deg: f64 },
    /// The three forearm spheres do not meet.
    #[error("forearm spheres do not intersect")]
    NoIntersection,
    /// Polar radius must be non-negative.
    #[error("negative polar radius {0}")]
    NegativeRadius(f64),
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("invalid geometry: {0}")]
    BadGeometry(String),
}

/// Link lengths and mounting radii of one robot.
///
/// `hinge_offset` is the spacing between the two orthogonal living hinges of
/// a printed forearm; it is carried as metadata and ignored by the
/// rigid-link model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RobotGeometry {
    pub base_radius: f64,
    pub effector_radius: f64,
    pub upper_arm: f64,
    pub forearm: f64,
    pub hinge_offset: f64,
    pub servo_min: f64,
    pub servo_max: f64,
}

impl Default for RobotGeometry {
    fn default() -> Self {
        RobotGeometry {
            base_radius: 22.0,
            effector_radius: 22.0,
            upper_arm: 34.0,
            forearm: 37.0,
            hinge_offset: 5.25,
            servo_min: -60.0,
            servo_max: 90.0,
        }
    }
}

impl RobotGeometry {
    pub fn validate(&self) -> Result<(), KinematicsError> {
        let lengths = [
            self.base_radius,
            self.effector_radius,
            self.upper_arm,
            self.forearm,
        ];
        if lengths.iter().any(|l| !l.is_finite() || *l <= 0.0) {
            return Err(KinematicsError::BadGeometry(
                "all lengths must be positive".into(),
            ));
        }
        if self.forearm <= (self.base_radius - self.effector_radius).abs() {
            return Err(KinematicsError::BadGeometry(
                "forearm must exceed |base_radius - effector_radius|".into(),
            ));
        }
        if self.servo_min >= self.servo_max {
            return Err(KinematicsError::BadGeometry("empty servo range".into()));
        }
        Ok(())
    }

    /// Symmetric per-arm view of this geometry.
    pub fn arms(&self) -> ArmGeometry {
        self.arms_scaled([1.0; 3])
    }

    /// Per-arm view with multiplicative link-length factors, one per arm.
    pub fn arms_scaled(&self, scale: [f64; 3]) -> ArmGeometry {
        ArmGeometry {
            offset: self.base_radius - self.effector_radius,
            upper: [
                self.upper_arm * scale[0],
                self.upper_arm * scale[1],
                self.upper_arm * scale[2],
            ],
            fore: [
                self.forearm * scale[0],
                self.forearm * scale[1],
                self.forearm * scale[2],
            ],
            servo_min: self.servo_min,
            servo_max: self.servo_max,
        }
    }

    /// z of the effector with all servos at 0 deg (the natural home plane).
    pub fn home_z(&self) -> Result<f64, KinematicsError> {
        Ok(forward_kinematics(JointAngles::splat(0.0), self)?.z)
    }
}

/// Effective geometry with possibly unequal arms (manufacturing variation).
/// The kinematic map depends on the mounting radii only through their
/// difference, kept here as `offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmGeometry {
    pub offset: f64,
    pub upper: [f64; 3],
    pub fore: [f64; 3],
    pub servo_min: f64,
    pub servo_max: f64,
}

/// Point in the robot base frame, mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartesianPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl CartesianPoint {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        CartesianPoint { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn radial(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(&self, other: &CartesianPoint) -> f64 {
        (self.to_vector() - other.to_vector()).norm()
    }

    pub(crate) fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub(crate) fn from_vector(v: Vector3<f64>) -> Self {
        CartesianPoint::new(v.x, v.y, v.z)
    }
}

/// Shoulder angles of the three servos, degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointAngles {
    pub theta_a: f64,
    pub theta_b: f64,
    pub theta_c: f64,
}

impl JointAngles {
    pub const fn new(theta_a: f64, theta_b: f64, theta_c: f64) -> Self {
        JointAngles {
            theta_a,
            theta_b,
            theta_c,
        }
    }

    pub const fn splat(v: f64) -> Self {
        JointAngles::new(v, v, v)
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.theta_a, self.theta_b, self.theta_c]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        JointAngles::new(a[0], a[1], a[2])
    }
}

/// Allowed cylindrical region for the effector; boundary points are inside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceCylinder {
    pub diameter: f64,
    pub height: f64,
    pub z_top: f64,
}

impl WorkspaceCylinder {
    /// Default cylinder hanging from the home plane of `geom`.
    pub fn from_geometry(
        diameter: f64,
        height: f64,
        geom: &RobotGeometry,
    ) -> Result<Self, KinematicsError> {
        Ok(WorkspaceCylinder {
            diameter,
            height,
            z_top: geom.home_z()?,
        })
    }

    pub fn z_bottom(&self) -> f64 {
        self.z_top - self.height
    }
}

pub fn in_workspace(p: &CartesianPoint, ws: &WorkspaceCylinder) -> bool {
    let r = ws.diameter / 2.0;
    p.x * p.x + p.y * p.y <= r * r && p.z >= ws.z_bottom() && p.z <= ws.z_top
}

/// Wrist position of arm `i` in that arm's frame, relative to its shoulder.
/// Returns (radial, tangential, vertical).
fn wrist_in_arm_frame(p: &CartesianPoint, offset: f64, arm: usize) -> (f64, f64, f64) {
    let az = ARM_AZIMUTHS_DEG[arm] * DEG;
    let (s, c) = az.sin_cos();
    let wx = c * p.x + s * p.y - offset;
    let wy = -s * p.x + c * p.y;
    (wx, wy, p.z)
}

/// Elbow-down inverse kinematics. Per arm: rotate the target into the arm
/// plane, reduce the parallelogram to a point constraint and intersect the
/// two circles; of the two shoulder angles the one with the elbow swung
/// outward is kept, the other rejected.
pub fn inverse_kinematics(
    p: &CartesianPoint,
    geom: &RobotGeometry,
) -> Result<JointAngles, KinematicsError> {
    inverse_kinematics_arms(p, &geom.arms())
}

pub fn inverse_kinematics_arms(
    p: &CartesianPoint,
    arms: &ArmGeometry,
) -> Result<JointAngles, KinematicsError> {
    if !p.is_finite() {
        return Err(KinematicsError::NonFinite);
    }
    let mut out = [0.0; 3];
    for arm in 0..3 {
        let (a, wy, b) = wrist_in_arm_frame(p, arms.offset, arm);
        let ru = arms.upper[arm];
        let l = arms.fore[arm];
        let c = (a * a + b * b + ru * ru + wy * wy - l * l) / (2.0 * ru);
        let rho = a.hypot(b);
        if c.abs() > rho {
            return Err(KinematicsError::Unreachable { arm });
        }
        let phi = b.atan2(a);
        let theta = (-phi - (c / rho).clamp(-1.0, 1.0).acos()) / DEG;
        if theta < arms.servo_min || theta > arms.servo_max {
            return Err(KinematicsError::OutOfServoRange {
                arm,
                angle_deg: theta,
            });
        }
        out[arm] = theta;
    }
    Ok(JointAngles::from_array(out))
}

/// Center of the forearm sphere for arm `i`: the elbow pulled inward by the
/// effector radius (so the effector center lies on the sphere).
fn sphere_center(theta_deg: f64, arms: &ArmGeometry, arm: usize) -> Vector3<f64> {
    let az = ARM_AZIMUTHS_DEG[arm] * DEG;
    let u = Vector3::new(az.cos(), az.sin(), 0.0);
    let th = theta_deg * DEG;
    u * (arms.offset + arms.upper[arm] * th.cos())
        + Vector3::new(0.0, 0.0, -arms.upper[arm] * th.sin())
}

/// Forward kinematics by trilateration of the three forearm spheres;
/// returns the lower (z-negative) intersection.
pub fn forward_kinematics(
    angles: JointAngles,
    geom: &RobotGeometry,
) -> Result<CartesianPoint, KinematicsError> {
    forward_kinematics_arms(angles, &geom.arms())
}

pub fn forward_kinematics_arms(
    angles: JointAngles,
    arms: &ArmGeometry,
) -> Result<CartesianPoint, KinematicsError> {
    let th = angles.as_array();
    let c1 = sphere_center(th[0], arms, 0);
    let c2 = sphere_center(th[1], arms, 1);
    let c3 = sphere_center(th[2], arms, 2);
    let (r1, r2, r3) = (arms.fore[0], arms.fore[1], arms.fore[2]);

    let d = (c2 - c1).norm();
    if d < 1e-9 {
        return Err(KinematicsError::NoIntersection);
    }
    let ex = (c2 - c1) / d;
    let i = ex.dot(&(c3 - c1));
    let ey_raw = c3 - c1 - ex * i;
    let j = ey_raw.norm();
    if j < 1e-9 {
        return Err(KinematicsError::NoIntersection);
    }
    let ey = ey_raw / j;
    let ez = ex.cross(&ey);

    let x = (d * d + r1 * r1 - r2 * r2) / (2.0 * d);
    let y = (i * i + j * j + r1 * r1 - r3 * r3 - 2.0 * i * x) / (2.0 * j);
    let zz = r1 * r1 - x * x - y * y;
    if zz < -1e-9 * r1 * r1 {
        return Err(KinematicsError::NoIntersection);
    }
    let z = zz.max(0.0).sqrt();
    let base = c1 + ex * x + ey * y;
    let pa = base + ez * z;
    let pb = base - ez * z;
    Ok(CartesianPoint::from_vector(if pa.z < pb.z { pa } else { pb }))
}

/// Analytic Jacobian d(effector position)/d(joint angles) in mm per degree,
/// obtained by differentiating the three sphere constraints.
pub fn jacobian(angles: JointAngles, geom: &RobotGeometry) -> Result<Matrix3<f64>, KinematicsError> {
    let arms = geom.arms();
    let p = forward_kinematics_arms(angles, &arms)?.to_vector();
    let th = angles.as_array();

    let mut a = Matrix3::zeros();
    let mut t = Vector3::zeros();
    for arm in 0..3 {
        let c = sphere_center(th[arm], &arms, arm);
        let n = p - c;
        a.set_row(arm, &n.transpose());
        let az = ARM_AZIMUTHS_DEG[arm] * DEG;
        let u = Vector3::new(az.cos(), az.sin(), 0.0);
        let thr = th[arm] * DEG;
        // dc/dtheta in mm/deg
        let dc = (u * (-arms.upper[arm] * thr.sin())
            + Vector3::new(0.0, 0.0, -arms.upper[arm] * thr.cos()))
            * DEG;
        t[arm] = n.dot(&dc);
    }
    let lu = a.lu();
    let mut jac = Matrix3::zeros();
    for arm in 0..3 {
        let mut rhs = Vector3::zeros();
        rhs[arm] = t[arm];
        let col = lu.solve(&rhs).ok_or(KinematicsError::NoIntersection)?;
        jac.set_column(arm, &col);
    }
    Ok(jac)
}

pub fn polar_to_cartesian(
    rho: f64,
    theta_deg: f64,
    z: f64,
) -> Result<CartesianPoint, KinematicsError> {
    if rho < 0.0 {
        return Err(KinematicsError::NegativeRadius(rho));
    }
    let th = theta_deg * DEG;
    Ok(CartesianPoint::new(rho * th.cos(), rho * th.sin(), z))
}

/// Physical polar waypoints of one skill execution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarWaypoints {
    pub rho1: f64,
    pub theta1: f64,
    pub rho2: f64,
    pub theta2: f64,
}

impl PolarWaypoints {
    /// Both waypoints as Cartesian points at the fixed skill height.
    pub fn at_height(&self, z: f64) -> (CartesianPoint, CartesianPoint) {
        // rho >= 0 by construction of the affine map
        let a = polar_to_cartesian(self.rho1, self.theta1, z).expect("rho1 >= 0");
        let b = polar_to_cartesian(self.rho2, self.theta2, z).expect("rho2 >= 0");
        (a, b)
    }
}

/// Map normalized skill parameters onto physical waypoint coordinates:
/// radius [-1,1] -> [0, 30] mm, angle [-1,1] -> [-180, 180] deg.
/// Components are clipped into [-1,1] first.
pub fn denormalize_params(s: &SkillParams) -> PolarWaypoints {
    let c = s.clamped();
    PolarWaypoints {
        rho1: 0.5 * ACTION_RADIUS_MM * (c.rho1 + 1.0),
        theta1: 180.0 * c.theta1,
        rho2: 0.5 * ACTION_RADIUS_MM * (c.rho2 + 1.0),
        theta2: 180.0 * c.theta2,
    }
}
