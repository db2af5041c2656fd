//! The 3-DOF lift of the five-bar: the whole plane turns about `AB` by
//! `theta1`. Forward/inverse kinematics, the direct- and inverse-kinematics
//! matrices and the two velocity solves of `A p_dot = B theta_dot`.
//!
//! `A` has rows `L2 k`, `(p - c)` and `(p - d)` in world coordinates, `k`
//! being the unit normal of the turned plane. Differentiating the loop
//! closure in this frame gives
//! `B = -diag(L2 u_P, L1 L2 sin(theta2 - theta4), L1 L2 sin(theta3 - theta5))`:
//! every row carries the same factor `-1` relative to the mode-sign entries
//! of [`crate::model::mode_entries`].

use serde::Serialize;

use crate::error::{Error, Result, SerialEntry};
use crate::linalg::{self, Mat3, Vec3};
use crate::model::{
    mode_entries, AssemblyMode, DesignParams, JointState, PlanarPoint, Posture, Sign,
    WorkingMode, WorldPoint, GEOMETRIC_TOL, SINGULAR_TOL,
};
use crate::planar::{planar_fk, planar_ik};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct JointRates {
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
}

impl JointRates {
    pub fn new(theta1: f64, theta2: f64, theta3: f64) -> Self {
        Self {
            theta1,
            theta2,
            theta3,
        }
    }

    pub fn to_array(self) -> Vec3 {
        [self.theta1, self.theta2, self.theta3]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct CartesianRates {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl CartesianRates {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn to_array(self) -> Vec3 {
        [self.x, self.y, self.z]
    }
}

/// Unit normal of the mechanism plane turned by `theta1`.
pub fn plane_normal(theta1: f64) -> Vec3 {
    let (s, c) = theta1.sin_cos();
    [s, 0.0, c]
}

/// Forward kinematics of the hybrid manipulator.
pub fn hybrid_fk(
    design: &DesignParams,
    theta1: f64,
    theta2: f64,
    theta3: f64,
    assembly: AssemblyMode,
) -> Result<Posture> {
    if !theta1.is_finite() {
        return Err(Error::NonFinite);
    }
    let (p, planar) = planar_fk(design, theta2, theta3, assembly)?;
    let joints = JointState::new(
        theta1,
        planar.theta2,
        planar.theta3,
        planar.theta4,
        planar.theta5,
    );
    let mut posture = Posture::from_joints(*design, joints);
    // keep the exact intersection point rather than the averaged traversal
    posture.p_plane = p;
    posture.p_world = WorldPoint::from_planar(p, joints.theta1);
    Ok(posture)
}

/// Base angle and signed planar point of a world point in a given `eps1`.
pub fn planar_coordinates(p: WorldPoint, eps1: Sign) -> Result<(f64, PlanarPoint)> {
    if !p.is_finite() {
        return Err(Error::NonFinite);
    }
    let r = p.axis_distance();
    if r == 0.0 {
        return Err(Error::AxisDegenerate);
    }
    let theta1 = match eps1 {
        Sign::Pos => (-p.z).atan2(p.x),
        Sign::Neg => p.z.atan2(-p.x),
    };
    Ok((theta1, PlanarPoint::new(eps1.value() * r, p.y)))
}

/// Inverse kinematics in one of the eight working modes.
pub fn hybrid_ik(design: &DesignParams, p: WorldPoint, mode: WorkingMode) -> Result<Posture> {
    if !p.is_finite() {
        return Err(Error::NonFinite);
    }
    if p.axis_distance() <= GEOMETRIC_TOL * design.l1() {
        return Err(Error::AxisDegenerate);
    }
    let (theta1, planar) = planar_coordinates(p, mode.eps1)?;
    let sol = planar_ik(design, planar, mode.eps2, mode.eps3)?;
    let joints = JointState::new(
        theta1,
        sol.joints.theta2,
        sol.joints.theta3,
        sol.joints.theta4,
        sol.joints.theta5,
    );
    Ok(Posture {
        design: *design,
        joints,
        c: sol.c,
        d: sol.d,
        p_plane: planar,
        p_world: WorldPoint::from_planar(planar, theta1),
    })
}

/// Direct-kinematics matrix `A` and inverse-kinematics matrix `B`.
pub fn jacobians(posture: &Posture) -> (Mat3, Mat3) {
    let design = &posture.design;
    let theta1 = posture.joints.theta1;
    let k = plane_normal(theta1);
    let p = posture.p_world.to_array();
    let c = posture.c_world().to_array();
    let d = posture.d_world().to_array();
    let a = Mat3::from_rows(
        linalg::scale(k, design.l2()),
        linalg::sub(p, c),
        linalg::sub(p, d),
    );
    let entries = mode_entries(design, &posture.joints);
    let b = Mat3::diag(entries.map(|e| -e));
    (a, b)
}

/// `det A / L2^3`, equal to `-sin(theta4 - theta5)`.
pub fn normalized_det_a(a: &Mat3, design: &DesignParams) -> f64 {
    a.det() / design.l2().powi(3)
}

/// Diagonal of `B` divided by `L1 L2`, in mode-sign form.
pub fn normalized_b_entries(posture: &Posture) -> Vec3 {
    let scale = posture.design.l1() * posture.design.l2();
    mode_entries(&posture.design, &posture.joints).map(|e| e / scale)
}

/// Cartesian velocity from joint rates, `p_dot = A^-1 B theta_dot`.
pub fn velocity_forward(posture: &Posture, joint_rates: JointRates) -> Result<CartesianRates> {
    let (a, b) = jacobians(posture);
    let det_norm = normalized_det_a(&a, &posture.design);
    if det_norm.abs() < SINGULAR_TOL {
        return Err(Error::ParallelSingular(det_norm));
    }
    let rhs = b.mul_vec(joint_rates.to_array());
    let v = a.solve(rhs).ok_or(Error::ParallelSingular(det_norm))?;
    Ok(CartesianRates::new(v[0], v[1], v[2]))
}

/// Joint rates from a Cartesian velocity, `theta_dot = B^-1 A p_dot`.
pub fn velocity_inverse(posture: &Posture, cartesian_rates: CartesianRates) -> Result<JointRates> {
    let (a, b) = jacobians(posture);
    let n = normalized_b_entries(posture);
    let which = [SerialEntry::Axis, SerialEntry::LegA, SerialEntry::LegB];
    for (entry, kind) in n.iter().zip(which) {
        if entry.abs() < SINGULAR_TOL {
            return Err(Error::SerialSingular(kind));
        }
    }
    let ap = a.mul_vec(cartesian_rates.to_array());
    Ok(JointRates::new(
        ap[0] / b.get(0, 0),
        ap[1] / b.get(1, 1),
        ap[2] / b.get(2, 2),
    ))
}
