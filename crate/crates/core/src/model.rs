//! Domain types shared by every analysis: design lengths, planar and world
//! points, joint states, working and assembly modes and resolved postures.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result, SerialEntry};

/// Relative tolerance for geometric consistency (loop closure, link lengths).
pub const GEOMETRIC_TOL: f64 = 1e-9;

/// Default tolerance on normalized determinants and normalized Jacobian entries.
pub const SINGULAR_TOL: f64 = 1e-9;

/// Link lengths of a symmetric manipulator (`L3 = L1`, `L4 = L2`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DesignParams {
    l0: f64,
    l1: f64,
    l2: f64,
}

impl DesignParams {
    pub fn new(l0: f64, l1: f64, l2: f64) -> Result<Self> {
        if !(l0.is_finite() && l1.is_finite() && l2.is_finite()) {
            return Err(Error::NonFinite);
        }
        if l1 <= 0.0 || l2 <= 0.0 {
            return Err(Error::NonPositiveLink { l1, l2 });
        }
        if l0 < 0.0 {
            return Err(Error::NegativeBase(l0));
        }
        Ok(Self { l0, l1, l2 })
    }

    /// Distance between the actuated pivots `A` and `B`.
    pub fn l0(&self) -> f64 {
        self.l0
    }

    /// Proximal link length (`AC`, `BD`).
    pub fn l1(&self) -> f64 {
        self.l1
    }

    /// Distal link length (`CP`, `DP`).
    pub fn l2(&self) -> f64 {
        self.l2
    }

    /// `L2 / L1`.
    pub fn lambda1(&self) -> f64 {
        self.l2 / self.l1
    }

    pub fn max_link(&self) -> f64 {
        self.l1.max(self.l2)
    }

    pub fn outer_radius(&self) -> f64 {
        self.l1 + self.l2
    }

    pub fn inner_radius(&self) -> f64 {
        (self.l1 - self.l2).abs()
    }

    /// Pivot `A` in the mechanism plane.
    pub fn a(&self) -> PlanarPoint {
        PlanarPoint::new(0.0, -0.5 * self.l0)
    }

    /// Pivot `B` in the mechanism plane.
    pub fn b(&self) -> PlanarPoint {
        PlanarPoint::new(0.0, 0.5 * self.l0)
    }

    /// Compact label used in file names, e.g. `L0-2_L1-1_L2-1.41421356237`.
    pub fn label(&self) -> String {
        format!(
            "L0-{}_L1-{}_L2-{}",
            crate::export::fmt_g12(self.l0),
            crate::export::fmt_g12(self.l1),
            crate::export::fmt_g12(self.l2)
        )
    }
}

/// Validates three raw lengths `(L0, L1, L2)`.
pub fn validate_design(raw: [f64; 3]) -> Result<DesignParams> {
    DesignParams::new(raw[0], raw[1], raw[2])
}

/// Point of the mechanism plane: `u` orthogonal to `AB`, `v` along `AB`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct PlanarPoint {
    pub u: f64,
    pub v: f64,
}

impl PlanarPoint {
    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    /// Unit vector at angle `theta` from `+u`.
    pub fn unit(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self { u: c, v: s }
    }

    pub fn norm(self) -> f64 {
        self.u.hypot(self.v)
    }

    pub fn dot(self, other: Self) -> f64 {
        self.u * other.u + self.v * other.v
    }

    /// z-component of the planar cross product.
    pub fn cross(self, other: Self) -> f64 {
        self.u * other.v - self.v * other.u
    }

    /// Direction angle from `+u`.
    pub fn angle(self) -> f64 {
        self.v.atan2(self.u)
    }

    /// Counterclockwise perpendicular.
    pub fn perp(self) -> Self {
        Self {
            u: -self.v,
            v: self.u,
        }
    }

    pub fn distance(self, other: Self) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }

    /// Reflection across the line `AB` (`u -> -u`).
    pub fn mirrored(self) -> Self {
        Self {
            u: -self.u,
            v: self.v,
        }
    }
}

impl Add for PlanarPoint {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.u + o.u, self.v + o.v)
    }
}

impl Sub for PlanarPoint {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.u - o.u, self.v - o.v)
    }
}

impl Mul<f64> for PlanarPoint {
    type Output = Self;
    fn mul(self, k: f64) -> Self {
        Self::new(self.u * k, self.v * k)
    }
}

/// Point of the fixed world frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct WorldPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl WorldPoint {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    /// Places a planar point in the world with the mechanism plane turned by `theta1`.
    pub fn from_planar(p: PlanarPoint, theta1: f64) -> Self {
        let (s, c) = theta1.sin_cos();
        Self {
            x: p.u * c,
            y: p.v,
            z: -p.u * s,
        }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    /// Distance from the line `AB` (the world `y` axis).
    pub fn axis_distance(self) -> f64 {
        self.x.hypot(self.z)
    }

    pub fn distance(self, other: Self) -> f64 {
        let d = [self.x - other.x, self.y - other.y, self.z - other.z];
        (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
    }

    pub fn lerp(self, other: Self, t: f64) -> Self {
        Self::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
            self.z + (other.z - self.z) * t,
        )
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// Maps an angle into `(-pi, pi]`.
pub fn normalize_angle(theta: f64) -> f64 {
    let mut t = theta.rem_euclid(2.0 * PI);
    if t > PI {
        t -= 2.0 * PI;
    }
    t
}

/// A nonzero sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Sign {
    Neg,
    Pos,
}

impl Sign {
    /// Sign of `x`, or `None` when `|x| <= tol`.
    pub fn of(x: f64, tol: f64) -> Option<Sign> {
        if x > tol {
            Some(Sign::Pos)
        } else if x < -tol {
            Some(Sign::Neg)
        } else {
            None
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Sign::Neg => -1.0,
            Sign::Pos => 1.0,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Neg => Sign::Pos,
            Sign::Pos => Sign::Neg,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Sign::Neg => '-',
            Sign::Pos => '+',
        }
    }

    fn from_symbol(c: char) -> Option<Sign> {
        match c {
            '+' => Some(Sign::Pos),
            '-' => Some(Sign::Neg),
            _ => None,
        }
    }
}

/// Branch of the inverse kinematics: signs of the three diagonal entries of the
/// inverse-kinematics matrix, i.e. of `u_P`, `sin(theta2 - theta4)` and
/// `sin(theta3 - theta5)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct WorkingMode {
    pub eps1: Sign,
    pub eps2: Sign,
    pub eps3: Sign,
}

impl WorkingMode {
    pub const fn new(eps1: Sign, eps2: Sign, eps3: Sign) -> Self {
        Self { eps1, eps2, eps3 }
    }

    /// All eight modes in lexicographic order (`-` before `+`).
    pub fn all() -> [WorkingMode; 8] {
        let s = [Sign::Neg, Sign::Pos];
        let mut out = [WorkingMode::new(Sign::Neg, Sign::Neg, Sign::Neg); 8];
        let mut i = 0;
        for e1 in s {
            for e2 in s {
                for e3 in s {
                    out[i] = WorkingMode::new(e1, e2, e3);
                    i += 1;
                }
            }
        }
        out
    }

    /// Position in [`WorkingMode::all`]; bit index in mode masks.
    pub fn index(self) -> usize {
        let b = |s: Sign| (s == Sign::Pos) as usize;
        (b(self.eps1) << 2) | (b(self.eps2) << 1) | b(self.eps3)
    }

    /// The mode of the posture mirrored across the line `AB`: every sign flips.
    pub fn mirrored(self) -> Self {
        Self::new(self.eps1.flip(), self.eps2.flip(), self.eps3.flip())
    }

    pub fn planar(self) -> (Sign, Sign) {
        (self.eps2, self.eps3)
    }
}

impl fmt::Display for WorkingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}{}",
            self.eps1.symbol(),
            self.eps2.symbol(),
            self.eps3.symbol()
        )
    }
}

impl FromStr for WorkingMode {
    type Err = String;

    /// Parses three sign characters, e.g. `+-+`.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let signs: Vec<Sign> = s.trim().chars().filter_map(Sign::from_symbol).collect();
        if signs.len() != 3 || s.trim().chars().count() != 3 {
            return Err(format!("working mode must be three of '+'/'-', got {s:?}"));
        }
        Ok(WorkingMode::new(signs[0], signs[1], signs[2]))
    }
}

/// Which of the two circle intersections is taken for `P`: the sign of
/// `sin(theta4 - theta5)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct AssemblyMode {
    pub gamma: Sign,
}

impl AssemblyMode {
    pub const POS: AssemblyMode = AssemblyMode { gamma: Sign::Pos };
    pub const NEG: AssemblyMode = AssemblyMode { gamma: Sign::Neg };
}

/// Actuated angles `theta1..theta3` and passive angles `theta4`, `theta5`,
/// each normalized to `(-pi, pi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JointState {
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
    pub theta4: f64,
    pub theta5: f64,
}

impl JointState {
    pub fn new(theta1: f64, theta2: f64, theta3: f64, theta4: f64, theta5: f64) -> Self {
        Self {
            theta1: normalize_angle(theta1),
            theta2: normalize_angle(theta2),
            theta3: normalize_angle(theta3),
            theta4: normalize_angle(theta4),
            theta5: normalize_angle(theta5),
        }
    }

    /// `theta4 - theta5`, the angle between the two distal links.
    pub fn delta(&self) -> f64 {
        normalize_angle(self.theta4 - self.theta5)
    }

    pub fn is_finite(&self) -> bool {
        [self.theta1, self.theta2, self.theta3, self.theta4, self.theta5]
            .iter()
            .all(|t| t.is_finite())
    }
}

/// Diagonal of the inverse-kinematics matrix written in mode-sign form:
/// `[L2 u_P, L1 L2 sin(theta2 - theta4), L1 L2 sin(theta3 - theta5)]`, with
/// `u_P` taken along leg `A`.
pub fn mode_entries(design: &DesignParams, joints: &JointState) -> [f64; 3] {
    let (l1, l2) = (design.l1(), design.l2());
    let u_p = l1 * joints.theta2.cos() + l2 * joints.theta4.cos();
    [
        l2 * u_p,
        l1 * l2 * (joints.theta2 - joints.theta4).sin(),
        l1 * l2 * (joints.theta3 - joints.theta5).sin(),
    ]
}

/// Working mode of a consistent joint state.
pub fn working_mode_of(joints: &JointState, design: &DesignParams) -> Result<WorkingMode> {
    let tol = SINGULAR_TOL * design.l1() * design.l2();
    let [e1, e2, e3] = mode_entries(design, joints);
    let eps1 = Sign::of(e1, tol).ok_or(Error::OnSerialSingularity(SerialEntry::Axis))?;
    let eps2 = Sign::of(e2, tol).ok_or(Error::OnSerialSingularity(SerialEntry::LegA))?;
    let eps3 = Sign::of(e3, tol).ok_or(Error::OnSerialSingularity(SerialEntry::LegB))?;
    Ok(WorkingMode::new(eps1, eps2, eps3))
}

/// A fully resolved configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Posture {
    pub design: DesignParams,
    pub joints: JointState,
    pub c: PlanarPoint,
    pub d: PlanarPoint,
    pub p_plane: PlanarPoint,
    pub p_world: WorldPoint,
}

impl Posture {
    /// Builds the posture of a consistent joint state. `P` is the mean of the
    /// two loop traversals.
    pub fn from_joints(design: DesignParams, joints: JointState) -> Self {
        let (l1, l2) = (design.l1(), design.l2());
        let c = design.a() + PlanarPoint::unit(joints.theta2) * l1;
        let d = design.b() + PlanarPoint::unit(joints.theta3) * l1;
        let p_a = c + PlanarPoint::unit(joints.theta4) * l2;
        let p_b = d + PlanarPoint::unit(joints.theta5) * l2;
        let p_plane = (p_a + p_b) * 0.5;
        Self {
            design,
            joints,
            c,
            d,
            p_plane,
            p_world: WorldPoint::from_planar(p_plane, joints.theta1),
        }
    }

    /// `C` in world coordinates.
    pub fn c_world(&self) -> WorldPoint {
        WorldPoint::from_planar(self.c, self.joints.theta1)
    }

    /// `D` in world coordinates.
    pub fn d_world(&self) -> WorldPoint {
        WorldPoint::from_planar(self.d, self.joints.theta1)
    }

    pub fn mode_entries(&self) -> [f64; 3] {
        mode_entries(&self.design, &self.joints)
    }

    pub fn working_mode(&self) -> Result<WorkingMode> {
        working_mode_of(&self.joints, &self.design)
    }

    pub fn assembly(&self) -> Option<AssemblyMode> {
        Sign::of(self.joints.delta().sin(), 0.0).map(|gamma| AssemblyMode { gamma })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_4, SQRT_2};

    fn design() -> DesignParams {
        DesignParams::new(2.0, 1.0, SQRT_2).unwrap()
    }

    #[test]
    fn validate_design_cases() {
        assert!(validate_design([2.0, 1.0, SQRT_2]).is_ok());
        assert!(matches!(
            validate_design([1.0, 0.0, 1.0]),
            Err(Error::NonPositiveLink { .. })
        ));
        assert!(matches!(
            validate_design([-1.0, 1.0, 1.0]),
            Err(Error::NegativeBase(_))
        ));
        assert_eq!(
            validate_design([1.0, f64::NAN, 1.0]),
            Err(Error::NonFinite)
        );
        assert!(validate_design([0.0, 1.0, 1.0]).is_ok());
    }

    #[test]
    fn working_mode_of_reference_posture() {
        let j = JointState::new(0.0, 0.0, 0.0, FRAC_PI_4, -FRAC_PI_4);
        let m = working_mode_of(&j, &design()).unwrap();
        assert_eq!(m, WorkingMode::new(Sign::Pos, Sign::Neg, Sign::Pos));
    }

    #[test]
    fn working_mode_of_on_serial_singularity() {
        let j = JointState::new(0.0, 0.3, 0.0, 0.3, -FRAC_PI_4);
        assert_eq!(
            working_mode_of(&j, &design()),
            Err(Error::OnSerialSingularity(SerialEntry::LegA))
        );
    }

    #[test]
    fn mirrored_posture_flips_every_sign() {
        // reflect u -> -u: every angle theta becomes pi - theta
        let j = JointState::new(0.0, 0.0, 0.0, FRAC_PI_4, -FRAC_PI_4);
        let m = JointState::new(0.0, PI, PI, PI - FRAC_PI_4, PI + FRAC_PI_4);
        let posture = Posture::from_joints(design(), m);
        assert!((posture.p_plane.u + 2.0).abs() < 1e-12);
        let base = working_mode_of(&j, &design()).unwrap();
        let mirror = working_mode_of(&m, &design()).unwrap();
        assert_eq!(mirror.eps1, base.eps1.flip());
        assert_eq!(mirror, base.mirrored());
    }

    #[test]
    fn eight_distinct_modes() {
        let all = WorkingMode::all();
        let set: std::collections::HashSet<_> = all.iter().collect();
        assert_eq!(set.len(), 8);
        for (i, m) in all.iter().enumerate() {
            assert_eq!(m.index(), i);
            assert_eq!(m.to_string().parse::<WorkingMode>().unwrap(), *m);
        }
        assert!("++".parse::<WorkingMode>().is_err());
        assert!("+x+".parse::<WorkingMode>().is_err());
    }

    #[test]
    fn normalize_angle_range() {
        assert_eq!(normalize_angle(PI), PI);
        assert_eq!(normalize_angle(-PI), PI);
        assert!((normalize_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((normalize_angle(-0.5) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn posture_points() {
        let j = JointState::new(0.0, 0.0, 0.0, FRAC_PI_4, -FRAC_PI_4);
        let p = Posture::from_joints(design(), j);
        assert!((p.c.u - 1.0).abs() < 1e-15 && (p.c.v + 1.0).abs() < 1e-15);
        assert!((p.d.u - 1.0).abs() < 1e-15 && (p.d.v - 1.0).abs() < 1e-15);
        assert!((p.p_plane.u - 2.0).abs() < 1e-15 && p.p_plane.v.abs() < 1e-15);
        assert_eq!(p.assembly(), Some(AssemblyMode::POS));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn normalization_is_idempotent_and_preserves_trig(t in -50.0f64..50.0) {
                let n = normalize_angle(t);
                prop_assert!(n > -PI && n <= PI);
                prop_assert_eq!(normalize_angle(n), n);
                prop_assert!((n.sin() - t.sin()).abs() < 1e-13);
                prop_assert!((n.cos() - t.cos()).abs() < 1e-13);
            }

            #[test]
            fn working_mode_ignores_full_turns(
                t2 in -3.0f64..3.0, t3 in -3.0f64..3.0, t4 in -3.0f64..3.0, t5 in -3.0f64..3.0,
                k in -3i32..3,
            ) {
                let d = design();
                let shift = 2.0 * PI * f64::from(k);
                let j = JointState { theta1: 0.0, theta2: t2, theta3: t3, theta4: t4, theta5: t5 };
                let js = JointState { theta1: shift, theta2: t2 + shift, theta3: t3 - shift, theta4: t4 + shift, theta5: t5 + shift };
                let a = working_mode_of(&j, &d);
                let b = working_mode_of(&js, &d);
                if let (Ok(a), Ok(b)) = (a, b) {
                    prop_assert_eq!(a, b);
                }
            }
        }
    }
}
