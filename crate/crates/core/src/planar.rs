//! Exact kinematics of the symmetric planar five-bar `A-C-P-D-B`.

use serde::Serialize;

use crate::error::{Error, Result, SerialEntry};
use crate::model::{
    AssemblyMode, DesignParams, JointState, PlanarPoint, Sign, WorkingMode, GEOMETRIC_TOL,
};

/// Branch of one leg in an inverse-kinematics solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Branch {
    /// Sign of `sin(proximal - distal)`.
    Regular(Sign),
    /// Proximal and distal links aligned; both branches coincide.
    Boundary,
}

impl Branch {
    pub fn sign(self) -> Option<Sign> {
        match self {
            Branch::Regular(s) => Some(s),
            Branch::Boundary => None,
        }
    }
}

/// One inverse-kinematics solution of the planar linkage (`theta1` is zero).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlanarIkSolution {
    pub joints: JointState,
    pub c: PlanarPoint,
    pub d: PlanarPoint,
    pub p: PlanarPoint,
    pub branch_a: Branch,
    pub branch_b: Branch,
}

impl PlanarIkSolution {
    /// `(eps2, eps3)` when neither leg is on its boundary.
    pub fn planar_mode(&self) -> Option<(Sign, Sign)> {
        Some((self.branch_a.sign()?, self.branch_b.sign()?))
    }

    /// Full working mode, with `eps1` the sign of `u_P`.
    pub fn working_mode(&self, tol: f64) -> Option<WorkingMode> {
        let (e2, e3) = self.planar_mode()?;
        Some(WorkingMode::new(Sign::of(self.p.u, tol)?, e2, e3))
    }

    pub fn is_boundary(&self) -> bool {
        self.branch_a == Branch::Boundary || self.branch_b == Branch::Boundary
    }

    /// Assembly sign `sin(theta4 - theta5)`.
    pub fn assembly(&self) -> Option<AssemblyMode> {
        Sign::of(self.joints.delta().sin(), 0.0).map(|gamma| AssemblyMode { gamma })
    }
}

/// Distance between the two traversals of the loop, `A -> C -> P` and `B -> D -> P`.
pub fn loop_residual(design: &DesignParams, joints: &JointState) -> f64 {
    let (l1, l2) = (design.l1(), design.l2());
    let via_a = design.a()
        + PlanarPoint::unit(joints.theta2) * l1
        + PlanarPoint::unit(joints.theta4) * l2;
    let via_b = design.b()
        + PlanarPoint::unit(joints.theta3) * l1
        + PlanarPoint::unit(joints.theta5) * l2;
    via_a.distance(via_b)
}

/// Forward kinematics: `P` from the actuated angles and the assembly sign.
pub fn planar_fk(
    design: &DesignParams,
    theta2: f64,
    theta3: f64,
    assembly: AssemblyMode,
) -> Result<(PlanarPoint, JointState)> {
    if !(theta2.is_finite() && theta3.is_finite()) {
        return Err(Error::NonFinite);
    }
    let (l1, l2) = (design.l1(), design.l2());
    let c = design.a() + PlanarPoint::unit(theta2) * l1;
    let d = design.b() + PlanarPoint::unit(theta3) * l1;
    let cd = d - c;
    let dist = cd.norm();
    if dist <= GEOMETRIC_TOL * l1 {
        return Err(Error::DegenerateAssembly);
    }
    let half = 0.5 * dist;
    let h2 = l2 * l2 - half * half;
    if h2 < 0.0 && dist > 2.0 * l2 * (1.0 + GEOMETRIC_TOL) {
        return Err(Error::UnreachableAssembly { distance: dist });
    }
    let h = h2.max(0.0).sqrt();
    let along = cd * (1.0 / dist);
    let normal = along.perp();
    let mid = c + along * half;
    // +normal gives sin(theta4 - theta5) < 0
    let p = match assembly.gamma {
        Sign::Pos => mid - normal * h,
        Sign::Neg => mid + normal * h,
    };
    let joints = JointState::new(
        0.0,
        theta2,
        theta3,
        (p - c).angle(),
        (p - d).angle(),
    );
    Ok((p, joints))
}

/// Candidate elbow points of one leg.
enum LegSolutions {
    Two { pos: PlanarPoint, neg: PlanarPoint },
    Boundary(PlanarPoint),
    Unreachable,
    Indeterminate,
}

fn solve_leg(pivot: PlanarPoint, p: PlanarPoint, l1: f64, l2: f64) -> LegSolutions {
    let offset = p - pivot;
    let dist = offset.norm();
    let hi = l1 + l2;
    let lo = (l1 - l2).abs();
    let tol = GEOMETRIC_TOL * hi;
    if dist > hi + tol || dist < lo - tol {
        return LegSolutions::Unreachable;
    }
    if dist <= tol {
        // only possible with l1 == l2: every elbow on the circle closes the leg
        return LegSolutions::Indeterminate;
    }
    let along = offset * (1.0 / dist);
    let normal = along.perp();
    let a = (dist * dist + l1 * l1 - l2 * l2) / (2.0 * dist);
    let mid = pivot + along * a;
    if (dist - hi).abs() <= tol || (dist - lo).abs() <= tol {
        return LegSolutions::Boundary(mid);
    }
    let h = (l1 * l1 - a * a).max(0.0).sqrt();
    // +normal gives sin(proximal - distal) > 0
    LegSolutions::Two {
        pos: mid + normal * h,
        neg: mid - normal * h,
    }
}

fn leg_candidates(pivot: PlanarPoint, p: PlanarPoint, l1: f64, l2: f64) -> Vec<(PlanarPoint, Branch)> {
    match solve_leg(pivot, p, l1, l2) {
        LegSolutions::Two { pos, neg } => vec![
            (pos, Branch::Regular(Sign::Pos)),
            (neg, Branch::Regular(Sign::Neg)),
        ],
        LegSolutions::Boundary(c) => vec![(c, Branch::Boundary)],
        LegSolutions::Unreachable | LegSolutions::Indeterminate => Vec::new(),
    }
}

fn assemble(
    design: &DesignParams,
    p: PlanarPoint,
    (c, branch_a): (PlanarPoint, Branch),
    (d, branch_b): (PlanarPoint, Branch),
) -> PlanarIkSolution {
    let a = design.a();
    let b = design.b();
    PlanarIkSolution {
        joints: JointState::new(
            0.0,
            (c - a).angle(),
            (d - b).angle(),
            (p - c).angle(),
            (p - d).angle(),
        ),
        c,
        d,
        p,
        branch_a,
        branch_b,
    }
}

/// Inverse kinematics in the planar working mode `(eps2, eps3)`.
pub fn planar_ik(
    design: &DesignParams,
    p: PlanarPoint,
    eps2: Sign,
    eps3: Sign,
) -> Result<PlanarIkSolution> {
    if !p.is_finite() {
        return Err(Error::NonFinite);
    }
    let (l1, l2) = (design.l1(), design.l2());
    let pick = |pivot, eps: Sign, leg: SerialEntry| match solve_leg(pivot, p, l1, l2) {
        LegSolutions::Two { pos, neg } => Ok(match eps {
            Sign::Pos => (pos, Branch::Regular(Sign::Pos)),
            Sign::Neg => (neg, Branch::Regular(Sign::Neg)),
        }),
        LegSolutions::Boundary(_) | LegSolutions::Indeterminate => {
            Err(Error::OnSerialBoundary(leg))
        }
        LegSolutions::Unreachable => Err(Error::Unreachable),
    };
    let leg_a = pick(design.a(), eps2, SerialEntry::LegA);
    let leg_b = pick(design.b(), eps3, SerialEntry::LegB);
    // an unreachable leg dominates a boundary one
    let (leg_a, leg_b) = match (leg_a, leg_b) {
        (Err(Error::Unreachable), _) | (_, Err(Error::Unreachable)) => {
            return Err(Error::Unreachable)
        }
        (a, b) => (a?, b?),
    };
    Ok(assemble(design, p, leg_a, leg_b))
}

/// Every inverse-kinematics solution at `p`: up to four regular ones, or fewer
/// with boundary-flagged legs. Empty when unreachable.
pub fn ik_all(design: &DesignParams, p: PlanarPoint) -> Vec<PlanarIkSolution> {
    if !p.is_finite() {
        return Vec::new();
    }
    let (l1, l2) = (design.l1(), design.l2());
    let legs_a = leg_candidates(design.a(), p, l1, l2);
    let legs_b = leg_candidates(design.b(), p, l1, l2);
    let mut out = Vec::with_capacity(legs_a.len() * legs_b.len());
    for &la in &legs_a {
        for &lb in &legs_b {
            out.push(assemble(design, p, la, lb));
        }
    }
    out
}
