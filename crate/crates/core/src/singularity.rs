//! Serial and parallel singularities and the conditioning of `A`.
//!
//! With `delta = theta4 - theta5`, `A Aᵀ / L2²` has eigenvalues
//! `1 - |cos delta|`, `1` and `1 + |cos delta|`, so
//! `kappa(A) = sqrt((1 + |cos delta|) / (1 - |cos delta|)) = (1 + |cos delta|) / |sin delta|`
//! and `det A / L2³ = -sin delta`, bounded by 1 in magnitude.

use serde::Serialize;

use crate::hybrid::{jacobians, normalized_b_entries, normalized_det_a};
use crate::linalg::Mat3;
use crate::model::{Posture, SINGULAR_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum SingularityKind {
    None,
    SerialAxis,
    SerialLegB,
    SerialLegA,
    ParallelFlat,
    ParallelCoincident,
}

impl SingularityKind {
    pub fn is_parallel(self) -> bool {
        matches!(
            self,
            SingularityKind::ParallelFlat | SingularityKind::ParallelCoincident
        )
    }

    pub fn is_serial(self) -> bool {
        matches!(
            self,
            SingularityKind::SerialAxis | SingularityKind::SerialLegA | SingularityKind::SerialLegB
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingularityReport {
    /// Most severe kind present.
    pub kind: SingularityKind,
    /// Every kind present, most severe first; empty when regular.
    pub kinds: Vec<SingularityKind>,
    pub det_a_norm: f64,
    pub det_b_norm: f64,
    pub delta: f64,
    pub kappa: f64,
}

impl SingularityReport {
    pub fn has(&self, kind: SingularityKind) -> bool {
        self.kinds.contains(&kind)
    }

    pub fn is_parallel(&self) -> bool {
        self.kind.is_parallel()
    }

    pub fn is_serial(&self) -> bool {
        self.kinds.iter().any(|k| k.is_serial())
    }
}

/// Classifies a consistent posture; `tol` applies to normalized quantities.
pub fn classify(posture: &Posture, tol: f64) -> SingularityReport {
    let design = &posture.design;
    let (a, _) = jacobians(posture);
    let det_a_norm = normalized_det_a(&a, design);
    let entries = normalized_b_entries(posture);
    let det_b_norm = entries.iter().product();
    let delta = posture.joints.delta();

    let mut kinds = Vec::new();
    if posture.c.distance(posture.d) / design.l1() < tol {
        kinds.push(SingularityKind::ParallelCoincident);
    } else if delta.sin().abs() < tol {
        kinds.push(SingularityKind::ParallelFlat);
    }
    if entries[1].abs() < tol {
        kinds.push(SingularityKind::SerialLegA);
    }
    if entries[2].abs() < tol {
        kinds.push(SingularityKind::SerialLegB);
    }
    if entries[0].abs() < tol {
        kinds.push(SingularityKind::SerialAxis);
    }
    kinds.sort_by(|x, y| y.cmp(x));

    SingularityReport {
        kind: kinds.first().copied().unwrap_or(SingularityKind::None),
        kinds,
        det_a_norm,
        det_b_norm,
        delta,
        kappa: condition_number_closed(delta),
    }
}

/// Classification at the default tolerance.
pub fn classify_default(posture: &Posture) -> SingularityReport {
    classify(posture, SINGULAR_TOL)
}

/// Condition number of `A` as a function of `delta = theta4 - theta5`:
/// `max(|tan(delta/2)|, 1/|tan(delta/2)|)`, `+inf` when `sin delta` vanishes
/// to rounding.
pub fn condition_number_closed(delta: f64) -> f64 {
    let s = delta.sin().abs();
    if !(s > 4.0 * f64::EPSILON) {
        return f64::INFINITY;
    }
    (1.0 + delta.cos().abs()) / s
}

/// `sigma_max / sigma_min`; `+inf` when `sigma_min < 1e-14 sigma_max`.
pub fn condition_number_svd(m: &Mat3) -> f64 {
    let sv = m.singular_values();
    if sv[0] == 0.0 || sv[2] < 1e-14 * sv[0] {
        return f64::INFINITY;
    }
    sv[0] / sv[2]
}

/// Condition number of the inverse-kinematics matrix `B` (no closed form).
pub fn condition_number_b(posture: &Posture) -> f64 {
    let (_, b) = jacobians(posture);
    condition_number_svd(&b)
}

pub fn is_isotropic(posture: &Posture, tol: f64) -> bool {
    (condition_number_closed(posture.joints.delta()) - 1.0).abs() <= tol
}
