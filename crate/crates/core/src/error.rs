use thiserror::Error;

/// Serial-singular entry of the inverse-kinematics matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
pub enum SerialEntry {
    /// Base revolute: `P` on the line `AB`.
    Axis,
    /// Leg `A`: `AC` and `CP` aligned.
    LegA,
    /// Leg `B`: `BD` and `DP` aligned.
    LegB,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("link lengths L1 and L2 must be positive (got L1={l1}, L2={l2})")]
    NonPositiveLink { l1: f64, l2: f64 },
    #[error("base length L0 must be non-negative (got {0})")]
    NegativeBase(f64),
    #[error("non-finite input value")]
    NonFinite,
    #[error("posture lies on a serial singularity ({0:?})")]
    OnSerialSingularity(SerialEntry),
    #[error("distal circles do not intersect: |CD| = {distance} > 2 L2")]
    UnreachableAssembly { distance: f64 },
    #[error("C and D coincide; P is indeterminate")]
    DegenerateAssembly,
    #[error("point is outside the reachable annuli")]
    Unreachable,
    #[error("point lies on the serial boundary of leg {0:?}")]
    OnSerialBoundary(SerialEntry),
    #[error("point lies on the base axis AB; theta1 is undefined")]
    AxisDegenerate,
    #[error("direct-kinematics matrix is singular (normalized det {0:e})")]
    ParallelSingular(f64),
    #[error("inverse-kinematics matrix is singular ({0:?})")]
    SerialSingular(SerialEntry),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("design search space is empty")]
    EmptySearchSpace,
    #[error("no reachable serial-boundary crossing: {0}")]
    NoCrossing(String),
    #[error("plan validation failed: {0}")]
    ValidationFailed(String),
}

impl Error {
    /// Short machine-readable name of the variant.
    pub fn reason(&self) -> &'static str {
        match self {
            Error::NonPositiveLink { .. } => "NonPositiveLink",
            Error::NegativeBase(_) => "NegativeBase",
            Error::NonFinite => "NonFinite",
            Error::OnSerialSingularity(_) => "OnSerialSingularity",
            Error::UnreachableAssembly { .. } => "UnreachableAssembly",
            Error::DegenerateAssembly => "DegenerateAssembly",
            Error::Unreachable => "Unreachable",
            Error::OnSerialBoundary(_) => "OnSerialBoundary",
            Error::AxisDegenerate => "AxisDegenerate",
            Error::ParallelSingular(_) => "ParallelSingular",
            Error::SerialSingular(_) => "SerialSingular",
            Error::InvalidGrid(_) => "InvalidGrid",
            Error::EmptySearchSpace => "EmptySearchSpace",
            Error::NoCrossing(_) => "NoCrossing",
            Error::ValidationFailed(_) => "ValidationFailed",
        }
    }

    /// True for input-validation failures (bad lengths, grids, non-finite values).
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::NonPositiveLink { .. }
                | Error::NegativeBase(_)
                | Error::NonFinite
                | Error::InvalidGrid(_)
                | Error::EmptySearchSpace
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
