//! Kinematic and design analysis of a three-degree-of-freedom hybrid manipulator.
//!
//! The mechanism is a symmetric planar five-bar linkage `A-C-P-D-B` (proximal
//! links `L1`, distal links `L2`, pivots `A` and `B` a distance `L0` apart) whose
//! whole plane is rotated about the line `AB` by a base revolute `theta1`.
//!
//! Coordinates: the world `y` axis runs along `AB` with `A = (0, -L0/2, 0)` and
//! `B = (0, L0/2, 0)`. Inside the mechanism plane points are `(u, v)` with `v`
//! along `AB`; a planar point maps to the world as `(u cos theta1, v, -u sin theta1)`.
//! All link angles are measured from the `+u` axis, counterclockwise.
//!
//! Module map:
//! - [`model`]: domain types, validation, working and assembly modes.
//! - [`planar`]: exact five-bar forward/inverse kinematics.
//! - [`hybrid`]: the 3-DOF lift, Jacobians `A` and `B` and velocity solves.
//! - [`singularity`]: classification and condition numbers.
//! - [`workspace`]: rasters, areas and volumes.
//! - [`design`]: design rules, workspace optimisation and isoconditioning contours.
//! - [`planner`]: working-mode change planning.
//! - [`export`]: CSV, SVG and JSON writers.

pub mod design;
pub mod error;
pub mod export;
pub mod hybrid;
pub mod linalg;
pub mod model;
pub mod planar;
pub mod planner;
pub mod singularity;
pub mod workspace;

pub use error::{Error, Result};
pub use hybrid::{
    hybrid_fk, hybrid_ik, jacobians, velocity_forward, velocity_inverse, CartesianRates,
    JointRates,
};
pub use linalg::Mat3;
pub use model::{
    normalize_angle, working_mode_of, AssemblyMode, DesignParams, JointState, PlanarPoint,
    Posture, Sign, WorkingMode, WorldPoint,
};
pub use planar::{ik_all, loop_residual, planar_fk, planar_ik, Branch, PlanarIkSolution};
