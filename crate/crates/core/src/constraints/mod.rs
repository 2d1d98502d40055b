//! Polytopic state, input and disturbance constraints and the dual robust
//! reformulation that turns "for all w in W" into affine constraints on
//! `(Phi, Xi)`.

mod polytope;
mod problem;

pub use polytope::{
    build_box_constraints, build_disturbance_polytope, BoxBounds, BoxOptions, DisturbanceRow, HalfSpaceRow,
    RobustConstraintData,
};
pub use problem::{assemble_robust_problem, CostWeights, DualCertificate, ProblemKind, RobustProblem, RobustResidual};

use crate::sls::RowKind;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConstraintError {
    #[error("{kind:?} bound on coordinate {coord} at t = {time} excludes the origin")]
    OriginExcluded { kind: RowKind, coord: usize, time: usize },
    #[error("bound on {0} is not finite")]
    NotFinite(String),
    #[error("noise bound must be nonnegative, got {0}")]
    NegativeNoise(f64),
    #[error("{what} row {row} couples several subsystems or time steps")]
    Coupled { what: &'static str, row: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}
