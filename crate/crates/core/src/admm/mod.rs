//! Per-subsystem varying-penalty ADMM over the locality-constrained robust
//! problem: row blocks `(Phi, Omega, Xi)` against column blocks `Psi`.

mod engine;
mod kernels;
mod layout;
mod local;
mod params;
mod reduce;

pub(crate) use engine::audit_iterates;
pub use engine::{convergence_check, solve_admm, AdmmEngine, AdmmOutcome, AssembledSolution, ConvergenceStatus};
pub use kernels::{column_update, h_row_update, h_times_psi, phi_row_update, xi_times_g};
pub use layout::{AdmmLayout, BoxPair, BoxSide, ColSpec, HRowSpec, RowSpec, SubsystemLayout, TargetSource};
pub use local::{LocalResiduals, SubsystemAdmmState};
pub use params::{penalty_update, AdmmParams, IterationRecord};
pub use reduce::ReductionTree;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AdmmError {
    #[error("invalid ADMM parameter: {0}")]
    InvalidParams(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("bad constraint structure: {0}")]
    Structure(String),
    #[error("subsystem {subsystem}: local problem of H row {h_row} is infeasible")]
    LocalInfeasible { subsystem: usize, h_row: usize },
    #[error("subsystem {subsystem}: column {col} cannot meet the achievability constraint inside the mask")]
    NotLocalizable { subsystem: usize, col: usize },
    #[error("message from {sender} to {receiver} travels {hops} hops, allowed {allowed}")]
    LocalityViolation { sender: usize, receiver: usize, hops: usize, allowed: usize },
    #[error("iteration {iteration}: {what}")]
    MaskViolation { iteration: usize, what: String },
    #[error("no convergence after {iterations} iterations (primal {primal:.3e}, dual {dual:.3e})")]
    NotConverged { iterations: usize, primal: f64, dual: f64 },
}
