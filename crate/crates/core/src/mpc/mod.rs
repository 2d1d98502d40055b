//! Receding-horizon simulation: sample disturbances, solve the robust or
//! nominal problem at the measured state, apply the first input, repeat.

mod closed_loop;
mod disturbance;
mod trajectory;

pub use closed_loop::{
    nominal_solve, run_closed_loop, ExperimentConfig, MpcController, SolverKind, StepResult, BENCHMARK_ACTUATION,
};
pub use disturbance::{draw_initial_state, generate_disturbance};
pub use trajectory::{evaluate_cost, NetworkStats, StepStats, Trajectory};

use crate::admm::AdmmError;
use crate::constraints::ConstraintError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MpcError {
    #[error("invalid experiment: {0}")]
    Config(String),
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
    #[error("t = {time}: {source}")]
    Solver { time: usize, source: AdmmError },
    #[error("setup: {0}")]
    Setup(AdmmError),
}

impl MpcError {
    /// `true` for a step whose local problem had no feasible point.
    pub fn is_infeasible(&self) -> bool {
        matches!(self, Self::Solver { source: AdmmError::LocalInfeasible { .. }, .. })
    }
}
