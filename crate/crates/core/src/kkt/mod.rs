//! Equality-constrained least squares in closed form and a small dense QP
//! solver.

mod dense;
mod gradient;
mod lsq;
mod qp;

pub use dense::{eliminate_equalities, pinv, pinv_symmetric, EqualityElimination, RANK_TOL};
pub use gradient::solve_qp_projected_gradient;
pub use lsq::{solve_equality_lsq, CachedLsq, EqualityLsq, LsqSolution};
pub use qp::{solve_qp, solve_qp_with, DenseQp, QpOptions, QpSolution};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KktError {
    #[error("constraints are inconsistent")]
    Infeasible,
    #[error("objective is unbounded below on the feasible set")]
    Unbounded,
    #[error("iteration limit reached after {0} iterations")]
    MaxIterations(usize),
    #[error("quadratic term is not positive definite where it must be")]
    NotConvex,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}
