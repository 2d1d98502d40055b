//! Robust distributed and localized model predictive control built on system
//! level synthesis: locality-constrained closed-loop responses, a dual
//! reformulation of polytopic robust constraints, per-subsystem ADMM, and a
//! message-passing simulator.

mod scalar;
pub mod admm;
pub mod constraints;
pub mod kkt;
pub mod mpc;
pub mod network;
pub mod oracle;
pub mod sls;

#[cfg(test)]
mod testing;

pub use scalar::Real;
