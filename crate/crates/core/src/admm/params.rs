use serde::{Deserialize, Serialize};

use super::AdmmError;
use crate::Real;

/// Knobs of the varying-penalty iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdmmParams {
    pub rho0: f64,
    pub tau: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub rho_max: f64,
    pub eps_p: f64,
    pub eps_d: f64,
    pub max_iters: usize,
    /// iteration index after which the penalty stops adapting
    pub freeze_after: usize,
    /// multiply `eps_p`/`eps_d` by the square root of each subsystem's
    /// variable count
    pub scale_tolerances: bool,
    /// rebuild the dense iterates and check them against the mask after
    /// every iteration
    pub audit_mask: bool,
}

impl Default for AdmmParams {
    fn default() -> Self {
        Self {
            rho0: 1.0,
            tau: 1.5,
            mu1: 10.0,
            mu2: 10.0,
            rho_max: 5.0,
            eps_p: 1e-3,
            eps_d: 1e-3,
            max_iters: 20_000,
            freeze_after: 200,
            scale_tolerances: true,
            audit_mask: false,
        }
    }
}

impl AdmmParams {
    /// Settings for closed-loop experiments: unscaled tolerances of `1e-6`,
    /// so that the applied input meets the state bounds to about that level,
    /// and room for 100000 iterations.
    pub fn closed_loop() -> Self {
        Self { scale_tolerances: false, max_iters: 100_000, ..Self::default() }.with_tolerance(1e-6)
    }

    pub fn with_tolerance(mut self, eps: f64) -> Self {
        self.eps_p = eps;
        self.eps_d = eps;
        self
    }

    pub fn validate(&self) -> Result<(), AdmmError> {
        let positive = [
            ("rho0", self.rho0),
            ("tau", self.tau),
            ("mu1", self.mu1),
            ("mu2", self.mu2),
            ("rho_max", self.rho_max),
            ("eps_p", self.eps_p),
            ("eps_d", self.eps_d),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(AdmmError::InvalidParams(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.max_iters == 0 {
            return Err(AdmmError::InvalidParams("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Residual balancing: grow the penalty when the primal residual dominates,
/// shrink it when the dual one does. From `freeze_after` on the penalty is
/// pinned at `min(rho, rho_max)`.
pub fn penalty_update<T: Real>(rho: T, r_norm: T, s_norm: T, params: &AdmmParams, iter: usize) -> T {
    if iter >= params.freeze_after {
        return rho.min(T::lit(params.rho_max));
    }
    let tau = T::lit(params.tau);
    if r_norm > T::lit(params.mu1) * s_norm {
        rho * tau
    } else if s_norm > T::lit(params.mu2) * r_norm {
        rho / tau
    } else {
        rho
    }
}

/// One line of the iteration trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub rho: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
}
