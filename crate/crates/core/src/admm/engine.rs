use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::layout::AdmmLayout;
use super::local::{LocalResiduals, SubsystemAdmmState};
use super::params::{penalty_update, AdmmParams, IterationRecord};
use super::kernels::column_update;
use super::AdmmError;
use crate::constraints::{DualCertificate, RobustProblem};
use crate::Real;

/// Outcome of the stopping test after one iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceStatus {
    pub converged: bool,
    /// global `|Phi~ - H~ Psi~|`
    pub primal_residual: f64,
    /// global `rho |H~ (Psi~^{k+1} - Psi~^k)|`
    pub dual_residual: f64,
}

/// Every subsystem must satisfy both local tests; the global norms are
/// aggregated over the reduction tree for the penalty update.
pub fn convergence_check<T: Real>(
    layout: &AdmmLayout<T>,
    locals: &[LocalResiduals<T>],
    rho: T,
    params: &AdmmParams,
) -> ConvergenceStatus {
    let scale = |count: usize| if params.scale_tolerances { (count.max(1) as f64).sqrt() } else { 1.0 };
    let flags: Vec<bool> = layout
        .subsystems
        .iter()
        .zip(locals)
        .map(|(sub, loc)| {
            loc.primal_sq.as_f64().sqrt() <= params.eps_p * scale(sub.primal_count)
                && loc.psi_change_sq.as_f64().sqrt() <= params.eps_d * scale(sub.dual_count)
        })
        .collect();
    let primal: Vec<T> = locals.iter().map(|l| l.primal_sq).collect();
    let dual: Vec<T> = locals.iter().map(|l| l.hpsi_change_sq).collect();
    ConvergenceStatus {
        converged: layout.tree.all(&flags),
        primal_residual: layout.tree.sum(&primal).sqrt().as_f64(),
        dual_residual: (rho * layout.tree.sum(&dual).sqrt()).as_f64(),
    }
}

/// Dense reassembly of the distributed iterates.
#[derive(Debug, Clone)]
pub struct AssembledSolution<T: Real> {
    /// column variable, `n_rows x n_cols`; inactive columns are zero
    pub psi: DMatrix<T>,
    /// row variable, first column block only
    pub phi_first: DMatrix<T>,
    pub xi: DualCertificate<T>,
}

#[derive(Debug, Clone)]
pub struct AdmmOutcome<T: Real> {
    pub converged: bool,
    pub iterations: usize,
    pub status: ConvergenceStatus,
    pub trace: Vec<IterationRecord>,
    /// first control action `Psi_u0[0] x0`
    pub u0: DVector<T>,
    pub states: Vec<SubsystemAdmmState<T>>,
}

impl<T: Real> AdmmOutcome<T> {
    pub fn require_converged(self) -> Result<Self, AdmmError> {
        if self.converged {
            Ok(self)
        } else {
            Err(AdmmError::NotConverged {
                iterations: self.iterations,
                primal: self.status.primal_residual,
                dual: self.status.dual_residual,
            })
        }
    }
}

/// Monolithic driver: runs every subsystem's share of the iteration in one
/// process, in parallel between barriers.
#[derive(Debug, Clone)]
pub struct AdmmEngine<T: Real> {
    problem: RobustProblem<T>,
    layout: AdmmLayout<T>,
}

impl<T: Real> AdmmEngine<T> {
    pub fn new(problem: &RobustProblem<T>) -> Result<Self, AdmmError> {
        Ok(Self { layout: AdmmLayout::new(problem)?, problem: problem.clone() })
    }

    pub fn layout(&self) -> &AdmmLayout<T> {
        &self.layout
    }

    pub fn problem(&self) -> &RobustProblem<T> {
        &self.problem
    }

    pub fn initial_states(&self, rho0: T) -> Vec<SubsystemAdmmState<T>> {
        self.layout.subsystems.iter().map(|s| SubsystemAdmmState::zeros(s, rho0)).collect()
    }

    /// One full iteration: row updates, column updates, multiplier updates.
    pub fn step(&self, x0: &DVector<T>, states: &mut [SubsystemAdmmState<T>]) -> Result<Vec<LocalResiduals<T>>, AdmmError> {
        let subs = &self.layout.subsystems;
        let rows: Vec<Result<(), AdmmError>> =
            states.par_iter_mut().zip(subs.par_iter()).map(|(st, sub)| st.row_update(sub, x0)).collect();
        rows.into_iter().collect::<Result<Vec<()>, _>>()?;

        let shared: &[SubsystemAdmmState<T>] = states;
        let cols: Vec<Vec<DVector<T>>> = subs
            .par_iter()
            .map(|sub| {
                sub.cols
                    .iter()
                    .map(|col| {
                        let v = DVector::from_iterator(
                            col.sources.len(),
                            col.sources.iter().map(|s| shared[s.owner()].target(*s)),
                        );
                        column_update(col, &v)
                    })
                    .collect()
            })
            .collect();
        for (st, c) in states.iter_mut().zip(cols) {
            st.psi_col = c;
        }

        let shared: &[SubsystemAdmmState<T>] = states;
        let views: Vec<Vec<DVector<T>>> = subs
            .par_iter()
            .map(|sub| {
                sub.rows
                    .iter()
                    .map(|row| {
                        DVector::from_iterator(
                            row.cols.len(),
                            row.col_refs.iter().map(|&(o, l, p)| shared[o].psi_col[l][p]),
                        )
                    })
                    .collect()
            })
            .collect();
        Ok(states
            .par_iter_mut()
            .zip(subs.par_iter())
            .zip(views.into_par_iter())
            .map(|((st, sub), v)| st.finish(sub, v))
            .collect())
    }

    pub fn solve(&self, x0: &DVector<T>, params: &AdmmParams) -> Result<AdmmOutcome<T>, AdmmError> {
        self.solve_from(x0, params, self.initial_states(T::lit(params.rho0)))
    }

    /// Runs from the given iterates (warm start). The penalty stored in the
    /// states is kept.
    pub fn solve_from(
        &self,
        x0: &DVector<T>,
        params: &AdmmParams,
        mut states: Vec<SubsystemAdmmState<T>>,
    ) -> Result<AdmmOutcome<T>, AdmmError> {
        params.validate()?;
        let n = self.layout.response.n;
        if x0.len() != n {
            return Err(AdmmError::Dimension(format!("x0 has {} entries, expected {n}", x0.len())));
        }
        if states.len() != self.layout.n_subsystems()
            || !states.iter().zip(&self.layout.subsystems).all(|(s, sub)| s.matches(sub))
        {
            return Err(AdmmError::Dimension("initial iterates do not match the layout".into()));
        }
        let mut rho = states.first().map_or(T::lit(params.rho0), |s| s.rho);
        let mut trace = Vec::new();
        let mut status = ConvergenceStatus { converged: false, primal_residual: f64::INFINITY, dual_residual: f64::INFINITY };
        let mut iterations = 0;
        for k in 0..params.max_iters {
            let locals = self.step(x0, &mut states)?;
            iterations = k + 1;
            status = convergence_check(&self.layout, &locals, rho, params);
            trace.push(IterationRecord {
                iteration: k,
                rho: rho.as_f64(),
                primal_residual: status.primal_residual,
                dual_residual: status.dual_residual,
            });
            if params.audit_mask || cfg!(debug_assertions) {
                debug_assert!(states.iter().zip(&self.layout.subsystems).all(|(s, sub)| s.matches(sub)));
            }
            if params.audit_mask {
                audit_iterates(&self.layout, &self.problem, &states).map_err(|what| AdmmError::MaskViolation { iteration: k, what })?;
            }
            if status.converged {
                break;
            }
            let next = penalty_update(rho, T::lit(status.primal_residual), T::lit(status.dual_residual), params, k);
            for st in &mut states {
                st.set_rho(next);
            }
            rho = next;
        }
        let u0 = self.first_input(&states, x0);
        Ok(AdmmOutcome { converged: status.converged, iterations, status, trace, u0, states })
    }

    pub fn first_input(&self, states: &[SubsystemAdmmState<T>], x0: &DVector<T>) -> DVector<T> {
        let layout = self.layout.response;
        DVector::from_iterator(
            layout.p,
            (0..layout.p).map(|q| match self.layout.row_loc[layout.input_row(0, q)] {
                Some((o, l)) => states[o].first_input(&self.layout.subsystems[o], l, x0),
                None => T::zero(),
            }),
        )
    }

    pub fn assemble(&self, states: &[SubsystemAdmmState<T>]) -> AssembledSolution<T> {
        assemble_states(&self.layout, states)
    }

    /// Predicted cost of the column variable at `x0`.
    pub fn objective(&self, solution: &AssembledSolution<T>, x0: &DVector<T>) -> T {
        let n = self.layout.response.n;
        let y = solution.psi.columns(0, n) * x0;
        y.iter().zip(&self.problem.row_weight).fold(T::zero(), |acc, (&v, &w)| acc + w * v * v)
    }
}

pub(crate) fn assemble_states<T: Real>(layout: &AdmmLayout<T>, states: &[SubsystemAdmmState<T>]) -> AssembledSolution<T> {
    let response = layout.response;
    let mut psi = DMatrix::zeros(response.n_rows(), response.n_cols());
    let mut phi_first = DMatrix::zeros(response.n_rows(), response.n);
    let mut xi = DMatrix::zeros(layout.n_h, layout.n_g);
    for (sub, st) in layout.subsystems.iter().zip(states) {
        for (k, col) in sub.cols.iter().enumerate() {
            for (j, &r) in col.rows.iter().enumerate() {
                psi[(r, col.col)] = st.psi_col[k][j];
            }
        }
        for (k, row) in sub.rows.iter().enumerate() {
            for j in 0..row.n_first {
                phi_first[(row.row, row.cols[j])] = st.phi_row[k][j];
            }
        }
        for (k, h) in sub.h_rows.iter().enumerate() {
            for (j, &m) in h.xi_rows.iter().enumerate() {
                xi[(h.index, m)] = st.xi_row[k][j];
            }
        }
    }
    AssembledSolution { psi, phi_first, xi: DualCertificate { xi } }
}

/// Dense check of the iterates against the locality and certificate masks.
pub(crate) fn audit_iterates<T: Real>(
    layout: &AdmmLayout<T>,
    problem: &RobustProblem<T>,
    states: &[SubsystemAdmmState<T>],
) -> Result<(), String> {
    if !states.iter().zip(&layout.subsystems).all(|(s, sub)| s.matches(sub)) {
        return Err("block shapes differ from the layout".into());
    }
    let sol = assemble_states(layout, states);
    let mask = &problem.mask;
    if mask.violation(&sol.psi) != T::zero() {
        return Err("Psi outside the locality mask".into());
    }
    let mut first = DMatrix::zeros(mask.layout().n_rows(), mask.layout().n_cols());
    first.columns_mut(0, mask.layout().n).copy_from(&sol.phi_first);
    if mask.violation(&first) != T::zero() {
        return Err("Phi outside the locality mask".into());
    }
    if sol.xi.mask_violation(problem) != T::zero() {
        return Err("Xi outside its mask".into());
    }
    if sol.xi.negativity() != T::zero() {
        return Err("negative Xi entry".into());
    }
    Ok(())
}

/// Builds the engine for `problem` and runs it from zero at `problem.x0`.
pub fn solve_admm<T: Real>(problem: &RobustProblem<T>, params: &AdmmParams) -> Result<AdmmOutcome<T>, AdmmError> {
    AdmmEngine::new(problem)?.solve(&problem.x0, params)
}
