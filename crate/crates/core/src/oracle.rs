//! Centralized reference solver: the whole locality-constrained robust
//! problem as one dense QP over the masked entries of `Phi` and `Xi`.

use nalgebra::{DMatrix, DVector};

use crate::constraints::{DualCertificate, ProblemKind, RobustProblem};
use crate::kkt::{solve_qp, DenseQp, KktError, QpSolution};
use crate::sls::zab_row;
use crate::Real;

/// Stacked decision vector of the central problem: masked `Phi` entries
/// (active columns only) followed by the allowed `Xi` entries.
#[derive(Debug, Clone)]
pub struct CentralProblem<T: Real> {
    pub phi_vars: Vec<(usize, usize)>,
    pub xi_vars: Vec<(usize, usize)>,
    pub qp: DenseQp<T>,
}

#[derive(Debug, Clone)]
pub struct CentralSolution<T: Real> {
    /// `n_rows x n_cols`, zero outside the mask and the active columns
    pub phi: DMatrix<T>,
    pub xi: DualCertificate<T>,
    pub objective: T,
    pub qp: QpSolution<T>,
}

impl<T: Real> CentralProblem<T> {
    pub fn build(problem: &RobustProblem<T>) -> Result<Self, KktError> {
        let layout = *problem.mask.layout();
        let n = layout.n;
        let na = problem.n_active_cols();
        let mut index = vec![usize::MAX; layout.n_rows() * na];
        let mut phi_vars = Vec::new();
        for r in 0..layout.n_rows() {
            for c in 0..na {
                if problem.mask.contains(r, c) {
                    index[r * na + c] = phi_vars.len();
                    phi_vars.push((r, c));
                }
            }
        }
        let var = |r: usize, c: usize| match index[r * na + c] {
            usize::MAX => None,
            k => Some(k),
        };
        let robust = problem.kind == ProblemKind::Robust;
        let mut xi_vars = Vec::new();
        if robust {
            for (l, allowed) in problem.xi_support.iter().enumerate() {
                xi_vars.extend(allowed.iter().map(|&m| (l, m)));
            }
        }
        let np = phi_vars.len();
        let nv = np + xi_vars.len();

        // objective sum_r w_r (Phi_r{1} x0)^2 = 1/2 z' Q z
        let mut q = DMatrix::zeros(nv, nv);
        for r in 0..layout.n_rows() {
            let w = problem.row_weight[r];
            if w == T::zero() {
                continue;
            }
            let a: Vec<(usize, T)> = (0..n).filter_map(|c| var(r, c).map(|k| (k, problem.x0[c]))).collect();
            for &(i, ai) in &a {
                for &(j, aj) in &a {
                    q[(i, j)] += T::lit(2.0) * w * ai * aj;
                }
            }
        }

        let mut eq_rows: Vec<Vec<(usize, T)>> = Vec::new();
        let mut eq_rhs = Vec::new();
        for i in 0..layout.n_state_rows() {
            let entries = zab_row(&problem.model, &layout, i);
            for c in 0..na {
                let row: Vec<(usize, T)> = entries.iter().filter_map(|&(r, v)| var(r, c).map(|k| (k, v))).collect();
                let rhs = if i == c { T::one() } else { T::zero() };
                if row.is_empty() {
                    if rhs != T::zero() {
                        return Err(KktError::Infeasible);
                    }
                    continue;
                }
                eq_rows.push(row);
                eq_rhs.push(rhs);
            }
        }

        let mut in_rows: Vec<Vec<(usize, T)>> = Vec::new();
        let mut in_rhs = Vec::new();
        let xi_start: Vec<usize> = problem
            .xi_support
            .iter()
            .scan(np, |acc, s| {
                let start = *acc;
                if robust {
                    *acc += s.len();
                }
                Some(start)
            })
            .collect();
        for (l, hrow) in problem.data.h_rows.iter().enumerate() {
            let mut row = Vec::new();
            for &(r, v) in &hrow.entries {
                for c in 0..n {
                    if let Some(k) = var(r, c) {
                        row.push((k, v * problem.x0[c]));
                    }
                }
            }
            if robust {
                for (j, &m) in problem.xi_support[l].iter().enumerate() {
                    row.push((xi_start[l] + j, problem.data.g_rows[m].rhs));
                }
                // H Phi{2:} = Xi G, column by column
                for c in n..na {
                    let (block, s) = (c / n, c % n);
                    let mut e = Vec::new();
                    for &(r, v) in &hrow.entries {
                        if let Some(k) = var(r, c) {
                            e.push((k, v));
                        }
                    }
                    for (j, &m) in problem.xi_support[l].iter().enumerate() {
                        let g = &problem.data.g_rows[m];
                        if g.block != block {
                            continue;
                        }
                        for &(s2, coef) in &g.entries {
                            if s2 == s {
                                e.push((xi_start[l] + j, -coef));
                            }
                        }
                    }
                    if !e.is_empty() {
                        eq_rows.push(e);
                        eq_rhs.push(T::zero());
                    }
                }
            }
            in_rows.push(row);
            in_rhs.push(hrow.rhs);
        }
        for k in np..nv {
            in_rows.push(vec![(k, -T::one())]);
            in_rhs.push(T::zero());
        }

        let dense = |rows: &[Vec<(usize, T)>]| {
            let mut m = DMatrix::zeros(rows.len(), nv);
            for (i, row) in rows.iter().enumerate() {
                for &(k, v) in row {
                    m[(i, k)] += v;
                }
            }
            m
        };
        let qp = DenseQp::new(q, DVector::zeros(nv))
            .with_equalities(dense(&eq_rows), DVector::from_vec(eq_rhs))
            .with_inequalities(dense(&in_rows), DVector::from_vec(in_rhs));
        Ok(Self { phi_vars, xi_vars, qp })
    }

    pub fn n_vars(&self) -> usize {
        self.phi_vars.len() + self.xi_vars.len()
    }
}

/// Solves the central problem; returns the dense `Phi`, `Xi` and the
/// predicted cost.
pub fn solve_central<T: Real>(problem: &RobustProblem<T>) -> Result<CentralSolution<T>, KktError> {
    let central = CentralProblem::build(problem)?;
    let sol = solve_qp(&central.qp)?;
    let layout = *problem.mask.layout();
    let mut phi = DMatrix::zeros(layout.n_rows(), layout.n_cols());
    for (k, &(r, c)) in central.phi_vars.iter().enumerate() {
        phi[(r, c)] = sol.z[k];
    }
    let mut xi = DMatrix::zeros(problem.n_h(), problem.n_g());
    let np = central.phi_vars.len();
    for (k, &(l, m)) in central.xi_vars.iter().enumerate() {
        xi[(l, m)] = sol.z[np + k].max(T::zero());
    }
    Ok(CentralSolution { objective: problem.objective(&phi), phi, xi: DualCertificate { xi }, qp: sol })
}
