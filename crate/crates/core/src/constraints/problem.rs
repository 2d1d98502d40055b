use nalgebra::{DMatrix, DVector};

use super::polytope::RobustConstraintData;
use super::ConstraintError;
use crate::sls::{build_zab, LocalityMask, RowKind, SystemModel};
use crate::Real;

/// Whether disturbances are accounted for (dual certificate over `W`) or
/// ignored (only the first block column of the response is optimized).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Robust,
    Nominal,
}

/// Diagonal quadratic stage cost `x' diag(q) x + u' diag(r) u`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostWeights<T: Real> {
    pub q: Vec<T>,
    pub r: Vec<T>,
}

impl<T: Real> CostWeights<T> {
    pub fn identity(n: usize, p: usize) -> Self {
        Self { q: vec![T::one(); n], r: vec![T::one(); p] }
    }
}

/// Nonnegative multiplier matrix `Xi` (rows of `H` by rows of `G`).
#[derive(Debug, Clone, PartialEq)]
pub struct DualCertificate<T: Real> {
    pub xi: DMatrix<T>,
}

impl<T: Real> DualCertificate<T> {
    /// Largest absolute entry outside the allowed support of `problem`.
    pub fn mask_violation(&self, problem: &RobustProblem<T>) -> T {
        let mut worst = T::zero();
        for l in 0..self.xi.nrows() {
            let allowed = &problem.xi_support[l];
            for m in 0..self.xi.ncols() {
                if allowed.binary_search(&m).is_err() {
                    worst = worst.max(self.xi[(l, m)].abs());
                }
            }
        }
        worst
    }

    /// Most negative entry, as a nonnegative number.
    pub fn negativity(&self) -> T {
        self.xi.iter().fold(T::zero(), |acc, &v| acc.max(-v))
    }
}

/// Fully assembled finite-horizon problem for one initial state:
///
/// ```text
/// min   sum_r weight_r ([Phi{1} x0]_r)^2
/// s.t.  Z_AB Phi = I,  Phi in L_d,  Xi in L_d,  Xi >= 0,
///       H Phi{1} x0 + Xi g <= h,    H Phi{2:} = Xi G
/// ```
///
/// The nominal kind drops `Xi`, `G` and every column block but the first.
#[derive(Debug, Clone)]
pub struct RobustProblem<T: Real> {
    pub kind: ProblemKind,
    pub model: SystemModel<T>,
    pub mask: LocalityMask,
    pub data: RobustConstraintData<T>,
    pub x0: DVector<T>,
    pub cost: CostWeights<T>,
    /// cost weight of every stacked response row
    pub row_weight: Vec<T>,
    /// per `H` row: the response columns where `(H Phi)_row` can be nonzero
    pub h_cols: Vec<Vec<usize>>,
    /// per `H` row: sorted indices of the `G` rows `Xi` may pair it with
    pub xi_support: Vec<Vec<usize>>,
}

/// Max-norm violations of every constraint of the assembled problem.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RobustResidual {
    pub achievability: f64,
    pub inequality: f64,
    pub equality: f64,
    pub xi_negativity: f64,
    pub phi_mask: f64,
    pub xi_mask: f64,
}

impl RobustResidual {
    pub fn max(&self) -> f64 {
        [self.achievability, self.inequality, self.equality, self.xi_negativity, self.phi_mask, self.xi_mask]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

pub fn assemble_robust_problem<T: Real>(
    model: &SystemModel<T>,
    mask: &LocalityMask,
    data: &RobustConstraintData<T>,
    x0: &DVector<T>,
    cost: &CostWeights<T>,
    kind: ProblemKind,
) -> Result<RobustProblem<T>, ConstraintError> {
    let layout = *mask.layout();
    if layout.n != model.n_states() || layout.p != model.n_inputs() || layout.horizon != data.horizon {
        return Err(ConstraintError::Dimension("mask, model and constraint horizon disagree".into()));
    }
    if x0.len() != layout.n {
        return Err(ConstraintError::Dimension(format!("x0 has {} entries, expected {}", x0.len(), layout.n)));
    }
    if cost.q.len() != layout.n || cost.r.len() != layout.p {
        return Err(ConstraintError::Dimension("cost weights do not match the model".into()));
    }
    data.audit(model)?;
    let mut data = data.clone();
    if kind == ProblemKind::Nominal {
        data.g_rows.clear();
    }
    let graph = model.graph();
    let mut row_weight = vec![T::zero(); layout.n_rows()];
    for (r, w) in row_weight.iter_mut().enumerate() {
        let info = layout.row_info(r);
        *w = match info.kind {
            RowKind::State => cost.q[info.coord],
            RowKind::Input if info.time < layout.horizon => cost.r[info.coord],
            RowKind::Input => T::zero(),
        };
    }
    let mut h_cols = Vec::with_capacity(data.h_rows.len());
    let mut xi_support = Vec::with_capacity(data.h_rows.len());
    for row in &data.h_rows {
        let mut cols: Vec<usize> = row.entries.iter().flat_map(|&(r, _)| mask.row_support(r)).collect();
        cols.sort_unstable();
        cols.dedup();
        h_cols.push(cols);
        let reach = match row.kind {
            RowKind::State => mask.radius(),
            RowKind::Input => mask.radius() + 1,
        };
        let allowed = data
            .g_rows
            .iter()
            .enumerate()
            .filter(|(_, g)| g.block <= row.time && graph.within(g.owner, row.owner, reach))
            .map(|(m, _)| m)
            .collect();
        xi_support.push(allowed);
    }
    Ok(RobustProblem {
        kind,
        model: model.clone(),
        mask: mask.clone(),
        data,
        x0: x0.clone(),
        cost: cost.clone(),
        row_weight,
        h_cols,
        xi_support,
    })
}

impl<T: Real> RobustProblem<T> {
    pub fn n_h(&self) -> usize {
        self.data.h_rows.len()
    }

    pub fn n_g(&self) -> usize {
        self.data.g_rows.len()
    }

    pub fn horizon(&self) -> usize {
        self.mask.horizon()
    }

    /// Number of response columns optimized: all of them when robust, the
    /// first block when nominal.
    pub fn n_active_cols(&self) -> usize {
        match self.kind {
            ProblemKind::Robust => self.mask.layout().n_cols(),
            ProblemKind::Nominal => self.mask.layout().n,
        }
    }

    /// Predicted cost `sum_r weight_r ([Phi{1} x0]_r)^2`.
    pub fn objective(&self, phi: &DMatrix<T>) -> T {
        let n = self.mask.layout().n;
        let y = phi.columns(0, n) * &self.x0;
        y.iter().zip(&self.row_weight).fold(T::zero(), |acc, (&v, &w)| acc + w * v * v)
    }

    /// `H Phi` as a dense `n_h x n_cols` matrix.
    pub fn h_times(&self, phi: &DMatrix<T>) -> DMatrix<T> {
        let mut out = DMatrix::zeros(self.n_h(), phi.ncols());
        for (l, row) in self.data.h_rows.iter().enumerate() {
            for &(r, v) in &row.entries {
                for c in 0..phi.ncols() {
                    out[(l, c)] += v * phi[(r, c)];
                }
            }
        }
        out
    }

    /// Violations of every constraint by `(phi, xi)`. For the nominal kind only
    /// the first block column of `phi` is checked and `xi` is ignored.
    pub fn residual(&self, phi: &DMatrix<T>, xi: Option<&DualCertificate<T>>) -> RobustResidual {
        let layout = *self.mask.layout();
        let n = layout.n;
        let ncols = self.n_active_cols();
        let zab = build_zab(&self.model, layout.horizon);
        let mut ach = zab * phi.columns(0, ncols);
        for c in 0..ncols {
            ach[(c, c)] -= T::one();
        }
        let mut phi_mask = T::zero();
        for r in 0..layout.n_rows() {
            for c in 0..ncols {
                if !self.mask.contains(r, c) {
                    phi_mask = phi_mask.max(phi[(r, c)].abs());
                }
            }
        }
        let hphi = self.h_times(&phi.columns(0, ncols).into_owned());
        let first = hphi.columns(0, n) * &self.x0;
        let mut res = RobustResidual {
            achievability: ach.amax().as_f64(),
            phi_mask: phi_mask.as_f64(),
            ..Default::default()
        };
        let h = self.data.h_rhs();
        match (self.kind, xi) {
            (ProblemKind::Robust, Some(cert)) => {
                let xg = &cert.xi * self.data.dense_g(n);
                let xig = &cert.xi * self.data.g_rhs();
                let ineq = (first + xig - h).max().max(T::zero());
                let eq = (hphi.columns(n, ncols - n) - xg).amax();
                res.inequality = ineq.as_f64();
                res.equality = eq.as_f64();
                res.xi_negativity = cert.negativity().as_f64();
                res.xi_mask = cert.mask_violation(self).as_f64();
            }
            (ProblemKind::Robust, None) => {
                res.inequality = (first - h).max().max(T::zero()).as_f64();
                res.equality = f64::INFINITY;
            }
            (ProblemKind::Nominal, _) => {
                res.inequality = (first - h).max().max(T::zero()).as_f64();
            }
        }
        res
    }
}
