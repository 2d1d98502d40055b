use nalgebra::{DMatrix, DVector};

use super::reduce::ReductionTree;
use super::AdmmError;
use crate::constraints::{ProblemKind, RobustProblem};
use crate::kkt::CachedLsq;
use crate::sls::{partition_indices, zab_row, ResponseLayout, RowKind};
use crate::Real;

/// A response row as seen by its owner.
#[derive(Debug, Clone)]
pub struct RowSpec<T: Real> {
    pub row: usize,
    pub weight: T,
    /// active columns of the row's support, ascending; the first `n_first`
    /// belong to the initial-condition block
    pub cols: Vec<usize>,
    pub n_first: usize,
    /// `(column owner, column index within owner, position within column)`
    pub col_refs: Vec<(usize, usize, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxSide<T: Real> {
    /// index into the row's `xi`
    pub xi: usize,
    /// magnitude of the `G` coefficient
    pub coef: T,
    pub rhs: T,
}

/// The (at most two) single-entry `G` rows acting on one column, split by
/// the sign of their coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxPair<T: Real> {
    pub plus: Option<BoxSide<T>>,
    pub minus: Option<BoxSide<T>>,
}

/// A row of `H` with everything its owner needs for the local QP.
#[derive(Debug, Clone)]
pub struct HRowSpec<T: Real> {
    pub index: usize,
    pub kind: RowKind,
    pub rhs: T,
    pub first_cols: Vec<usize>,
    pub rest_cols: Vec<usize>,
    /// per position in `first_cols ++ rest_cols`: `(owned row index, position
    /// in that row's cols, H coefficient)`
    pub terms: Vec<Vec<(usize, usize, T)>>,
    /// global `G` rows `Xi` may pair with this row
    pub xi_rows: Vec<usize>,
    pub xi_rhs: Vec<T>,
    /// per `xi` entry: `(position in rest_cols, G coefficient)`
    pub xi_entries: Vec<Vec<(usize, T)>>,
    /// present when `G` restricted to this row is a box
    pub pairs: Option<Vec<BoxPair<T>>>,
}

impl<T: Real> HRowSpec<T> {
    pub fn width(&self) -> usize {
        self.first_cols.len() + self.rest_cols.len()
    }
}

/// Where a column owner reads one target entry from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetSource {
    Phi { owner: usize, row: usize, pos: usize },
    Omega { owner: usize, hrow: usize, pos: usize },
    XiG { owner: usize, hrow: usize, pos: usize },
}

impl TargetSource {
    pub fn owner(&self) -> usize {
        match *self {
            Self::Phi { owner, .. } | Self::Omega { owner, .. } | Self::XiG { owner, .. } => owner,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ColSpec<T: Real> {
    pub col: usize,
    pub block: usize,
    /// support rows, ascending
    pub rows: Vec<usize>,
    pub sources: Vec<TargetSource>,
    pub lsq: CachedLsq<T>,
}

#[derive(Debug, Clone)]
pub struct SubsystemLayout<T: Real> {
    pub id: usize,
    pub rows: Vec<RowSpec<T>>,
    pub h_rows: Vec<HRowSpec<T>>,
    pub cols: Vec<ColSpec<T>>,
    /// number of entries of the consensus pair owned here
    pub primal_count: usize,
    /// number of entries of `Psi` in owned rows
    pub dual_count: usize,
}

/// Static bookkeeping of the splitting: which subsystem owns which rows,
/// `H` rows and columns, and the cached closed forms of the column updates.
/// Depends on the model, mask and constraints but not on `x0`.
#[derive(Debug, Clone)]
pub struct AdmmLayout<T: Real> {
    pub kind: ProblemKind,
    pub response: ResponseLayout,
    pub n_active_cols: usize,
    pub n_h: usize,
    pub n_g: usize,
    pub subsystems: Vec<SubsystemLayout<T>>,
    /// response row -> `(owner, index within owner)`
    pub row_loc: Vec<Option<(usize, usize)>>,
    pub h_loc: Vec<(usize, usize)>,
    pub col_loc: Vec<Option<(usize, usize)>>,
    pub tree: ReductionTree,
}

fn box_pairs<T: Real>(n_rest: usize, rhs: &[T], entries: &[Vec<(usize, T)>]) -> Option<Vec<BoxPair<T>>> {
    let mut pairs = vec![BoxPair { plus: None, minus: None }; n_rest];
    for (k, e) in entries.iter().enumerate() {
        if e.len() != 1 || rhs[k] < T::zero() {
            return None;
        }
        let (pos, coef) = e[0];
        let side = BoxSide { xi: k, coef: coef.abs(), rhs: rhs[k] };
        let slot = if coef > T::zero() {
            &mut pairs[pos].plus
        } else if coef < T::zero() {
            &mut pairs[pos].minus
        } else {
            return None;
        };
        if slot.is_some() {
            return None;
        }
        *slot = Some(side);
    }
    Some(pairs)
}

impl<T: Real> AdmmLayout<T> {
    pub fn new(problem: &RobustProblem<T>) -> Result<Self, AdmmError> {
        let model = &problem.model;
        let mask = &problem.mask;
        let layout = *mask.layout();
        let n = layout.n;
        let na = problem.n_active_cols();
        let count = model.n_subsystems();
        let part = partition_indices(model, mask);

        let col_rows: Vec<Vec<usize>> = (0..na).map(|c| part.nonzero_rows_per_col[c].clone()).collect();
        let mut col_loc = vec![None; layout.n_cols()];
        let mut col_counts = vec![0usize; count];
        for c in 0..na {
            let o = part.col_owner(c);
            col_loc[c] = Some((o, col_counts[o]));
            col_counts[o] += 1;
        }

        let mut subsystems: Vec<SubsystemLayout<T>> = (0..count)
            .map(|id| SubsystemLayout { id, rows: vec![], h_rows: vec![], cols: vec![], primal_count: 0, dual_count: 0 })
            .collect();
        let mut row_loc = vec![None; layout.n_rows()];
        for r in 0..layout.n_rows() {
            let cols: Vec<usize> = part.nonzero_cols_per_row[r].iter().copied().filter(|&c| c < na).collect();
            if cols.is_empty() {
                continue;
            }
            let o = part.row_owner(r);
            let n_first = cols.iter().take_while(|&&c| c < n).count();
            let col_refs = cols
                .iter()
                .map(|&c| {
                    let (co, cl) = col_loc[c].expect("active column");
                    let pos = col_rows[c].binary_search(&r).expect("mask is symmetric in rows/cols");
                    (co, cl, pos)
                })
                .collect();
            row_loc[r] = Some((o, subsystems[o].rows.len()));
            subsystems[o].rows.push(RowSpec { row: r, weight: problem.row_weight[r], cols, n_first, col_refs });
        }

        let robust = problem.kind == ProblemKind::Robust;
        let g_rows = &problem.data.g_rows;
        let mut h_loc = Vec::with_capacity(problem.n_h());
        for (l, hrow) in problem.data.h_rows.iter().enumerate() {
            let o = hrow.owner;
            let mut rest: Vec<usize> = problem.h_cols[l].iter().copied().filter(|&c| c >= n && c < na).collect();
            let first: Vec<usize> = problem.h_cols[l].iter().copied().filter(|&c| c < n).collect();
            let xi_rows: Vec<usize> = if robust { problem.xi_support[l].clone() } else { vec![] };
            for &m in &xi_rows {
                for &(s, _) in &g_rows[m].entries {
                    rest.push(layout.col(g_rows[m].block, s));
                }
            }
            rest.sort_unstable();
            rest.dedup();
            let mut terms = Vec::with_capacity(first.len() + rest.len());
            for &c in first.iter().chain(rest.iter()) {
                let mut list = Vec::new();
                for &(r, coef) in &hrow.entries {
                    let Some((ro, rl)) = row_loc[r] else { continue };
                    if ro != o {
                        return Err(AdmmError::Structure(format!("H row {l} touches row {r} owned by {ro}")));
                    }
                    if let Ok(pos) = subsystems[o].rows[rl].cols.binary_search(&c) {
                        list.push((rl, pos, coef));
                    }
                }
                terms.push(list);
            }
            let xi_rhs: Vec<T> = xi_rows.iter().map(|&m| g_rows[m].rhs).collect();
            let xi_entries: Vec<Vec<(usize, T)>> = xi_rows
                .iter()
                .map(|&m| {
                    g_rows[m]
                        .entries
                        .iter()
                        .map(|&(s, coef)| (rest.binary_search(&layout.col(g_rows[m].block, s)).expect("added above"), coef))
                        .collect()
                })
                .collect();
            let pairs = box_pairs(rest.len(), &xi_rhs, &xi_entries);
            h_loc.push((o, subsystems[o].h_rows.len()));
            subsystems[o].h_rows.push(HRowSpec {
                index: l,
                kind: hrow.kind,
                rhs: hrow.rhs,
                first_cols: first,
                rest_cols: rest,
                terms,
                xi_rows,
                xi_rhs,
                xi_entries,
                pairs,
            });
        }

        // target sources per column, in global row order then H row order
        let mut sources: Vec<Vec<TargetSource>> = vec![Vec::new(); na];
        for c in 0..n.min(na) {
            for &r in &col_rows[c] {
                let (o, rl) = row_loc[r].expect("support rows are owned");
                let pos = subsystems[o].rows[rl].cols.binary_search(&c).expect("row support");
                sources[c].push(TargetSource::Phi { owner: o, row: rl, pos });
            }
        }
        for &(o, hl) in &h_loc {
            let spec = &subsystems[o].h_rows[hl];
            for (pos, &c) in spec.first_cols.iter().enumerate() {
                sources[c].push(TargetSource::Omega { owner: o, hrow: hl, pos });
            }
            for (pos, &c) in spec.rest_cols.iter().enumerate() {
                sources[c].push(TargetSource::XiG { owner: o, hrow: hl, pos });
            }
        }

        let zab: Vec<Vec<(usize, T)>> = (0..layout.n_state_rows()).map(|i| zab_row(model, &layout, i)).collect();
        for c in 0..na {
            let rows = &col_rows[c];
            let idx = |r: usize| rows.binary_search(&r).ok();
            let nz = rows.len();
            let src = std::mem::take(&mut sources[c]);
            let mut m = DMatrix::zeros(src.len(), nz);
            for (k, s) in src.iter().enumerate() {
                match *s {
                    TargetSource::Phi { owner, row, .. } => {
                        let r = subsystems[owner].rows[row].row;
                        m[(k, idx(r).expect("support row"))] = T::one();
                    }
                    TargetSource::Omega { owner, hrow, .. } | TargetSource::XiG { owner, hrow, .. } => {
                        let l = subsystems[owner].h_rows[hrow].index;
                        for &(r, coef) in &problem.data.h_rows[l].entries {
                            if let Some(j) = idx(r) {
                                m[(k, j)] += coef;
                            }
                        }
                    }
                }
            }
            let (co, _) = col_loc[c].expect("active column");
            let mut p_rows = Vec::new();
            let mut q = Vec::new();
            for (i, entries) in zab.iter().enumerate() {
                let kept: Vec<(usize, T)> = entries.iter().filter_map(|&(r, v)| idx(r).map(|j| (j, v))).collect();
                let target = if i == c { T::one() } else { T::zero() };
                if kept.is_empty() {
                    if target != T::zero() {
                        return Err(AdmmError::NotLocalizable { subsystem: co, col: c });
                    }
                    continue;
                }
                p_rows.push(kept);
                q.push(target);
            }
            let mut p = DMatrix::zeros(p_rows.len(), nz);
            for (k, kept) in p_rows.iter().enumerate() {
                for &(j, v) in kept {
                    p[(k, j)] += v;
                }
            }
            let lsq = CachedLsq::new(&m, &p, &DVector::from_vec(q))
                .map_err(|_| AdmmError::NotLocalizable { subsystem: co, col: c })?;
            subsystems[co].cols.push(ColSpec {
                col: c,
                block: c / n,
                rows: rows.clone(),
                sources: src,
                lsq,
            });
        }

        for sub in &mut subsystems {
            sub.primal_count = sub.rows.iter().map(|r| r.n_first).sum::<usize>()
                + sub.h_rows.iter().map(HRowSpec::width).sum::<usize>();
            sub.dual_count = sub.rows.iter().map(|r| r.cols.len()).sum();
        }

        Ok(Self {
            kind: problem.kind,
            response: layout,
            n_active_cols: na,
            n_h: problem.n_h(),
            n_g: problem.n_g(),
            subsystems,
            row_loc,
            h_loc,
            col_loc,
            tree: ReductionTree::new(model.graph()),
        })
    }

    pub fn n_subsystems(&self) -> usize {
        self.subsystems.len()
    }
}
