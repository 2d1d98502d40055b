use nalgebra::DMatrix;

use super::model::SystemModel;
use super::operators::{ResponseLayout, RowKind};
use crate::Real;

/// Support pattern of the `d`-locality subspace over `[Phi_x; Phi_u]`.
///
/// An entry `(row, col)` is free when
/// * the row's time is not before the column's disturbance block (causality),
/// * the row's subsystem lies within `d` hops downstream of the column's
///   subsystem (`d + 1` for input rows),
/// * the row is not the unused terminal input `u_T`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalityMask {
    layout: ResponseLayout,
    radius: usize,
    support: Vec<bool>,
}

pub fn build_locality_mask<T: Real>(model: &SystemModel<T>, radius: usize, horizon: usize) -> LocalityMask {
    let layout = ResponseLayout::for_model(model, horizon);
    let rows = layout.n_rows();
    let cols = layout.n_cols();
    let graph = model.graph();
    let col_owner: Vec<(usize, usize)> = (0..cols)
        .map(|c| {
            let info = layout.col_info(c);
            (info.block, model.state_owner(info.coord))
        })
        .collect();
    let mut support = vec![false; rows * cols];
    for r in 0..rows {
        let info = layout.row_info(r);
        let (owner, reach) = match info.kind {
            RowKind::State => (model.state_owner(info.coord), radius),
            RowKind::Input => {
                if info.time == horizon {
                    continue;
                }
                (model.input_owner(info.coord), radius + 1)
            }
        };
        for (c, &(block, src)) in col_owner.iter().enumerate() {
            if block <= info.time && graph.within(src, owner, reach) {
                support[r * cols + c] = true;
            }
        }
    }
    LocalityMask { layout, radius, support }
}

impl LocalityMask {
    pub fn layout(&self) -> &ResponseLayout {
        &self.layout
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn horizon(&self) -> usize {
        self.layout.horizon
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        self.support[row * self.layout.n_cols() + col]
    }

    pub fn nnz(&self) -> usize {
        self.support.iter().filter(|&&s| s).count()
    }

    pub fn row_support(&self, row: usize) -> Vec<usize> {
        let cols = self.layout.n_cols();
        (0..cols).filter(|&c| self.support[row * cols + c]).collect()
    }

    pub fn col_support(&self, col: usize) -> Vec<usize> {
        (0..self.layout.n_rows()).filter(|&r| self.contains(r, col)).collect()
    }

    /// `true` when every entry of `self` is also in `other`.
    pub fn is_subset_of(&self, other: &LocalityMask) -> bool {
        self.layout == other.layout && self.support.iter().zip(&other.support).all(|(a, b)| !a || *b)
    }

    /// Largest absolute entry of `phi` outside the support.
    pub fn violation<T: Real>(&self, phi: &DMatrix<T>) -> T {
        let cols = self.layout.n_cols();
        let mut worst = T::zero();
        for r in 0..phi.nrows() {
            for c in 0..cols {
                if !self.support[r * cols + c] {
                    worst = worst.max(phi[(r, c)].abs());
                }
            }
        }
        worst
    }
}
