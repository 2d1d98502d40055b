use super::mask::LocalityMask;
use super::model::SystemModel;
use super::operators::RowKind;
use crate::Real;

/// Row and column ownership of the stacked response, and the reduced index
/// sets the locality mask leaves nonzero.
#[derive(Debug, Clone)]
pub struct IndexPartition {
    /// rows of `[Phi_x; Phi_u]` owned by each subsystem
    pub row_sets: Vec<Vec<usize>>,
    /// columns owned by each subsystem
    pub col_sets: Vec<Vec<usize>>,
    pub nonzero_cols_per_row: Vec<Vec<usize>>,
    pub nonzero_rows_per_col: Vec<Vec<usize>>,
    row_owner: Vec<usize>,
    col_owner: Vec<usize>,
}

pub fn partition_indices<T: Real>(model: &SystemModel<T>, mask: &LocalityMask) -> IndexPartition {
    let layout = *mask.layout();
    let count = model.n_subsystems();
    let mut row_sets = vec![Vec::new(); count];
    let mut col_sets = vec![Vec::new(); count];
    let mut row_owner = Vec::with_capacity(layout.n_rows());
    let mut col_owner = Vec::with_capacity(layout.n_cols());
    for r in 0..layout.n_rows() {
        let info = layout.row_info(r);
        let owner = match info.kind {
            RowKind::State => model.state_owner(info.coord),
            RowKind::Input => model.input_owner(info.coord),
        };
        row_sets[owner].push(r);
        row_owner.push(owner);
    }
    for c in 0..layout.n_cols() {
        let owner = model.state_owner(layout.col_info(c).coord);
        col_sets[owner].push(c);
        col_owner.push(owner);
    }
    let mut nonzero_cols_per_row = vec![Vec::new(); layout.n_rows()];
    let mut nonzero_rows_per_col = vec![Vec::new(); layout.n_cols()];
    for (r, cols) in nonzero_cols_per_row.iter_mut().enumerate() {
        for c in 0..layout.n_cols() {
            if mask.contains(r, c) {
                cols.push(c);
                nonzero_rows_per_col[c].push(r);
            }
        }
    }
    IndexPartition { row_sets, col_sets, nonzero_cols_per_row, nonzero_rows_per_col, row_owner, col_owner }
}

impl IndexPartition {
    pub fn row_owner(&self, r: usize) -> usize {
        self.row_owner[r]
    }

    pub fn col_owner(&self, c: usize) -> usize {
        self.col_owner[c]
    }

    pub fn n_subsystems(&self) -> usize {
        self.row_sets.len()
    }
}
