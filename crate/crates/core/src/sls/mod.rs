//! Finite-horizon system level synthesis: block operators, achievability,
//! locality sets and masks, and per-subsystem index partitions.

mod controller;
mod graph;
mod mask;
mod model;
mod operators;
mod partition;
mod response;

pub use controller::{controller_step, ControllerState};
pub use graph::InterconnectionGraph;
pub use mask::{build_locality_mask, LocalityMask};
pub use model::SystemModel;
pub use operators::{build_block_downshift, build_zab, zab_row, ColInfo, ResponseLayout, RowInfo, RowKind};
pub use partition::{partition_indices, IndexPartition};
pub use response::{HorizonSignal, SystemResponse};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SlsError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("subsystem {0} does not exist")]
    InvalidSubsystem(usize),
    #[error("controller horizon exhausted at t = {time} (horizon {horizon})")]
    HorizonExhausted { time: usize, horizon: usize },
}

/// `d`-incoming and `d`-outgoing sets of subsystem `i` in the model's graph.
pub fn d_local_sets<T: crate::Real>(
    model: &SystemModel<T>,
    i: usize,
    d: usize,
) -> Result<(Vec<usize>, Vec<usize>), SlsError> {
    model.graph().d_local_sets(i, d)
}
