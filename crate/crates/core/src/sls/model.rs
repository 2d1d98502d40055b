use nalgebra::{DMatrix, DMatrixView};

use super::graph::InterconnectionGraph;
use super::SlsError;
use crate::Real;

/// LTI plant `x(t+1) = A x(t) + B u(t) + w(t)` split into `N` subsystems.
///
/// `A` and `B` are kept as dense matrices; block `[A]_{ij}` is the view of
/// rows of subsystem `i` against the state columns of subsystem `j`.
#[derive(Debug, Clone)]
pub struct SystemModel<T: Real> {
    state_dims: Vec<usize>,
    input_dims: Vec<usize>,
    state_offsets: Vec<usize>,
    input_offsets: Vec<usize>,
    a: DMatrix<T>,
    b: DMatrix<T>,
    graph: InterconnectionGraph,
}

fn offsets(dims: &[usize]) -> Vec<usize> {
    let mut acc = 0;
    let mut out = Vec::with_capacity(dims.len() + 1);
    for &d in dims {
        out.push(acc);
        acc += d;
    }
    out.push(acc);
    out
}

impl<T: Real> SystemModel<T> {
    pub fn new(
        state_dims: Vec<usize>,
        input_dims: Vec<usize>,
        a: DMatrix<T>,
        b: DMatrix<T>,
    ) -> Result<Self, SlsError> {
        if state_dims.is_empty() || state_dims.len() != input_dims.len() {
            return Err(SlsError::Dimension(format!(
                "{} state partitions vs {} input partitions",
                state_dims.len(),
                input_dims.len()
            )));
        }
        if state_dims.contains(&0) {
            return Err(SlsError::Dimension("every subsystem needs at least one state".into()));
        }
        let state_offsets = offsets(&state_dims);
        let input_offsets = offsets(&input_dims);
        let n = state_offsets[state_dims.len()];
        let p = input_offsets[input_dims.len()];
        if a.shape() != (n, n) {
            return Err(SlsError::Dimension(format!("A is {:?}, expected ({n}, {n})", a.shape())));
        }
        if b.shape() != (n, p) {
            return Err(SlsError::Dimension(format!("B is {:?}, expected ({n}, {p})", b.shape())));
        }
        let count = state_dims.len();
        let mut edges = Vec::new();
        for i in 0..count {
            for j in 0..count {
                if i == j {
                    continue;
                }
                let a_blk = a.view(
                    (state_offsets[i], state_offsets[j]),
                    (state_dims[i], state_dims[j]),
                );
                let b_blk = b.view(
                    (state_offsets[i], input_offsets[j]),
                    (state_dims[i], input_dims[j]),
                );
                let nonzero = a_blk.iter().chain(b_blk.iter()).any(|v| *v != T::zero());
                if nonzero {
                    // j drives i: disturbances at j propagate to i.
                    edges.push((j, i));
                }
            }
        }
        let graph = InterconnectionGraph::from_edges(count, &edges);
        Ok(Self { state_dims, input_dims, state_offsets, input_offsets, a, b, graph })
    }

    /// Chain of scalar subsystems:
    /// `x_i(t+1) = alpha (x_i + kappa sum_{j = i +- 1} x_j) + beta_i u_i + w_i`.
    pub fn chain(alpha: T, kappa: T, beta: &[T]) -> Result<Self, SlsError> {
        let n = beta.len();
        if n == 0 {
            return Err(SlsError::Dimension("chain needs at least one subsystem".into()));
        }
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = alpha;
            if i > 0 {
                a[(i, i - 1)] = alpha * kappa;
            }
            if i + 1 < n {
                a[(i, i + 1)] = alpha * kappa;
            }
        }
        let b = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(beta));
        Self::new(vec![1; n], vec![1; n], a, b)
    }

    pub fn n_subsystems(&self) -> usize {
        self.state_dims.len()
    }

    pub fn n_states(&self) -> usize {
        self.state_offsets[self.n_subsystems()]
    }

    pub fn n_inputs(&self) -> usize {
        self.input_offsets[self.n_subsystems()]
    }

    pub fn state_dims(&self) -> &[usize] {
        &self.state_dims
    }

    pub fn input_dims(&self) -> &[usize] {
        &self.input_dims
    }

    pub fn state_range(&self, i: usize) -> std::ops::Range<usize> {
        self.state_offsets[i]..self.state_offsets[i + 1]
    }

    pub fn input_range(&self, i: usize) -> std::ops::Range<usize> {
        self.input_offsets[i]..self.input_offsets[i + 1]
    }

    /// Subsystem owning global state coordinate `s`.
    pub fn state_owner(&self, s: usize) -> usize {
        self.state_offsets.partition_point(|&o| o <= s) - 1
    }

    /// Subsystem owning global input coordinate `q`.
    pub fn input_owner(&self, q: usize) -> usize {
        // zero-width input partitions share an offset with their successor
        self.input_offsets.partition_point(|&o| o <= q) - 1
    }

    pub fn a(&self) -> &DMatrix<T> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<T> {
        &self.b
    }

    pub fn a_block(&self, i: usize, j: usize) -> DMatrixView<'_, T> {
        self.a.view((self.state_offsets[i], self.state_offsets[j]), (self.state_dims[i], self.state_dims[j]))
    }

    pub fn b_block(&self, i: usize, j: usize) -> DMatrixView<'_, T> {
        self.b.view((self.state_offsets[i], self.input_offsets[j]), (self.state_dims[i], self.input_dims[j]))
    }

    pub fn graph(&self) -> &InterconnectionGraph {
        &self.graph
    }

    /// One step of the plant.
    pub fn step(
        &self,
        x: &nalgebra::DVector<T>,
        u: &nalgebra::DVector<T>,
        w: &nalgebra::DVector<T>,
    ) -> nalgebra::DVector<T> {
        &self.a * x + &self.b * u + w
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_graph_is_symmetric() {
        let m = SystemModel::<f64>::chain(0.8, 2.0, &[1.0, 0.0, 1.0, 1.0]).unwrap();
        let g = m.graph();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(g.distance(i, j), g.distance(j, i));
            }
        }
        assert_eq!(g.distance(0, 3), Some(3));
        assert_eq!(m.a()[(1, 0)], 0.8 * 2.0);
    }

    #[test]
    fn block_dimension_mismatch_is_rejected() {
        let a = DMatrix::<f64>::zeros(3, 3);
        let b = DMatrix::<f64>::zeros(3, 1);
        let err = SystemModel::new(vec![1, 2], vec![1, 1], a, b).unwrap_err();
        assert!(matches!(err, SlsError::Dimension(_)));
    }

    #[test]
    fn edges_follow_nonzero_blocks() {
        // 0 drives 1 through A, 2 drives 0 through B; nothing else.
        let mut a = DMatrix::<f64>::zeros(3, 3);
        a[(1, 0)] = 0.5;
        let mut b = DMatrix::<f64>::zeros(3, 3);
        b[(0, 2)] = 1.0;
        let m = SystemModel::new(vec![1; 3], vec![1; 3], a, b).unwrap();
        assert_eq!(m.graph().distance(0, 1), Some(1));
        assert_eq!(m.graph().distance(1, 0), None);
        assert_eq!(m.graph().distance(2, 0), Some(1));
        assert_eq!(m.graph().distance(2, 1), Some(2));
    }

    #[test]
    fn owners() {
        let a = DMatrix::<f64>::zeros(4, 4);
        let b = DMatrix::<f64>::zeros(4, 2);
        let m = SystemModel::new(vec![1, 2, 1], vec![1, 0, 1], a, b).unwrap();
        assert_eq!(m.state_owner(0), 0);
        assert_eq!(m.state_owner(2), 1);
        assert_eq!(m.state_owner(3), 2);
        assert_eq!(m.input_owner(1), 2);
    }
}
