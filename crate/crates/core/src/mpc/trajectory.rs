use nalgebra::DVector;
use serde::Serialize;

use crate::admm::IterationRecord;
use crate::constraints::{BoxBounds, CostWeights};
use crate::sls::SystemModel;
use crate::Real;

/// Solver diagnostics of one receding-horizon step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepStats {
    pub iterations: usize,
    pub converged: bool,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// wall time of the whole solve
    pub solve_seconds: f64,
    /// distributed runs only
    pub network: Option<NetworkStats>,
}

/// Per-solve timing and traffic of a distributed run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NetworkStats {
    /// compute time per node, averaged over nodes
    pub mean_node_seconds: f64,
    pub max_node_seconds: f64,
    /// sum over iterations of the slowest node
    pub critical_path_seconds: f64,
    pub messages: usize,
    /// messages sent per node per iteration, averaged over nodes
    pub messages_per_node_iteration: f64,
    pub max_hops: usize,
    pub bytes: usize,
}

/// Closed-loop record: `states` has one more entry than `inputs` and
/// `disturbances`.
#[derive(Debug, Clone)]
pub struct Trajectory<T: Real> {
    pub states: Vec<DVector<T>>,
    pub inputs: Vec<DVector<T>>,
    pub disturbances: Vec<DVector<T>>,
    pub stats: Vec<StepStats>,
    /// residual history of every solve
    pub traces: Vec<Vec<IterationRecord>>,
    pub cost: T,
}

impl<T: Real> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Largest `|x(t+1) - A x(t) - B u(t) - w(t)|`.
    pub fn rollout_error(&self, model: &SystemModel<T>) -> T {
        (0..self.len()).fold(T::zero(), |acc, t| {
            let next = model.step(&self.states[t], &self.inputs[t], &self.disturbances[t]);
            acc.max((next - &self.states[t + 1]).amax())
        })
    }

    /// Largest amount by which state `s` leaves `[x_min, x_max]`, over the
    /// given coordinates and every recorded time.
    pub fn state_violation(&self, bounds: &BoxBounds<T>, coords: &[usize]) -> T {
        let mut worst = T::zero();
        for x in &self.states {
            for &s in coords {
                worst = worst.max(x[s] - bounds.x_max[s]).max(bounds.x_min[s] - x[s]);
            }
        }
        worst
    }

    /// Per-subsystem stage costs; they add up to [`evaluate_cost`].
    pub fn subsystem_costs(&self, model: &SystemModel<T>, weights: &CostWeights<T>) -> Vec<T> {
        let mut out = vec![T::zero(); model.n_subsystems()];
        for t in 0..self.len() {
            for (i, c) in out.iter_mut().enumerate() {
                for s in model.state_range(i) {
                    *c += weights.q[s] * self.states[t][s] * self.states[t][s];
                }
                for q in model.input_range(i) {
                    *c += weights.r[q] * self.inputs[t][q] * self.inputs[t][q];
                }
            }
        }
        out
    }
}

/// `sum_{t < T_sim} x(t)' Q x(t) + u(t)' R u(t)`.
pub fn evaluate_cost<T: Real>(traj: &Trajectory<T>, weights: &CostWeights<T>) -> T {
    let quad = |v: &DVector<T>, w: &[T]| v.iter().zip(w).fold(T::zero(), |acc, (&x, &k)| acc + k * x * x);
    (0..traj.len()).fold(T::zero(), |acc, t| acc + quad(&traj.states[t], &weights.q) + quad(&traj.inputs[t], &weights.r))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj(states: Vec<Vec<f64>>, inputs: Vec<Vec<f64>>) -> Trajectory<f64> {
        let n = inputs.len();
        Trajectory {
            states: states.into_iter().map(DVector::from_vec).collect(),
            disturbances: vec![DVector::zeros(inputs[0].len()); n],
            inputs: inputs.into_iter().map(DVector::from_vec).collect(),
            stats: vec![],
            traces: vec![],
            cost: 0.0,
        }
    }

    #[test]
    fn zero_trajectory_costs_nothing() {
        let t = traj(vec![vec![0.0; 3]; 3], vec![vec![0.0; 3]; 2]);
        assert_eq!(evaluate_cost(&t, &CostWeights::identity(3, 3)), 0.0);
    }

    #[test]
    fn unit_state_costs_n() {
        let t = traj(vec![vec![1.0; 4], vec![0.0; 4]], vec![vec![0.0; 4]]);
        assert_eq!(evaluate_cost(&t, &CostWeights::identity(4, 4)), 4.0);
    }

    #[test]
    fn subsystem_costs_add_up() {
        let m = SystemModel::chain(0.8, 2.0, &[1.0, 0.0, 1.0]).unwrap();
        let t = traj(vec![vec![1.0, -2.0, 0.5], vec![0.3, 0.1, -0.2], vec![0.0; 3]], vec![vec![0.2, 0.0, 1.0], vec![-1.0, 0.0, 0.4]]);
        let w = CostWeights { q: vec![1.0, 2.0, 3.0], r: vec![0.5, 1.0, 2.0] };
        let parts: f64 = t.subsystem_costs(&m, &w).iter().sum();
        assert!((parts - evaluate_cost(&t, &w)).abs() < 1e-12);
    }
}
