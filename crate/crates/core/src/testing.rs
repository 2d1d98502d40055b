use nalgebra::DVector;

use crate::constraints::{
    assemble_robust_problem, build_box_constraints, build_disturbance_polytope, BoxBounds, BoxOptions, CostWeights,
    ProblemKind, RobustProblem,
};
use crate::sls::{build_locality_mask, SystemModel};
use crate::Real;

/// Chain problem with `|x_i|, |u_i| <= bound` and `|w_i| <= sigma`.
pub(crate) struct Chain<T: Real> {
    pub alpha: T,
    pub kappa: T,
    pub beta: Vec<T>,
    pub radius: usize,
    pub horizon: usize,
    pub sigma: T,
    pub x_bound: T,
    pub u_bound: T,
}

impl<T: Real> Chain<T> {
    pub fn new(n: usize, radius: usize, horizon: usize) -> Self {
        Self {
            alpha: T::lit(0.8),
            kappa: T::lit(0.5),
            beta: vec![T::one(); n],
            radius,
            horizon,
            sigma: T::lit(0.2),
            x_bound: T::lit(2.0),
            u_bound: T::lit(2.0),
        }
    }

    pub fn model(&self) -> SystemModel<T> {
        SystemModel::chain(self.alpha, self.kappa, &self.beta).unwrap()
    }

    pub fn problem(&self, x0: &[f64], kind: ProblemKind) -> RobustProblem<T> {
        let model = self.model();
        let n = model.n_states();
        let mask = build_locality_mask(&model, self.radius, self.horizon);
        let bounds = BoxBounds::symmetric(&vec![self.x_bound; n], &vec![self.u_bound; n]);
        let data = build_box_constraints(&model, &[bounds], self.horizon, BoxOptions::default())
            .unwrap()
            .with_disturbance(build_disturbance_polytope(&model, self.sigma, self.horizon).unwrap());
        let x0 = DVector::from_iterator(n, x0.iter().map(|&v| T::lit(v)));
        assemble_robust_problem(&model, &mask, &data, &x0, &CostWeights::identity(n, n), kind).unwrap()
    }
}
