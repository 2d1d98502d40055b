#![allow(dead_code)]

use nalgebra::DVector;
use rdlmpc::constraints::{
    assemble_robust_problem, build_box_constraints, build_disturbance_polytope, BoxBounds, BoxOptions, CostWeights,
    ProblemKind, RobustProblem,
};
use rdlmpc::sls::{build_locality_mask, SystemModel};

pub struct Instance {
    pub beta: Vec<f64>,
    pub alpha: f64,
    pub kappa: f64,
    pub radius: usize,
    pub horizon: usize,
    pub sigma: f64,
    pub x_bound: Vec<f64>,
    pub u_bound: Vec<f64>,
}

impl Instance {
    pub fn chain(n: usize, radius: usize, horizon: usize, sigma: f64) -> Self {
        Self {
            beta: vec![1.0; n],
            alpha: 0.8,
            kappa: 0.5,
            radius,
            horizon,
            sigma,
            x_bound: vec![2.0; n],
            u_bound: vec![2.0; n],
        }
    }

    pub fn model(&self) -> SystemModel<f64> {
        SystemModel::chain(self.alpha, self.kappa, &self.beta).unwrap()
    }

    pub fn problem(&self, x0: &[f64], kind: ProblemKind) -> RobustProblem<f64> {
        let model = self.model();
        let n = model.n_states();
        let mask = build_locality_mask(&model, self.radius, self.horizon);
        let bounds = BoxBounds::symmetric(&self.x_bound, &self.u_bound);
        let data = build_box_constraints(&model, &[bounds], self.horizon, BoxOptions::default())
            .unwrap()
            .with_disturbance(build_disturbance_polytope(&model, self.sigma, self.horizon).unwrap());
        assemble_robust_problem(&model, &mask, &data, &DVector::from_column_slice(x0), &CostWeights::identity(n, n), kind)
            .unwrap()
    }
}

/// Worst `H Phi [x0; w] - h` over every vertex of the disturbance box.
pub fn vertex_excess(p: &RobustProblem<f64>, phi: &nalgebra::DMatrix<f64>, sigma: f64) -> f64 {
    let layout = *p.mask.layout();
    let h = p.data.dense_h(&layout);
    let rhs = p.data.h_rhs();
    let hphi = &h * phi;
    let n = layout.n;
    let dims = n * layout.horizon;
    let mut worst = f64::NEG_INFINITY;
    for signs in 0u64..(1 << dims) {
        let mut w = DVector::zeros(layout.n_cols());
        w.rows_mut(0, n).copy_from(&p.x0);
        for k in 0..dims {
            w[n + k] = if signs >> k & 1 == 1 { sigma } else { -sigma };
        }
        worst = worst.max((&hphi * &w - &rhs).max());
    }
    worst
}
