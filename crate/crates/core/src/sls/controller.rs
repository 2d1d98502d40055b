use nalgebra::DVector;

use super::response::SystemResponse;
use super::SlsError;
use crate::Real;

/// Internal state of the response-based controller: the reconstructed
/// disturbances `w_hat_0 = x_0, w_hat_1, ...` seen so far.
#[derive(Debug, Clone, Default)]
pub struct ControllerState<T: Real> {
    w_hat: Vec<DVector<T>>,
}

impl<T: Real> ControllerState<T> {
    pub fn new() -> Self {
        Self { w_hat: Vec::new() }
    }

    /// Next time index to be processed.
    pub fn time(&self) -> usize {
        self.w_hat.len()
    }

    pub fn reconstructed(&self) -> &[DVector<T>] {
        &self.w_hat
    }
}

/// One step of `u = Phi_u w_hat`, `w_hat = x - x_hat` where `x_hat` is the
/// state predicted from past reconstructed disturbances.
///
/// Feeding measurements of `x_0, x_1, ...` in order returns `u_0, u_1, ...`.
pub fn controller_step<T: Real>(
    phi: &SystemResponse<T>,
    x: &DVector<T>,
    state: &mut ControllerState<T>,
) -> Result<DVector<T>, SlsError> {
    let t = state.time();
    let horizon = phi.horizon();
    if t >= horizon {
        return Err(SlsError::HorizonExhausted { time: t, horizon });
    }
    let layout = phi.layout();
    if x.len() != layout.n {
        return Err(SlsError::Dimension(format!("measured state has {} entries, expected {}", x.len(), layout.n)));
    }
    let mut w_hat = x.clone();
    for (k, wk) in state.w_hat.iter().enumerate() {
        w_hat -= phi.phi_x_block(t, k) * wk;
    }
    state.w_hat.push(w_hat);
    let mut u = DVector::zeros(layout.p);
    for (k, wk) in state.w_hat.iter().enumerate() {
        u += phi.phi_u_block(t, k) * wk;
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::sls::{HorizonSignal, ResponseLayout, SystemModel};

    fn random_causal_inputs(layout: &ResponseLayout, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let ns = layout.n_state_rows();
        let mut phi_u = DMatrix::zeros(layout.n_rows() - ns, layout.n_cols());
        for r in 0..phi_u.nrows() {
            let t = layout.row_info(ns + r).time;
            if t == layout.horizon {
                continue;
            }
            for c in 0..layout.n_cols() {
                if layout.col_info(c).block <= t {
                    phi_u[(r, c)] = rng.random_range(-1.0..1.0);
                }
            }
        }
        phi_u
    }

    #[test]
    fn closed_loop_rollout_reproduces_response() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = SystemModel::<f64>::chain(0.8, 2.0, &[1.0, 0.0, 1.0]).unwrap();
        let horizon = 4;
        let layout = ResponseLayout::for_model(&m, horizon);
        let phi = SystemResponse::from_input_map(&m, horizon, &random_causal_inputs(&layout, &mut rng)).unwrap();
        assert!(phi.achievability_residual(&m) < 1e-12);
        for _ in 0..5 {
            let x0 = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
            let w: Vec<DVector<f64>> =
                (0..horizon).map(|_| DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0))).collect();
            let mut state = ControllerState::new();
            let mut xs = vec![x0.clone()];
            let mut us = Vec::new();
            let mut x = x0.clone();
            for wt in &w {
                let u = controller_step(&phi, &x, &mut state).unwrap();
                x = m.step(&x, &u, wt);
                xs.push(x.clone());
                us.push(u);
            }
            let (px, pu) = phi.apply(&HorizonSignal::disturbance(&x0, &w).unwrap());
            for t in 0..=horizon {
                assert!((px.rows(3 * t, 3) - &xs[t]).amax() < 1e-10);
            }
            for t in 0..horizon {
                assert!((pu.rows(3 * t, 3) - &us[t]).amax() < 1e-10);
            }
        }
    }

    #[test]
    fn zero_disturbance_gives_open_loop_plan() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = SystemModel::<f64>::chain(0.8, 2.0, &[1.0, 1.0]).unwrap();
        let layout = ResponseLayout::for_model(&m, 3);
        let phi = SystemResponse::from_input_map(&m, 3, &random_causal_inputs(&layout, &mut rng)).unwrap();
        let x0 = DVector::from_vec(vec![0.5, -1.0]);
        let mut state = ControllerState::new();
        let mut x = x0.clone();
        for t in 0..3 {
            let u = controller_step(&phi, &x, &mut state).unwrap();
            let plan = phi.phi_u_block(t, 0) * &x0;
            assert!((&u - plan).amax() < 1e-12);
            x = m.step(&x, &u, &DVector::zeros(2));
        }
        assert!(matches!(
            controller_step(&phi, &x, &mut state),
            Err(SlsError::HorizonExhausted { time: 3, horizon: 3 })
        ));
    }

    #[test]
    fn identity_response_applies_no_input() {
        let m = SystemModel::<f64>::new(vec![1, 1], vec![1, 1], DMatrix::zeros(2, 2), DMatrix::zeros(2, 2)).unwrap();
        let layout = ResponseLayout::for_model(&m, 2);
        let phi = SystemResponse::from_input_map(&m, 2, &DMatrix::zeros(layout.n_rows() - 6, 6)).unwrap();
        let mut state = ControllerState::new();
        for _ in 0..2 {
            let u = controller_step(&phi, &DVector::from_vec(vec![1.0, -2.0]), &mut state).unwrap();
            assert_eq!(u, DVector::zeros(2));
        }
    }
}
