use nalgebra::{DMatrix, DMatrixView, DVector, DVectorView};

use super::model::SystemModel;
use super::operators::{build_zab, ResponseLayout};
use super::SlsError;
use crate::Real;

/// Stacked finite-horizon signal `[v_0; v_1; ...; v_T]` with equal-width blocks.
///
/// Disturbance signals carry the initial condition in block 0.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizonSignal<T: Real> {
    pub horizon: usize,
    width: usize,
    data: DVector<T>,
}

impl<T: Real> HorizonSignal<T> {
    pub fn zeros(width: usize, horizon: usize) -> Self {
        Self { horizon, width, data: DVector::zeros(width * (horizon + 1)) }
    }

    pub fn from_blocks(blocks: &[DVector<T>]) -> Result<Self, SlsError> {
        let first = blocks.first().ok_or_else(|| SlsError::Dimension("empty signal".into()))?;
        let width = first.len();
        if blocks.iter().any(|b| b.len() != width) {
            return Err(SlsError::Dimension("signal blocks differ in width".into()));
        }
        let mut data = DVector::zeros(width * blocks.len());
        for (k, b) in blocks.iter().enumerate() {
            data.rows_mut(k * width, width).copy_from(b);
        }
        Ok(Self { horizon: blocks.len() - 1, width, data })
    }

    /// Disturbance signal `[x0; w_0; ...; w_{T-1}]`.
    pub fn disturbance(x0: &DVector<T>, w: &[DVector<T>]) -> Result<Self, SlsError> {
        let mut blocks = Vec::with_capacity(w.len() + 1);
        blocks.push(x0.clone());
        blocks.extend(w.iter().cloned());
        Self::from_blocks(&blocks)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn block(&self, k: usize) -> DVectorView<'_, T> {
        self.data.rows(k * self.width, self.width)
    }

    pub fn as_vector(&self) -> &DVector<T> {
        &self.data
    }
}

/// Closed-loop maps `Phi_x` (`n(T+1) x n(T+1)`) and `Phi_u` (`p(T+1) x n(T+1)`),
/// stored stacked as `[Phi_x; Phi_u]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemResponse<T: Real> {
    layout: ResponseLayout,
    phi: DMatrix<T>,
}

impl<T: Real> SystemResponse<T> {
    pub fn zeros(layout: ResponseLayout) -> Self {
        Self { layout, phi: DMatrix::zeros(layout.n_rows(), layout.n_cols()) }
    }

    pub fn from_stacked(layout: ResponseLayout, phi: DMatrix<T>) -> Result<Self, SlsError> {
        if phi.shape() != (layout.n_rows(), layout.n_cols()) {
            return Err(SlsError::Dimension(format!(
                "response is {:?}, expected ({}, {})",
                phi.shape(),
                layout.n_rows(),
                layout.n_cols()
            )));
        }
        Ok(Self { layout, phi })
    }

    /// The unique achievable response whose input map is `phi_u`: `Phi_x` is
    /// obtained by propagating `Phi_x[t+1] = A Phi_x[t] + B Phi_u[t] + Z`.
    pub fn from_input_map(model: &SystemModel<T>, horizon: usize, phi_u: &DMatrix<T>) -> Result<Self, SlsError> {
        let layout = ResponseLayout::for_model(model, horizon);
        let ns = layout.n_state_rows();
        if phi_u.shape() != (layout.n_rows() - ns, layout.n_cols()) {
            return Err(SlsError::Dimension(format!("input map is {:?}", phi_u.shape())));
        }
        let (n, p) = (layout.n, layout.p);
        let mut phi = DMatrix::zeros(layout.n_rows(), layout.n_cols());
        phi.rows_mut(ns, layout.n_rows() - ns).copy_from(phi_u);
        phi.view_mut((0, 0), (n, n)).fill_with_identity();
        for t in 0..horizon {
            let next = model.a() * phi.rows(t * n, n) + model.b() * phi.rows(ns + t * p, p);
            phi.rows_mut((t + 1) * n, n).copy_from(&next);
            for s in 0..n {
                phi[((t + 1) * n + s, (t + 1) * n + s)] += T::one();
            }
        }
        Ok(Self { layout, phi })
    }

    pub fn layout(&self) -> &ResponseLayout {
        &self.layout
    }

    pub fn horizon(&self) -> usize {
        self.layout.horizon
    }

    pub fn stacked(&self) -> &DMatrix<T> {
        &self.phi
    }

    pub fn stacked_mut(&mut self) -> &mut DMatrix<T> {
        &mut self.phi
    }

    pub fn phi_x(&self) -> DMatrixView<'_, T> {
        self.phi.rows(0, self.layout.n_state_rows())
    }

    pub fn phi_u(&self) -> DMatrixView<'_, T> {
        self.phi.rows(self.layout.n_state_rows(), self.layout.n_rows() - self.layout.n_state_rows())
    }

    /// Block `(t, k)` of `Phi_x`.
    pub fn phi_x_block(&self, t: usize, k: usize) -> DMatrixView<'_, T> {
        let n = self.layout.n;
        self.phi.view((t * n, k * n), (n, n))
    }

    /// Block `(t, k)` of `Phi_u`.
    pub fn phi_u_block(&self, t: usize, k: usize) -> DMatrixView<'_, T> {
        let (n, p) = (self.layout.n, self.layout.p);
        self.phi.view((self.layout.n_state_rows() + t * p, k * n), (p, n))
    }

    /// Largest absolute entry strictly above the block diagonal.
    pub fn causality_violation(&self) -> T {
        let mut worst = T::zero();
        for r in 0..self.layout.n_rows() {
            let t = self.layout.row_info(r).time;
            for c in 0..self.layout.n_cols() {
                if self.layout.col_info(c).block > t {
                    worst = worst.max(self.phi[(r, c)].abs());
                }
            }
        }
        worst
    }

    /// `max |Z_AB Phi - I|`.
    pub fn achievability_residual(&self, model: &SystemModel<T>) -> T {
        let zab = build_zab(model, self.layout.horizon);
        let mut res = zab * &self.phi;
        for i in 0..res.nrows() {
            res[(i, i)] -= T::one();
        }
        res.amax()
    }

    /// State and input trajectories `(Phi_x w, Phi_u w)` for a stacked disturbance.
    pub fn apply(&self, w: &HorizonSignal<T>) -> (DVector<T>, DVector<T>) {
        let out = &self.phi * w.as_vector();
        let ns = self.layout.n_state_rows();
        (out.rows(0, ns).into_owned(), out.rows(ns, out.len() - ns).into_owned())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_dynamics_pins_phi_x_to_identity() {
        let m = SystemModel::<f64>::new(vec![1, 1], vec![1, 1], DMatrix::zeros(2, 2), DMatrix::zeros(2, 2)).unwrap();
        let layout = ResponseLayout::for_model(&m, 2);
        let mut phi = DMatrix::zeros(layout.n_rows(), layout.n_cols());
        phi.rows_mut(0, 6).fill_with_identity();
        // arbitrary causal Phi_u leaves achievability untouched
        phi[(layout.input_row(1, 0), layout.col(0, 1))] = 3.0;
        let resp = SystemResponse::from_stacked(layout, phi).unwrap();
        assert_eq!(resp.achievability_residual(&m), 0.0);
        assert_eq!(resp.causality_violation(), 0.0);
    }

    #[test]
    fn causality_violation_detected() {
        let layout = ResponseLayout::new(1, 1, 2);
        let mut resp = SystemResponse::<f64>::zeros(layout);
        resp.stacked_mut()[(layout.state_row(0, 0), layout.col(1, 0))] = -0.25;
        assert_eq!(resp.causality_violation(), 0.25);
    }

    #[test]
    fn signal_blocks() {
        let x0 = DVector::from_vec(vec![1.0, 2.0]);
        let w = vec![DVector::from_vec(vec![3.0, 4.0])];
        let s = HorizonSignal::disturbance(&x0, &w).unwrap();
        assert_eq!(s.horizon, 1);
        assert_eq!(s.block(1)[1], 4.0);
        assert!(HorizonSignal::<f64>::from_blocks(&[x0, DVector::zeros(3)]).is_err());
    }
}
