use nalgebra::DMatrix;

use super::model::SystemModel;
use crate::Real;

/// Whether a row of the stacked response `[Phi_x; Phi_u]` parametrizes a
/// state or an input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub enum RowKind {
    State,
    Input,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowInfo {
    pub kind: RowKind,
    /// prediction time `t` of `x_t` / `u_t`
    pub time: usize,
    /// global state or input coordinate
    pub coord: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ColInfo {
    /// disturbance block: 0 is the initial condition, `k >= 1` enters `x_k`
    pub block: usize,
    pub coord: usize,
}

/// Index arithmetic for the stacked finite-horizon response.
///
/// Rows: `x_0..x_T` (each `n` wide) followed by `u_0..u_T` (each `p` wide).
/// Columns: `n (T + 1)`, block `k` holding the disturbance that enters `x_k`
/// (block 0 is `x_0` itself).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResponseLayout {
    pub n: usize,
    pub p: usize,
    pub horizon: usize,
}

impl ResponseLayout {
    pub fn new(n: usize, p: usize, horizon: usize) -> Self {
        Self { n, p, horizon }
    }

    pub fn for_model<T: Real>(model: &SystemModel<T>, horizon: usize) -> Self {
        Self::new(model.n_states(), model.n_inputs(), horizon)
    }

    pub fn n_state_rows(&self) -> usize {
        self.n * (self.horizon + 1)
    }

    pub fn n_rows(&self) -> usize {
        (self.n + self.p) * (self.horizon + 1)
    }

    pub fn n_cols(&self) -> usize {
        self.n * (self.horizon + 1)
    }

    pub fn state_row(&self, t: usize, s: usize) -> usize {
        t * self.n + s
    }

    pub fn input_row(&self, t: usize, q: usize) -> usize {
        self.n_state_rows() + t * self.p + q
    }

    pub fn col(&self, block: usize, s: usize) -> usize {
        block * self.n + s
    }

    pub fn row_info(&self, r: usize) -> RowInfo {
        if r < self.n_state_rows() {
            RowInfo { kind: RowKind::State, time: r / self.n, coord: r % self.n }
        } else {
            let q = r - self.n_state_rows();
            RowInfo { kind: RowKind::Input, time: q / self.p, coord: q % self.p }
        }
    }

    pub fn col_info(&self, c: usize) -> ColInfo {
        ColInfo { block: c / self.n, coord: c % self.n }
    }
}

/// Block-downshift operator: identity blocks on the first block sub-diagonal.
pub fn build_block_downshift<T: Real>(n: usize, horizon: usize) -> DMatrix<T> {
    let size = n * (horizon + 1);
    let mut z = DMatrix::zeros(size, size);
    for k in 0..horizon {
        for s in 0..n {
            z[((k + 1) * n + s, k * n + s)] = T::one();
        }
    }
    z
}

/// Achievability constraint matrix `Z_AB = [I - Z A_hat, -Z B_hat]`.
pub fn build_zab<T: Real>(model: &SystemModel<T>, horizon: usize) -> DMatrix<T> {
    let layout = ResponseLayout::for_model(model, horizon);
    let mut zab = DMatrix::zeros(layout.n_state_rows(), layout.n_rows());
    for r in 0..layout.n_state_rows() {
        for (c, v) in zab_row(model, &layout, r) {
            zab[(r, c)] = v;
        }
    }
    zab
}

/// Nonzeros of row `r` of `Z_AB` as `(stacked response row, coefficient)`.
pub fn zab_row<T: Real>(model: &SystemModel<T>, layout: &ResponseLayout, r: usize) -> Vec<(usize, T)> {
    let t = r / layout.n;
    let s = r % layout.n;
    let mut out = vec![(r, T::one())];
    if t > 0 {
        for s2 in 0..layout.n {
            let a = model.a()[(s, s2)];
            if a != T::zero() {
                out.push((layout.state_row(t - 1, s2), -a));
            }
        }
        for q in 0..layout.p {
            let b = model.b()[(s, q)];
            if b != T::zero() {
                out.push((layout.input_row(t - 1, q), -b));
            }
        }
    }
    out.sort_by_key(|e| e.0);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn downshift_scalar_one_step() {
        let z = build_block_downshift::<f64>(1, 1);
        assert_eq!(z, DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]));
        assert_eq!(&z * &z, DMatrix::zeros(2, 2));
    }

    #[test]
    fn downshift_two_by_two() {
        let z = build_block_downshift::<f64>(2, 2);
        assert_eq!(z.shape(), (6, 6));
        let eye = DMatrix::<f64>::identity(2, 2);
        assert_eq!(z.view((2, 0), (2, 2)), eye);
        assert_eq!(z.view((4, 2), (2, 2)), eye);
        assert_eq!(z.iter().filter(|v| **v != 0.0).count(), 4);
    }

    #[test]
    fn zab_scalar_one_step() {
        let m = SystemModel::<f64>::new(
            vec![1],
            vec![1],
            DMatrix::from_element(1, 1, 0.7),
            DMatrix::from_element(1, 1, 1.3),
        )
        .unwrap();
        let zab = build_zab(&m, 1);
        let expected = DMatrix::from_row_slice(2, 4, &[1.0, 0.0, 0.0, 0.0, -0.7, 1.0, -1.3, 0.0]);
        assert_eq!(zab, expected);
    }

    #[test]
    fn zab_matches_dense_formula() {
        let m = SystemModel::<f64>::chain(0.8, 2.0, &[1.0, 0.0, 1.0]).unwrap();
        let t = 3;
        let z = build_block_downshift::<f64>(3, t);
        let mut a_hat = DMatrix::zeros(12, 12);
        let mut b_hat = DMatrix::zeros(12, 12);
        for k in 0..=t {
            a_hat.view_mut((3 * k, 3 * k), (3, 3)).copy_from(m.a());
            b_hat.view_mut((3 * k, 3 * k), (3, 3)).copy_from(m.b());
        }
        let left = DMatrix::identity(12, 12) - &z * a_hat;
        let right = -(&z * b_hat);
        let mut expected = DMatrix::zeros(12, 24);
        expected.view_mut((0, 0), (12, 12)).copy_from(&left);
        expected.view_mut((0, 12), (12, 12)).copy_from(&right);
        assert_eq!(build_zab(&m, t), expected);
    }

    #[test]
    fn layout_roundtrip() {
        let l = ResponseLayout::new(3, 2, 4);
        for r in 0..l.n_rows() {
            let info = l.row_info(r);
            let back = match info.kind {
                RowKind::State => l.state_row(info.time, info.coord),
                RowKind::Input => l.input_row(info.time, info.coord),
            };
            assert_eq!(back, r);
        }
        let c = l.col(2, 1);
        assert_eq!(l.col_info(c), ColInfo { block: 2, coord: 1 });
    }
}
