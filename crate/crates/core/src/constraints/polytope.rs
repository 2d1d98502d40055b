use nalgebra::{DMatrix, DVector};

use super::ConstraintError;
use crate::sls::{ResponseLayout, RowKind, SystemModel};
use crate::Real;

/// Coordinate-wise bounds on states and inputs for one prediction step.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxBounds<T: Real> {
    pub x_min: Vec<T>,
    pub x_max: Vec<T>,
    pub u_min: Vec<T>,
    pub u_max: Vec<T>,
}

impl<T: Real> BoxBounds<T> {
    /// Symmetric bounds `|x_s| <= x_bound[s]`, `|u_q| <= u_bound[q]`.
    pub fn symmetric(x_bound: &[T], u_bound: &[T]) -> Self {
        Self {
            x_min: x_bound.iter().map(|&b| -b).collect(),
            x_max: x_bound.to_vec(),
            u_min: u_bound.iter().map(|&b| -b).collect(),
            u_max: u_bound.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BoxOptions {
    /// Also emit rows for `x_0`. They reduce to a check that the measured
    /// state lies in `X_0`.
    pub constrain_initial_state: bool,
}

/// One half-space `sum_r coef_r [Phi w]_r <= rhs` over the stacked response
/// rows of a single subsystem at a single time.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpaceRow<T: Real> {
    pub kind: RowKind,
    pub time: usize,
    pub owner: usize,
    /// `(stacked response row, coefficient)`
    pub entries: Vec<(usize, T)>,
    pub rhs: T,
}

/// One half-space `sum_s coef_s [w_{block}]_s <= rhs` of the disturbance set.
/// `block` is the response column block the disturbance enters (`1..=T`).
#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceRow<T: Real> {
    pub block: usize,
    pub owner: usize,
    /// `(global state coordinate, coefficient)`
    pub entries: Vec<(usize, T)>,
    pub rhs: T,
}

/// Block-diagonal `(H, h)` on states/inputs and `(G, g)` on disturbances.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustConstraintData<T: Real> {
    pub horizon: usize,
    pub h_rows: Vec<HalfSpaceRow<T>>,
    pub g_rows: Vec<DisturbanceRow<T>>,
}

fn check_finite<T: Real>(v: T, what: &str) -> Result<(), ConstraintError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(ConstraintError::NotFinite(what.to_string()))
    }
}

/// Stacked `+-e` rows for every state at `t = 1..=T` and every input at
/// `t = 0..T-1` (rows for `x_0` optional). Infinite bounds produce no row.
///
/// `bounds` holds either one entry used at every step or `T + 1` entries
/// indexed by time.
pub fn build_box_constraints<T: Real>(
    model: &SystemModel<T>,
    bounds: &[BoxBounds<T>],
    horizon: usize,
    opts: BoxOptions,
) -> Result<RobustConstraintData<T>, ConstraintError> {
    let (n, p) = (model.n_states(), model.n_inputs());
    if bounds.len() != 1 && bounds.len() != horizon + 1 {
        return Err(ConstraintError::Dimension(format!(
            "{} bound sets for horizon {horizon}",
            bounds.len()
        )));
    }
    for b in bounds {
        if b.x_min.len() != n || b.x_max.len() != n || b.u_min.len() != p || b.u_max.len() != p {
            return Err(ConstraintError::Dimension(format!("bounds must cover {n} states and {p} inputs")));
        }
    }
    let at = |t: usize| if bounds.len() == 1 { &bounds[0] } else { &bounds[t] };
    let layout = ResponseLayout::new(n, p, horizon);
    let mut rows = Vec::new();
    let first_state = if opts.constrain_initial_state { 0 } else { 1 };
    for t in first_state..=horizon {
        let b = at(t);
        for s in 0..n {
            push_pair(&mut rows, RowKind::State, t, s, model.state_owner(s), layout.state_row(t, s), b.x_min[s], b.x_max[s])?;
        }
    }
    for t in 0..horizon {
        let b = at(t);
        for q in 0..p {
            push_pair(&mut rows, RowKind::Input, t, q, model.input_owner(q), layout.input_row(t, q), b.u_min[q], b.u_max[q])?;
        }
    }
    Ok(RobustConstraintData { horizon, h_rows: rows, g_rows: Vec::new() })
}

#[allow(clippy::too_many_arguments)]
fn push_pair<T: Real>(
    rows: &mut Vec<HalfSpaceRow<T>>,
    kind: RowKind,
    time: usize,
    coord: usize,
    owner: usize,
    r: usize,
    lo: T,
    hi: T,
) -> Result<(), ConstraintError> {
    if lo.as_f64().is_nan() || hi.as_f64().is_nan() {
        return Err(ConstraintError::NotFinite(format!("{kind:?} bound on coordinate {coord}")));
    }
    if lo > T::zero() || hi < T::zero() {
        return Err(ConstraintError::OriginExcluded { kind, coord, time });
    }
    // an infinite side is no constraint at all
    if hi.is_finite() {
        rows.push(HalfSpaceRow { kind, time, owner, entries: vec![(r, T::one())], rhs: hi });
    }
    if lo.is_finite() {
        rows.push(HalfSpaceRow { kind, time, owner, entries: vec![(r, -T::one())], rhs: -lo });
    }
    Ok(())
}

/// Box `|[w_k]_s| <= sigma` for every disturbance block `k = 1..=T`.
pub fn build_disturbance_polytope<T: Real>(
    model: &SystemModel<T>,
    sigma: T,
    horizon: usize,
) -> Result<Vec<DisturbanceRow<T>>, ConstraintError> {
    if sigma.as_f64().is_nan() || sigma < T::zero() {
        return Err(ConstraintError::NegativeNoise(sigma.as_f64()));
    }
    check_finite(sigma, "noise bound")?;
    let mut rows = Vec::with_capacity(2 * model.n_states() * horizon);
    for block in 1..=horizon {
        for s in 0..model.n_states() {
            let owner = model.state_owner(s);
            rows.push(DisturbanceRow { block, owner, entries: vec![(s, T::one())], rhs: sigma });
            rows.push(DisturbanceRow { block, owner, entries: vec![(s, -T::one())], rhs: sigma });
        }
    }
    Ok(rows)
}

impl<T: Real> RobustConstraintData<T> {
    pub fn with_disturbance(mut self, g_rows: Vec<DisturbanceRow<T>>) -> Self {
        self.g_rows = g_rows;
        self
    }

    /// Builds the data from dense matrices, refusing rows that couple
    /// subsystems or time steps.
    ///
    /// `h` has one column per stacked response row, `g` one column per
    /// disturbance coordinate of blocks `1..=T` (`n T` columns).
    pub fn from_dense(
        model: &SystemModel<T>,
        horizon: usize,
        h: &DMatrix<T>,
        h_rhs: &DVector<T>,
        g: &DMatrix<T>,
        g_rhs: &DVector<T>,
    ) -> Result<Self, ConstraintError> {
        let layout = ResponseLayout::for_model(model, horizon);
        let n = layout.n;
        if h.ncols() != layout.n_rows() || h.nrows() != h_rhs.len() {
            return Err(ConstraintError::Dimension(format!("H is {:?}", h.shape())));
        }
        if g.ncols() != n * horizon || g.nrows() != g_rhs.len() {
            return Err(ConstraintError::Dimension(format!("G is {:?}", g.shape())));
        }
        let mut h_rows = Vec::with_capacity(h.nrows());
        for i in 0..h.nrows() {
            let entries: Vec<(usize, T)> =
                (0..h.ncols()).filter(|&r| h[(i, r)] != T::zero()).map(|r| (r, h[(i, r)])).collect();
            let mut key = None;
            for &(r, _) in &entries {
                let info = layout.row_info(r);
                let owner = match info.kind {
                    RowKind::State => model.state_owner(info.coord),
                    RowKind::Input => model.input_owner(info.coord),
                };
                let k = (info.kind, info.time, owner);
                if key.is_some_and(|prev| prev != k) {
                    return Err(ConstraintError::Coupled { what: "H", row: i });
                }
                key = Some(k);
            }
            let (kind, time, owner) = key.ok_or(ConstraintError::Dimension(format!("H row {i} is empty")))?;
            h_rows.push(HalfSpaceRow { kind, time, owner, entries, rhs: h_rhs[i] });
        }
        let mut g_rows = Vec::with_capacity(g.nrows());
        for i in 0..g.nrows() {
            let mut key = None;
            let mut entries = Vec::new();
            for j in 0..g.ncols() {
                if g[(i, j)] == T::zero() {
                    continue;
                }
                let (block, s) = (j / n + 1, j % n);
                let k = (block, model.state_owner(s));
                if key.is_some_and(|prev| prev != k) {
                    return Err(ConstraintError::Coupled { what: "G", row: i });
                }
                key = Some(k);
                entries.push((s, g[(i, j)]));
            }
            let (block, owner) = key.ok_or(ConstraintError::Dimension(format!("G row {i} is empty")))?;
            g_rows.push(DisturbanceRow { block, owner, entries, rhs: g_rhs[i] });
        }
        Ok(Self { horizon, h_rows, g_rows })
    }

    pub fn n_h(&self) -> usize {
        self.h_rows.len()
    }

    pub fn n_g(&self) -> usize {
        self.g_rows.len()
    }

    /// Dense `H` over the stacked response rows.
    pub fn dense_h(&self, layout: &ResponseLayout) -> DMatrix<T> {
        let mut h = DMatrix::zeros(self.h_rows.len(), layout.n_rows());
        for (i, row) in self.h_rows.iter().enumerate() {
            for &(r, v) in &row.entries {
                h[(i, r)] = v;
            }
        }
        h
    }

    pub fn h_rhs(&self) -> DVector<T> {
        DVector::from_iterator(self.h_rows.len(), self.h_rows.iter().map(|r| r.rhs))
    }

    /// Dense `G = blkdiag(G_1, ..., G_T)` with `n T` columns.
    pub fn dense_g(&self, n: usize) -> DMatrix<T> {
        let mut g = DMatrix::zeros(self.g_rows.len(), n * self.horizon);
        for (i, row) in self.g_rows.iter().enumerate() {
            for &(s, v) in &row.entries {
                g[(i, (row.block - 1) * n + s)] = v;
            }
        }
        g
    }

    pub fn g_rhs(&self) -> DVector<T> {
        DVector::from_iterator(self.g_rows.len(), self.g_rows.iter().map(|r| r.rhs))
    }

    /// Re-checks that every row of `H` and `G` touches a single subsystem and
    /// a single time step of `model`.
    pub fn audit(&self, model: &SystemModel<T>) -> Result<(), ConstraintError> {
        let layout = ResponseLayout::for_model(model, self.horizon);
        for (i, row) in self.h_rows.iter().enumerate() {
            for &(r, _) in &row.entries {
                if r >= layout.n_rows() {
                    return Err(ConstraintError::Dimension(format!("H row {i} references response row {r}")));
                }
                let info = layout.row_info(r);
                let owner = match info.kind {
                    RowKind::State => model.state_owner(info.coord),
                    RowKind::Input => model.input_owner(info.coord),
                };
                if (info.kind, info.time, owner) != (row.kind, row.time, row.owner) {
                    return Err(ConstraintError::Coupled { what: "H", row: i });
                }
            }
        }
        for (i, row) in self.g_rows.iter().enumerate() {
            if row.block == 0 || row.block > self.horizon {
                return Err(ConstraintError::Dimension(format!("G row {i} has block {}", row.block)));
            }
            for &(s, _) in &row.entries {
                if s >= model.n_states() || model.state_owner(s) != row.owner {
                    return Err(ConstraintError::Coupled { what: "G", row: i });
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar() -> SystemModel<f64> {
        SystemModel::new(vec![1], vec![1], DMatrix::from_element(1, 1, 0.5), DMatrix::from_element(1, 1, 1.0))
            .unwrap()
    }

    #[test]
    fn scalar_box_rows() {
        let m = scalar();
        let data = build_box_constraints(&m, &[BoxBounds::symmetric(&[1.5], &[2.0])], 1, BoxOptions::default())
            .unwrap();
        let layout = ResponseLayout::for_model(&m, 1);
        let h = data.dense_h(&layout);
        // x_1 then u_0
        assert_eq!(h.row(0)[layout.state_row(1, 0)], 1.0);
        assert_eq!(h.row(1)[layout.state_row(1, 0)], -1.0);
        assert_eq!(data.h_rhs().as_slice(), &[1.5, 1.5, 2.0, 2.0]);
    }

    #[test]
    fn wide_bound_kept_as_rows() {
        let m = SystemModel::<f64>::chain(0.8, 2.0, &[1.0, 0.0]).unwrap();
        let data =
            build_box_constraints(&m, &[BoxBounds::symmetric(&[1.5, 20.0], &[1e3, 1e3])], 2, BoxOptions::default())
                .unwrap();
        assert_eq!(data.n_h(), 2 * 2 * 2 + 2 * 2 * 2);
        assert!(data.h_rows.iter().any(|r| r.rhs == 20.0 && r.owner == 1));
    }

    #[test]
    fn infinite_sides_are_dropped() {
        let m = SystemModel::<f64>::chain(0.8, 2.0, &[1.0, 1.0]).unwrap();
        let b = BoxBounds::symmetric(&[1.0, 1.0], &[f64::INFINITY, f64::INFINITY]);
        let data = build_box_constraints(&m, &[b], 2, BoxOptions::default()).unwrap();
        assert_eq!(data.n_h(), 8);
        assert!(data.h_rows.iter().all(|r| r.kind == RowKind::State));
        let nan = BoxBounds::symmetric(&[f64::NAN, 1.0], &[1.0, 1.0]);
        assert!(build_box_constraints(&m, &[nan], 2, BoxOptions::default()).is_err());
    }

    #[test]
    fn degenerate_box_has_zero_rhs() {
        let m = scalar();
        let data = build_box_constraints(&m, &[BoxBounds::symmetric(&[0.0], &[0.0])], 2, BoxOptions::default())
            .unwrap();
        assert!(data.h_rhs().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bounds_excluding_origin_rejected() {
        let m = scalar();
        let b = BoxBounds { x_min: vec![0.5], x_max: vec![1.0], u_min: vec![-1.0], u_max: vec![1.0] };
        let err = build_box_constraints(&m, &[b], 1, BoxOptions::default()).unwrap_err();
        assert!(matches!(err, ConstraintError::OriginExcluded { kind: RowKind::State, .. }));
    }

    #[test]
    fn disturbance_blocks() {
        let m = scalar();
        let rows = build_disturbance_polytope(&m, 1.0, 1).unwrap();
        let data = RobustConstraintData { horizon: 1, h_rows: vec![], g_rows: rows };
        assert_eq!(data.dense_g(1), DMatrix::from_row_slice(2, 1, &[1.0, -1.0]));
        assert_eq!(data.g_rhs().as_slice(), &[1.0, 1.0]);
        assert!(matches!(build_disturbance_polytope(&m, -0.1, 1), Err(ConstraintError::NegativeNoise(_))));
    }

    #[test]
    fn two_subsystems_two_steps_is_eight_by_four() {
        let m = SystemModel::<f64>::chain(0.8, 2.0, &[1.0, 1.0]).unwrap();
        let data = RobustConstraintData { horizon: 2, h_rows: vec![], g_rows: build_disturbance_polytope(&m, 1.0, 2).unwrap() };
        let g = data.dense_g(2);
        assert_eq!(g.shape(), (8, 4));
        // block diagonal: the first four rows only touch block 1
        assert!(g.view((0, 2), (4, 2)).iter().all(|&v| v == 0.0));
        assert!(g.view((4, 0), (4, 2)).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dense_roundtrip_and_coupling_audit() {
        let m = SystemModel::<f64>::chain(0.8, 2.0, &[1.0, 0.0, 1.0]).unwrap();
        let data = build_box_constraints(&m, &[BoxBounds::symmetric(&[1.5; 3], &[2.0; 3])], 2, BoxOptions::default())
            .unwrap()
            .with_disturbance(build_disturbance_polytope(&m, 1.0, 2).unwrap());
        let layout = ResponseLayout::for_model(&m, 2);
        let back = RobustConstraintData::from_dense(
            &m,
            2,
            &data.dense_h(&layout),
            &data.h_rhs(),
            &data.dense_g(3),
            &data.g_rhs(),
        )
        .unwrap();
        assert_eq!(back, data);
        data.audit(&m).unwrap();

        let mut h = data.dense_h(&layout);
        h[(0, layout.state_row(1, 2))] = 0.3;
        let err = RobustConstraintData::from_dense(&m, 2, &h, &data.h_rhs(), &data.dense_g(3), &data.g_rhs())
            .unwrap_err();
        assert_eq!(err, ConstraintError::Coupled { what: "H", row: 0 });

        let mut g = data.dense_g(3);
        g[(0, 1)] = 1.0;
        let err = RobustConstraintData::from_dense(&m, 2, &data.dense_h(&layout), &data.h_rhs(), &g, &data.g_rhs())
            .unwrap_err();
        assert_eq!(err, ConstraintError::Coupled { what: "G", row: 0 });
    }
}
