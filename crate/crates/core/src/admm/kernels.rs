use nalgebra::{DMatrix, DVector};

use super::layout::{ColSpec, HRowSpec};
use crate::kkt::{solve_qp, DenseQp};
use crate::Real;

const XI_REGULARIZATION: f64 = 1e-9;

/// `argmin_phi  w (x0 . phi)^2 + rho/2 |phi - a|^2`.
pub fn phi_row_update<T: Real>(weight: T, x0: &DVector<T>, a: &DVector<T>, rho: T) -> DVector<T> {
    let two_w = weight + weight;
    if two_w == T::zero() {
        return a.clone();
    }
    let scale = two_w * x0.dot(a) / (rho + two_w * x0.norm_squared());
    a - x0 * scale
}

/// `(H Psi)` for one row of `H`, over `first_cols ++ rest_cols`, from the
/// owner's row views of `Psi`.
pub fn h_times_psi<T: Real>(spec: &HRowSpec<T>, psi_view: &[DVector<T>]) -> DVector<T> {
    DVector::from_iterator(
        spec.width(),
        spec.terms.iter().map(|list| list.iter().fold(T::zero(), |acc, &(row, pos, coef)| acc + coef * psi_view[row][pos])),
    )
}

/// `(Xi G)` for one row of `H`, over `rest_cols`.
pub fn xi_times_g<T: Real>(spec: &HRowSpec<T>, xi: &DVector<T>) -> DVector<T> {
    let mut out = DVector::zeros(spec.rest_cols.len());
    for (k, entries) in spec.xi_entries.iter().enumerate() {
        for &(pos, coef) in entries {
            out[pos] += xi[k] * coef;
        }
    }
    out
}

/// Local problem of one row of `H`:
///
/// ```text
/// min  |omega - b|^2 + |xi G - c|^2   s.t.  x0 . omega + g . xi <= h,  xi >= 0
/// ```
///
/// `b` and `c` are the first-block and later-block parts of `target`.
/// Returns `None` when infeasible.
pub fn h_row_update<T: Real>(
    spec: &HRowSpec<T>,
    x0: &DVector<T>,
    target: &DVector<T>,
) -> Option<(DVector<T>, DVector<T>)> {
    let n1 = spec.first_cols.len();
    let b = target.rows(0, n1).into_owned();
    let c = target.rows(n1, spec.rest_cols.len()).into_owned();
    match &spec.pairs {
        Some(pairs) => h_row_box(spec, pairs, x0, &b, &c),
        None => h_row_generic(spec, x0, &b, &c),
    }
}

fn h_row_box<T: Real>(
    spec: &HRowSpec<T>,
    pairs: &[super::layout::BoxPair<T>],
    x0: &DVector<T>,
    b: &DVector<T>,
    c: &DVector<T>,
) -> Option<(DVector<T>, DVector<T>)> {
    // With multiplier nu on the inequality, omega = b - nu x0 and every
    // column of xi G soft-thresholds c at nu g/|G|; the constraint value is
    // piecewise linear and nonincreasing in nu.
    let zero = T::zero();
    let x2 = x0.norm_squared();
    let mut value = x0.dot(b) - spec.rhs;
    let mut slope = -x2;
    let mut kinks: Vec<(T, T)> = Vec::new();
    for (p, pair) in pairs.iter().enumerate() {
        let cp = c[p];
        if let Some(side) = pair.plus.filter(|_| cp > zero) {
            let t = side.rhs / side.coef;
            value += t * cp;
            if t > zero {
                slope -= t * t;
                kinks.push((cp / t, t * t));
            }
        } else if let Some(side) = pair.minus.filter(|_| cp < zero) {
            let t = side.rhs / side.coef;
            value -= t * cp;
            if t > zero {
                slope -= t * t;
                kinks.push((-cp / t, t * t));
            }
        }
    }
    let nu = if value <= zero {
        zero
    } else {
        kinks.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
        let mut at = zero;
        let mut root = None;
        for &(knot, drop) in &kinks {
            if slope < zero {
                let next = value + slope * (knot - at);
                if next <= zero {
                    root = Some(at - value / slope);
                    break;
                }
                value = next;
            }
            at = knot;
            slope += drop;
        }
        match root {
            Some(r) => r,
            None if slope < zero => at - value / slope,
            None => return None,
        }
    };
    let omega = b - x0 * nu;
    let mut xi = DVector::zeros(spec.xi_rows.len());
    for (p, pair) in pairs.iter().enumerate() {
        let cp = c[p];
        if let Some(side) = pair.plus {
            let d = cp - nu * side.rhs / side.coef;
            if d > zero {
                xi[side.xi] = d / side.coef;
                continue;
            }
        }
        if let Some(side) = pair.minus {
            let d = cp + nu * side.rhs / side.coef;
            if d < zero {
                xi[side.xi] = -d / side.coef;
            }
        }
    }
    Some((omega, xi))
}

fn h_row_generic<T: Real>(
    spec: &HRowSpec<T>,
    x0: &DVector<T>,
    b: &DVector<T>,
    c: &DVector<T>,
) -> Option<(DVector<T>, DVector<T>)> {
    let n1 = b.len();
    let m = spec.xi_rows.len();
    let nv = n1 + m;
    let mut d = DMatrix::zeros(c.len(), m);
    for (k, entries) in spec.xi_entries.iter().enumerate() {
        for &(pos, coef) in entries {
            d[(pos, k)] += coef;
        }
    }
    let mut q = DMatrix::identity(nv, nv) * T::lit(XI_REGULARIZATION);
    for i in 0..n1 {
        q[(i, i)] += T::one();
    }
    let dtd = d.transpose() * &d;
    let mut block = q.view_mut((n1, n1), (m, m));
    block += &dtd;
    let mut lin = DVector::zeros(nv);
    lin.rows_mut(0, n1).copy_from(&(-b));
    lin.rows_mut(n1, m).copy_from(&(-(d.transpose() * c)));
    let mut a = DMatrix::zeros(1 + m, nv);
    let mut rhs = DVector::zeros(1 + m);
    a.view_mut((0, 0), (1, n1)).copy_from(&x0.transpose());
    for k in 0..m {
        a[(0, n1 + k)] = spec.xi_rhs[k];
        a[(1 + k, n1 + k)] = -T::one();
    }
    rhs[0] = spec.rhs;
    let sol = solve_qp(&DenseQp::new(q, lin).with_inequalities(a, rhs)).ok()?;
    let omega = sol.z.rows(0, n1).into_owned();
    let xi = sol.z.rows(n1, m).map(|v| v.max(T::zero()));
    Some((omega, xi))
}

/// Closed-form column update `z = gain * targets + offset`.
pub fn column_update<T: Real>(spec: &ColSpec<T>, targets: &DVector<T>) -> DVector<T> {
    spec.lsq.solve(targets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::admm::layout::{BoxPair, BoxSide};

    fn spec_with(first: usize, rest: usize, rhs: f64, sigma: f64, boxed: bool) -> HRowSpec<f64> {
        let mut xi_rows = vec![];
        let mut xi_rhs = vec![];
        let mut xi_entries = vec![];
        let mut pairs = vec![];
        for p in 0..rest {
            xi_rows.extend([2 * p, 2 * p + 1]);
            xi_rhs.extend([sigma, sigma]);
            xi_entries.push(vec![(p, 1.0)]);
            xi_entries.push(vec![(p, -1.0)]);
            pairs.push(BoxPair {
                plus: Some(BoxSide { xi: 2 * p, coef: 1.0, rhs: sigma }),
                minus: Some(BoxSide { xi: 2 * p + 1, coef: 1.0, rhs: sigma }),
            });
        }
        HRowSpec {
            index: 0,
            kind: crate::sls::RowKind::State,
            rhs,
            first_cols: (0..first).collect(),
            rest_cols: (first..first + rest).collect(),
            terms: vec![vec![]; first + rest],
            xi_rows,
            xi_rhs,
            xi_entries,
            pairs: boxed.then_some(pairs),
        }
    }

    #[test]
    fn phi_row_zero_weight_copies_target() {
        let a = DVector::from_vec(vec![1.0, -2.0]);
        assert_eq!(phi_row_update(0.0, &DVector::from_vec(vec![3.0, 1.0]), &a, 1.0), a);
    }

    #[test]
    fn phi_row_stationarity() {
        let x0 = DVector::from_vec(vec![0.5, -1.0, 2.0]);
        let a = DVector::from_vec(vec![1.0, 0.3, -0.7]);
        let (w, rho) = (1.7, 0.9);
        let phi = phi_row_update(w, &x0, &a, rho);
        let grad = &x0 * (2.0 * w * x0.dot(&phi)) + (&phi - &a) * rho;
        assert!(grad.amax() < 1e-12);
    }

    #[test]
    fn box_path_matches_generic_qp() {
        let x0 = DVector::from_vec(vec![0.8, -0.4]);
        for (rhs, sigma, shift) in [(0.3, 1.0, 0.0), (-0.5, 0.2, 1.0), (5.0, 1.0, 0.0), (0.1, 0.0, 2.0), (0.0, 0.5, -1.0)] {
            let boxed = spec_with(2, 3, rhs, sigma, true);
            let plain = spec_with(2, 3, rhs, sigma, false);
            let target = DVector::from_vec(vec![1.0 + shift, 0.5, 0.7, -1.2, 0.1]);
            let (o1, x1) = h_row_update(&boxed, &x0, &target).unwrap();
            let (o2, x2) = h_row_update(&plain, &x0, &target).unwrap();
            assert!((&o1 - &o2).amax() < 1e-6, "omega {o1} vs {o2}");
            assert!((xi_times_g(&boxed, &x1) - xi_times_g(&plain, &x2)).amax() < 1e-6);
            assert!(x1.min() >= 0.0);
            assert!(x0.dot(&o1) + sigma * x1.sum() <= rhs + 1e-12);
        }
    }

    #[test]
    fn infeasible_row() {
        let spec = spec_with(0, 2, -1.0, 1.0, true);
        assert!(h_row_update(&spec, &DVector::zeros(0), &DVector::from_vec(vec![0.5, 0.5])).is_none());
        let generic = spec_with(0, 2, -1.0, 1.0, false);
        assert!(h_row_update(&generic, &DVector::zeros(0), &DVector::from_vec(vec![0.5, 0.5])).is_none());
    }

    #[test]
    fn inactive_constraint_leaves_target() {
        let spec = spec_with(1, 1, 10.0, 1.0, true);
        let target = DVector::from_vec(vec![0.5, -0.25]);
        let (omega, xi) = h_row_update(&spec, &DVector::from_vec(vec![1.0]), &target).unwrap();
        assert_eq!(omega[0], 0.5);
        assert_eq!(xi_times_g(&spec, &xi)[0], -0.25);
    }
}
