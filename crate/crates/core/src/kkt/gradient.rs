use nalgebra::{DVector, SymmetricEigen};

use super::dense::{eliminate_equalities, pinv};
use super::qp::{DenseQp, QpSolution};
use super::KktError;
use crate::Real;

/// Accelerated projected gradient on the dual of a QP whose Hessian is
/// positive definite on the kernel of the equalities.
///
/// Slow but short; used to cross-check [`solve_qp`](super::solve_qp) on
/// tiny instances.
pub fn solve_qp_projected_gradient<T: Real>(prob: &DenseQp<T>, max_iter: usize) -> Result<QpSolution<T>, KktError> {
    let el = eliminate_equalities(&prob.a_eq, &prob.b_eq);
    if el.residual > T::tol(1e-9) * (T::one() + prob.b_eq.amax()) {
        return Err(KktError::Infeasible);
    }
    let basis = &el.basis;
    let qr = basis.transpose() * &prob.q * basis;
    let cr = basis.transpose() * (&prob.q * &el.z0 + &prob.c);
    let cin = &prob.a_in * basis;
    let din = &prob.b_in - &prob.a_in * &el.z0;
    let chol = qr.clone().cholesky().ok_or(KktError::NotConvex)?;
    let qinv_ct = chol.solve(&cin.transpose());
    let dual_h = &cin * &qinv_ct;
    let lip = if dual_h.is_empty() {
        T::one()
    } else {
        SymmetricEigen::new(dual_h.clone()).eigenvalues.amax().max(T::tol(1e-300))
    };
    let y_of = |lam: &DVector<T>| -chol.solve(&(&cr + cin.transpose() * lam));
    let m = din.len();
    let mut lam = DVector::zeros(m);
    let mut prev = lam.clone();
    let mut iters = 0;
    let mut momentum = T::one();
    while iters < max_iter {
        iters += 1;
        let t_next = (T::one() + (T::one() + T::lit(4.0) * momentum * momentum).sqrt()) * T::lit(0.5);
        let beta = (momentum - T::one()) / t_next;
        let probe = &lam + (&lam - &prev) * beta;
        let grad = &cin * y_of(&probe) - &din;
        let next = (probe + grad / lip).map(|v| v.max(T::zero()));
        let moved = (&next - &lam).amax();
        prev = lam;
        lam = next;
        momentum = t_next;
        if moved <= T::tol(1e-15) * (T::one() + lam.amax()) {
            break;
        }
    }
    let y = y_of(&lam);
    let z = &el.z0 + basis * y;
    let nu = if prob.b_eq.is_empty() {
        DVector::zeros(0)
    } else {
        pinv(&prob.a_eq.transpose()) * (-(&prob.q * &z + &prob.c + prob.a_in.transpose() * &lam))
    };
    let kkt_residual = prob.kkt_residual(&z, &lam, &nu);
    Ok(QpSolution { objective: prob.objective(&z), z, lambda: lam, nu, kkt_residual, iterations: iters })
}

#[cfg(test)]
mod tests {
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::kkt::solve_qp;

    #[test]
    fn agrees_with_active_set_on_tiny_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let l = DMatrix::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0));
            let q = &l * l.transpose() + DMatrix::identity(4, 4) * 0.5;
            let c = DVector::from_fn(4, |_, _| rng.random_range(-2.0..2.0));
            let a = DMatrix::from_fn(3, 4, |_, _| rng.random_range(-1.0..1.0));
            let b = DVector::from_fn(3, |_, _| rng.random_range(-0.5..0.5));
            let e = DMatrix::from_fn(1, 4, |_, _| rng.random_range(-1.0..1.0));
            let p = DenseQp::new(q, c).with_inequalities(a, b).with_equalities(e, DVector::from_element(1, 0.3));
            let fast = solve_qp(&p).unwrap();
            let slow = solve_qp_projected_gradient(&p, 200_000).unwrap();
            assert!((fast.z - slow.z).amax() < 1e-6);
        }
    }
}
