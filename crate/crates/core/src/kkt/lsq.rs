use nalgebra::{DMatrix, DVector};

use super::dense::pinv_symmetric;
use super::KktError;
use crate::Real;

/// `min ||M z - v||^2  s.t.  P z = q`. `P` may have zero rows.
#[derive(Debug, Clone)]
pub struct EqualityLsq<T: Real> {
    pub m: DMatrix<T>,
    pub v: DVector<T>,
    pub p: DMatrix<T>,
    pub q: DVector<T>,
}

#[derive(Debug, Clone)]
pub struct LsqSolution<T: Real> {
    pub z: DVector<T>,
    pub mu: DVector<T>,
}

fn kkt_matrix<T: Real>(m: &DMatrix<T>, p: &DMatrix<T>) -> DMatrix<T> {
    let nz = m.ncols();
    let np = p.nrows();
    let mut k = DMatrix::zeros(nz + np, nz + np);
    k.view_mut((0, 0), (nz, nz)).copy_from(&(m.transpose() * m));
    if np > 0 {
        k.view_mut((nz, 0), (np, nz)).copy_from(p);
        k.view_mut((0, nz), (nz, np)).copy_from(&p.transpose());
    }
    k
}

/// The pseudo-inverse squares the conditioning, so single precision only
/// resolves about the square root of its epsilon.
fn consistency_tol<T: Real>(scale: T) -> T {
    T::tol(1e-8).max(T::default_epsilon().sqrt() * T::lit(0.5)) * (T::one() + scale)
}

/// Minimum-norm solution of `[[M'M, P'], [P, 0]] [z; mu] = [M'v; q]`.
///
/// Stationarity reads `M'M z - M'v + P'mu = 0`.
pub fn solve_equality_lsq<T: Real>(prob: &EqualityLsq<T>) -> Result<LsqSolution<T>, KktError> {
    let nz = prob.m.ncols();
    let np = prob.p.nrows();
    if prob.m.nrows() != prob.v.len() || prob.q.len() != np || (np > 0 && prob.p.ncols() != nz) {
        return Err(KktError::Dimension(format!(
            "M {:?}, v {}, P {:?}, q {}",
            prob.m.shape(),
            prob.v.len(),
            prob.p.shape(),
            prob.q.len()
        )));
    }
    let k = kkt_matrix(&prob.m, &prob.p);
    let (kp, _) = pinv_symmetric(&k);
    let mut rhs = DVector::zeros(nz + np);
    rhs.rows_mut(0, nz).copy_from(&(prob.m.transpose() * &prob.v));
    rhs.rows_mut(nz, np).copy_from(&prob.q);
    let sol = &kp * &rhs;
    let z = sol.rows(0, nz).into_owned();
    let mu = sol.rows(nz, np).into_owned();
    if np > 0 {
        let feas = (&prob.p * &z - &prob.q).amax();
        if feas > consistency_tol(prob.q.amax() + prob.p.amax() * z.amax()) {
            return Err(KktError::Infeasible);
        }
    }
    Ok(LsqSolution { z, mu })
}

/// Equality-constrained least squares with fixed `(M, P, q)` prepared for
/// repeated solves: `z(v) = gain * v + offset`.
///
/// The KKT pseudo-inverse is computed once at construction.
#[derive(Debug, Clone)]
pub struct CachedLsq<T: Real> {
    gain: DMatrix<T>,
    offset: DVector<T>,
}

impl<T: Real> CachedLsq<T> {
    pub fn new(m: &DMatrix<T>, p: &DMatrix<T>, q: &DVector<T>) -> Result<Self, KktError> {
        let nz = m.ncols();
        let np = p.nrows();
        if q.len() != np || (np > 0 && p.ncols() != nz) {
            return Err(KktError::Dimension(format!("P {:?}, q {}", p.shape(), q.len())));
        }
        let k = kkt_matrix(m, p);
        let (kp, _) = pinv_symmetric(&k);
        let gain = kp.view((0, 0), (nz, nz)) * m.transpose();
        let offset = kp.view((0, nz), (nz, np)) * q;
        if np > 0 {
            let scale = q.amax() + p.amax() * offset.amax();
            if (p * &offset - q).amax() > consistency_tol(scale) {
                return Err(KktError::Infeasible);
            }
        }
        Ok(Self { gain, offset })
    }

    pub fn n_vars(&self) -> usize {
        self.offset.len()
    }

    pub fn n_targets(&self) -> usize {
        self.gain.ncols()
    }

    pub fn solve(&self, v: &DVector<T>) -> DVector<T> {
        &self.gain * v + &self.offset
    }
}
