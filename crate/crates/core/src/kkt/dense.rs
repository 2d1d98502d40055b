use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::Real;

/// Relative threshold below which singular values (or pivots) count as zero.
pub const RANK_TOL: f64 = 1e-10;

/// Moore-Penrose inverse of a symmetric matrix via its eigendecomposition,
/// together with the numerical rank.
pub fn pinv_symmetric<T: Real>(k: &DMatrix<T>) -> (DMatrix<T>, usize) {
    let n = k.nrows();
    if n == 0 {
        return (DMatrix::zeros(0, 0), 0);
    }
    let eig = SymmetricEigen::new(k.clone());
    let top = eig.eigenvalues.amax();
    let cut = T::tol(RANK_TOL) * top;
    let mut scaled = eig.eigenvectors.clone();
    let mut rank = 0;
    for (j, &lam) in eig.eigenvalues.iter().enumerate() {
        let inv = if lam.abs() > cut && top > T::zero() {
            rank += 1;
            T::one() / lam
        } else {
            T::zero()
        };
        scaled.column_mut(j).scale_mut(inv);
    }
    (scaled * eig.eigenvectors.transpose(), rank)
}

/// Moore-Penrose inverse of a general matrix via SVD.
pub fn pinv<T: Real>(a: &DMatrix<T>) -> DMatrix<T> {
    if a.is_empty() {
        return DMatrix::zeros(a.ncols(), a.nrows());
    }
    let svd = a.clone().svd(true, true);
    let top = svd.singular_values.amax();
    let cut = T::tol(RANK_TOL) * top;
    let u = svd.u.as_ref().expect("left singular vectors requested");
    let vt = svd.v_t.as_ref().expect("right singular vectors requested");
    let mut out = DMatrix::zeros(a.ncols(), a.nrows());
    for (j, &s) in svd.singular_values.iter().enumerate() {
        if s > cut && s > T::zero() {
            let inv = T::one() / s;
            out += vt.row(j).transpose() * u.column(j).transpose() * inv;
        }
    }
    out
}

/// Parametrization `{z : A z = b} = {z0 + N y}` with `z0` the minimum-norm
/// solution and `N` an orthonormal basis of `ker A`.
#[derive(Debug, Clone)]
pub struct EqualityElimination<T: Real> {
    pub z0: DVector<T>,
    pub basis: DMatrix<T>,
    pub rank: usize,
    /// `max |A z0 - b|`
    pub residual: T,
}

/// Householder QR of `A^T` with column pivoting on the remaining column norms.
pub fn eliminate_equalities<T: Real>(a: &DMatrix<T>, b: &DVector<T>) -> EqualityElimination<T> {
    let n = a.ncols();
    let m = a.nrows();
    let mut r = a.transpose();
    let mut perm: Vec<usize> = (0..m).collect();
    let mut vs: Vec<(DVector<T>, T)> = Vec::new();
    let mut top = T::zero();
    let steps = n.min(m);
    let mut rank = 0;
    for k in 0..steps {
        let mut best = k;
        let mut best_norm = -T::one();
        for j in k..m {
            let nj = r.view((k, j), (n - k, 1)).norm();
            if nj > best_norm {
                best_norm = nj;
                best = j;
            }
        }
        if k == 0 {
            top = best_norm;
        }
        if best_norm <= T::tol(RANK_TOL) * top || best_norm == T::zero() {
            break;
        }
        r.swap_columns(k, best);
        perm.swap(k, best);
        let x = r.view((k, k), (n - k, 1)).clone_owned();
        let alpha = if x[0] >= T::zero() { -best_norm } else { best_norm };
        let mut v = DVector::from_iterator(n - k, x.iter().copied());
        v[0] -= alpha;
        let vnorm2 = v.norm_squared();
        let beta = if vnorm2 > T::zero() { T::lit(2.0) / vnorm2 } else { T::zero() };
        for j in k..m {
            let dot = v.dot(&r.view((k, j), (n - k, 1)).column(0));
            let s = beta * dot;
            for i in 0..n - k {
                r[(k + i, j)] -= s * v[i];
            }
        }
        vs.push((v, beta));
        rank = k + 1;
    }
    // Q applied to e_j for j >= rank gives the kernel basis
    let apply_q = |mut y: DMatrix<T>| {
        for (k, (v, beta)) in vs.iter().enumerate().rev() {
            for c in 0..y.ncols() {
                let dot = v.dot(&y.view((k, c), (n - k, 1)).column(0));
                let s = *beta * dot;
                for i in 0..n - k {
                    y[(k + i, c)] -= s * v[i];
                }
            }
        }
        y
    };
    let mut e = DMatrix::zeros(n, n - rank);
    for j in 0..n - rank {
        e[(rank + j, j)] = T::one();
    }
    let basis = apply_q(e);
    // R11^T w = b_perm[..rank]
    let mut w = DVector::zeros(n);
    for i in 0..rank {
        let mut acc = b[perm[i]];
        for j in 0..i {
            acc -= r[(j, i)] * w[j];
        }
        w[i] = acc / r[(i, i)];
    }
    let z0 = apply_q(DMatrix::from_column_slice(n, 1, w.as_slice())).column(0).into_owned();
    let residual = if m > 0 { (a * &z0 - b).amax() } else { T::zero() };
    EqualityElimination { z0, basis, rank, residual }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn symmetric_pinv_of_singular_matrix() {
        let k = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let (p, rank) = pinv_symmetric(&k);
        assert_eq!(rank, 1);
        assert!((p - DMatrix::from_element(2, 2, 0.25)).amax() < 1e-14);
    }

    #[test]
    fn general_pinv_penrose_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random(&mut rng, 6, 3) * random(&mut rng, 3, 5);
        let p = pinv(&a);
        assert!((&a * &p * &a - &a).amax() < 1e-12);
        assert!((&p * &a * &p - &p).amax() < 1e-12);
    }

    #[test]
    fn elimination_of_rank_deficient_system() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let base = random(&mut rng, 3, 7);
        // five rows spanning a rank-3 space
        let a = random(&mut rng, 5, 3) * base;
        let b = &a * random(&mut rng, 7, 1).column(0);
        let el = eliminate_equalities(&a, &b);
        assert_eq!(el.rank, 3);
        assert_eq!(el.basis.shape(), (7, 4));
        assert!(el.residual < 1e-12);
        assert!((&a * &el.basis).amax() < 1e-12);
        assert!((el.basis.transpose() * &el.basis - DMatrix::identity(4, 4)).amax() < 1e-12);
        // minimum norm: orthogonal to the kernel, equal to the pseudo-inverse solution
        assert!((el.basis.transpose() * &el.z0).amax() < 1e-12);
        assert!((pinv(&a) * &b - &el.z0).amax() < 1e-10);
    }

    #[test]
    fn inconsistent_system_reports_residual() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]);
        let b = DVector::from_vec(vec![1.0, 3.0]);
        let el = eliminate_equalities(&a, &b);
        assert_eq!(el.rank, 1);
        assert!(el.residual > 0.1);
    }

    #[test]
    fn no_equalities() {
        let el = eliminate_equalities(&DMatrix::<f64>::zeros(0, 3), &DVector::zeros(0));
        assert_eq!(el.rank, 0);
        assert_eq!(el.basis, DMatrix::identity(3, 3));
        assert_eq!(el.z0, DVector::zeros(3));
    }
}
