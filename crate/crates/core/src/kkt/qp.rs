use nalgebra::{DMatrix, DVector};

use super::dense::{eliminate_equalities, pinv, pinv_symmetric};
use super::KktError;
use crate::Real;

/// `min 1/2 z'Qz + c'z  s.t.  A_in z <= b_in,  A_eq z = b_eq` with `Q`
/// symmetric positive semidefinite. Either constraint block may be empty.
#[derive(Debug, Clone)]
pub struct DenseQp<T: Real> {
    pub q: DMatrix<T>,
    pub c: DVector<T>,
    pub a_in: DMatrix<T>,
    pub b_in: DVector<T>,
    pub a_eq: DMatrix<T>,
    pub b_eq: DVector<T>,
}

impl<T: Real> DenseQp<T> {
    pub fn new(q: DMatrix<T>, c: DVector<T>) -> Self {
        let n = c.len();
        Self { q, c, a_in: DMatrix::zeros(0, n), b_in: DVector::zeros(0), a_eq: DMatrix::zeros(0, n), b_eq: DVector::zeros(0) }
    }

    pub fn with_inequalities(mut self, a: DMatrix<T>, b: DVector<T>) -> Self {
        self.a_in = a;
        self.b_in = b;
        self
    }

    pub fn with_equalities(mut self, a: DMatrix<T>, b: DVector<T>) -> Self {
        self.a_eq = a;
        self.b_eq = b;
        self
    }

    pub fn n_vars(&self) -> usize {
        self.c.len()
    }

    pub fn objective(&self, z: &DVector<T>) -> T {
        T::lit(0.5) * z.dot(&(&self.q * z)) + self.c.dot(z)
    }

    fn check(&self) -> Result<(), KktError> {
        let n = self.c.len();
        let ok = self.q.shape() == (n, n)
            && self.a_in.ncols() == n
            && self.a_in.nrows() == self.b_in.len()
            && self.a_eq.ncols() == n
            && self.a_eq.nrows() == self.b_eq.len();
        if ok {
            Ok(())
        } else {
            Err(KktError::Dimension(format!(
                "Q {:?}, c {}, A_in {:?}, b_in {}, A_eq {:?}, b_eq {}",
                self.q.shape(),
                n,
                self.a_in.shape(),
                self.b_in.len(),
                self.a_eq.shape(),
                self.b_eq.len()
            )))
        }
    }

    /// Scaled KKT residual of a primal-dual triple: the largest of
    /// stationarity, primal feasibility, dual feasibility and complementarity,
    /// each relative to the magnitude of the terms involved.
    pub fn kkt_residual(&self, z: &DVector<T>, lambda: &DVector<T>, nu: &DVector<T>) -> T {
        let qz = &self.q * z;
        let ain_t = self.a_in.transpose() * lambda;
        let aeq_t = self.a_eq.transpose() * nu;
        let grad = &qz + &self.c + &ain_t + &aeq_t;
        let scale = T::one() + qz.amax().max(self.c.amax()).max(ain_t.amax()).max(aeq_t.amax());
        let mut worst = grad.amax() / scale;
        if !self.b_in.is_empty() {
            let slack = &self.b_in - &self.a_in * z;
            let bscale = T::one() + self.b_in.amax();
            for (i, &s) in slack.iter().enumerate() {
                worst = worst.max((-s).max(T::zero()) / bscale);
                worst = worst.max((-lambda[i]).max(T::zero()) / scale);
                worst = worst.max((lambda[i] * s).abs() / (scale * bscale));
            }
        }
        if !self.b_eq.is_empty() {
            let r = (&self.a_eq * z - &self.b_eq).amax();
            worst = worst.max(r / (T::one() + self.b_eq.amax()));
        }
        worst
    }
}

#[derive(Debug, Clone)]
pub struct QpSolution<T: Real> {
    pub z: DVector<T>,
    /// multipliers of `A_in z <= b_in` (nonnegative)
    pub lambda: DVector<T>,
    /// multipliers of `A_eq z = b_eq`
    pub nu: DVector<T>,
    pub objective: T,
    pub kkt_residual: T,
    /// dual active-set iterations summed over proximal rounds
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct QpOptions {
    /// proximal weight relative to the largest diagonal entry of the reduced Hessian
    pub prox_rel: f64,
    pub max_outer: usize,
    /// per proximal round; 0 picks a size-dependent default
    pub max_iter: usize,
    /// accepted scaled KKT residual
    pub tol: f64,
}

impl Default for QpOptions {
    fn default() -> Self {
        Self { prox_rel: 1e-6, max_outer: 200, max_iter: 0, tol: 1e-8 }
    }
}

pub fn solve_qp<T: Real>(prob: &DenseQp<T>) -> Result<QpSolution<T>, KktError> {
    solve_qp_with(prob, &QpOptions::default())
}

/// Dual active-set (Goldfarb-Idnani) solver.
///
/// Equalities are eliminated through an orthonormal kernel basis, a
/// proximal-point loop makes every subproblem strictly convex, and each
/// round's active set is polished by an exact KKT solve.
pub fn solve_qp_with<T: Real>(prob: &DenseQp<T>, opts: &QpOptions) -> Result<QpSolution<T>, KktError> {
    prob.check()?;
    let el = eliminate_equalities(&prob.a_eq, &prob.b_eq);
    let eq_scale = prob.b_eq.amax() + prob.a_eq.amax() * el.z0.amax();
    if el.residual > T::tol(1e-9) * (T::one() + eq_scale) {
        return Err(KktError::Infeasible);
    }
    let basis = &el.basis;
    let nr = basis.ncols();
    let mut qr = basis.transpose() * &prob.q * basis;
    qr = (&qr + qr.transpose()) * T::lit(0.5);
    let cr = basis.transpose() * (&prob.q * &el.z0 + &prob.c);
    let cin = &prob.a_in * basis;
    let din = &prob.b_in - &prob.a_in * &el.z0;

    let finish = |y: &DVector<T>, lam: DVector<T>, iterations: usize| -> QpSolution<T> {
        let z = &el.z0 + basis * y;
        let nu = if prob.b_eq.is_empty() {
            DVector::zeros(0)
        } else {
            let rest = -(&prob.q * &z + &prob.c + prob.a_in.transpose() * &lam);
            pinv(&prob.a_eq.transpose()) * rest
        };
        let kkt_residual = prob.kkt_residual(&z, &lam, &nu);
        QpSolution { objective: prob.objective(&z), z, lambda: lam, nu, kkt_residual, iterations }
    };

    // constraints that no longer depend on the free variables are checks only
    let row_scale = T::one() + din.amax();
    let mut live = Vec::new();
    for i in 0..cin.nrows() {
        if cin.row(i).amax() > T::tol(1e-13) * (T::one() + prob.a_in.row(i).amax()) {
            live.push(i);
        } else if din[i] < -T::tol(1e-9) * row_scale {
            return Err(KktError::Infeasible);
        }
    }

    if live.is_empty() || nr == 0 {
        let (qp, _) = pinv_symmetric(&qr);
        let y = -(&qp * &cr);
        let stat = (&qr * &y + &cr).amax();
        if stat > T::tol(1e-9) * (T::one() + cr.amax()) {
            return Err(KktError::Unbounded);
        }
        let sol = finish(&y, DVector::zeros(prob.b_in.len()), 0);
        if nr == 0 {
            let slack = &prob.b_in - &prob.a_in * &sol.z;
            if slack.iter().any(|&s| s < -T::tol(1e-9) * row_scale) {
                return Err(KktError::Infeasible);
            }
        }
        return Ok(sol);
    }

    let m = live.len();
    // dual active-set solver works with c_i' y >= b_i
    let mut cmat = DMatrix::zeros(m, nr);
    let mut bvec = DVector::zeros(m);
    for (k, &i) in live.iter().enumerate() {
        cmat.row_mut(k).copy_from(&(-cin.row(i)));
        bvec[k] = -din[i];
    }
    let diag_max = (0..nr).map(|i| qr[(i, i)].abs()).fold(T::zero(), |a, b| a.max(b));
    let eps = T::lit(opts.prox_rel) * diag_max.max(T::one());
    let mut g = qr.clone();
    for i in 0..nr {
        g[(i, i)] += eps;
    }
    let max_iter = if opts.max_iter == 0 { 20 * (nr + m) + 100 } else { opts.max_iter };
    let tol = T::tol(opts.tol);

    let expand = |u_live: &DVector<T>| {
        let mut lam = DVector::zeros(prob.b_in.len());
        for (k, &i) in live.iter().enumerate() {
            lam[i] = u_live[k];
        }
        lam
    };

    let mut y = DVector::zeros(nr);
    let mut iterations = 0;
    let mut best: Option<QpSolution<T>> = None;
    let mut prev_step: Option<DVector<T>> = None;
    for _ in 0..opts.max_outer {
        let a = &cr - &y * eps;
        let gi = goldfarb_idnani(&g, &a, &cmat, &bvec, max_iter)?;
        iterations += gi.iterations;

        // polish on the active set
        if let Some((yp, up)) = polish(&qr, &cr, &cmat, &bvec, &gi.active) {
            let sol = finish(&yp, expand(&up), iterations);
            if sol.kkt_residual <= tol {
                return Ok(sol);
            }
            keep_best(&mut best, sol);
        }
        let step = &gi.x - &y;
        let sol = finish(&gi.x, expand(&gi.u), iterations);
        if sol.kkt_residual <= tol {
            return Ok(sol);
        }
        keep_best(&mut best, sol);
        if recession_direction(&qr, &cr, &cmat, &step, prev_step.as_ref()) {
            return Err(KktError::Unbounded);
        }
        let small = step.amax() <= T::tol(1e-14) * (T::one() + gi.x.amax());
        y = gi.x;
        prev_step = Some(step);
        if small {
            break;
        }
    }
    match best {
        Some(sol) if sol.kkt_residual <= T::lit(1e3) * tol => Ok(sol),
        _ => Err(KktError::MaxIterations(iterations)),
    }
}

fn keep_best<T: Real>(best: &mut Option<QpSolution<T>>, sol: QpSolution<T>) {
    if best.as_ref().is_none_or(|b| sol.kkt_residual < b.kkt_residual) {
        *best = Some(sol);
    }
}

/// Two consecutive proximal steps along the same ray of zero curvature on
/// which the objective decreases and no constraint tightens.
fn recession_direction<T: Real>(
    qr: &DMatrix<T>,
    cr: &DVector<T>,
    cmat: &DMatrix<T>,
    step: &DVector<T>,
    prev: Option<&DVector<T>>,
) -> bool {
    let Some(prev) = prev else { return false };
    let sn = step.norm();
    let pn = prev.norm();
    if sn == T::zero() || pn == T::zero() {
        return false;
    }
    let dir = step / sn;
    if (dir.dot(prev) / pn) < T::lit(1.0 - 1e-9) || sn < pn * T::lit(0.5) {
        return false;
    }
    let curv = (qr * &dir).amax();
    let slope = cr.dot(&dir);
    let tighten = (cmat * &dir).min();
    let small = T::tol(1e-9);
    curv <= small * (T::one() + qr.amax()) && slope < -small * (T::one() + cr.amax()) && tighten >= -small
}

/// Solves the equality-constrained QP with the given constraints held active.
fn polish<T: Real>(
    qr: &DMatrix<T>,
    cr: &DVector<T>,
    cmat: &DMatrix<T>,
    bvec: &DVector<T>,
    active: &[usize],
) -> Option<(DVector<T>, DVector<T>)> {
    let nr = qr.nrows();
    let k = active.len();
    let mut kkt = DMatrix::zeros(nr + k, nr + k);
    kkt.view_mut((0, 0), (nr, nr)).copy_from(qr);
    let mut rhs = DVector::zeros(nr + k);
    rhs.rows_mut(0, nr).copy_from(&(-cr));
    for (j, &i) in active.iter().enumerate() {
        // stationarity: Q y + c - sum u_i c_i = 0
        for col in 0..nr {
            kkt[(col, nr + j)] = -cmat[(i, col)];
            kkt[(nr + j, col)] = -cmat[(i, col)];
        }
        rhs[nr + j] = -bvec[i];
    }
    let (kp, _) = pinv_symmetric(&kkt);
    let sol = kp * rhs;
    let y = sol.rows(0, nr).into_owned();
    let mut u = DVector::zeros(cmat.nrows());
    for (j, &i) in active.iter().enumerate() {
        u[i] = sol[nr + j];
    }
    if u.iter().all(|v| v.is_finite()) && y.iter().all(|v| v.is_finite()) {
        Some((y, u))
    } else {
        None
    }
}

struct GiResult<T: Real> {
    x: DVector<T>,
    /// multipliers for every constraint (zero when inactive)
    u: DVector<T>,
    active: Vec<usize>,
    iterations: usize,
}

fn givens<T: Real>(a: T, b: T) -> (T, T, T) {
    let r = a.hypot(b);
    if r == T::zero() {
        (T::one(), T::zero(), T::zero())
    } else {
        (a / r, b / r, r)
    }
}

/// `J <- J G'` on columns `(i, i+1)` for the rotation `[c s; -s c]`.
fn rotate_cols<T: Real>(j: &mut DMatrix<T>, i: usize, c: T, s: T) {
    for row in 0..j.nrows() {
        let a = j[(row, i)];
        let b = j[(row, i + 1)];
        j[(row, i)] = c * a + s * b;
        j[(row, i + 1)] = -s * a + c * b;
    }
}

/// Strictly convex QP `min 1/2 x'Gx + a'x  s.t.  C x >= b` by the dual
/// method of Goldfarb and Idnani, keeping `J' N_active = [R; 0]` with
/// `J J' = G^{-1}`.
fn goldfarb_idnani<T: Real>(
    g: &DMatrix<T>,
    a: &DVector<T>,
    cmat: &DMatrix<T>,
    b: &DVector<T>,
    max_iter: usize,
) -> Result<GiResult<T>, KktError> {
    let n = g.nrows();
    let m = cmat.nrows();
    let chol = g.clone().cholesky().ok_or(KktError::NotConvex)?;
    let mut j = chol
        .l()
        .transpose()
        .solve_upper_triangular(&DMatrix::identity(n, n))
        .ok_or(KktError::NotConvex)?;
    let mut x = -chol.solve(a);
    let mut r = DMatrix::<T>::zeros(n, n);
    let mut active: Vec<usize> = Vec::new();
    let mut u: Vec<T> = Vec::new();
    let mut is_active = vec![false; m];
    let norms: Vec<T> = (0..m).map(|i| cmat.row(i).norm()).collect();
    let mut iterations = 0;
    let feas_tol = T::tol(1e-12);

    let slack = |x: &DVector<T>, i: usize| cmat.row(i).transpose().dot(x) - b[i];

    loop {
        // most violated constraint, scaled by its normal
        let xs = T::one() + x.amax();
        let mut p = None;
        let mut worst = T::zero();
        for i in 0..m {
            if is_active[i] || norms[i] == T::zero() {
                continue;
            }
            let s = slack(&x, i) / norms[i];
            if s < -feas_tol * (xs + b[i].abs() / norms[i]) && s < worst {
                worst = s;
                p = Some(i);
            }
        }
        let Some(p) = p else { break };
        let np = cmat.row(p).transpose();
        let mut u_plus = T::zero();
        loop {
            iterations += 1;
            if iterations > max_iter {
                return Err(KktError::MaxIterations(iterations));
            }
            let q = active.len();
            let d = j.transpose() * &np;
            let d2n = d.rows(q, n - q).norm();
            let z = j.columns(q, n - q) * d.rows(q, n - q);
            // R r = d1
            let mut rr = DVector::zeros(q);
            for i in (0..q).rev() {
                let mut acc = d[i];
                for k in i + 1..q {
                    acc -= r[(i, k)] * rr[k];
                }
                rr[i] = acc / r[(i, i)];
            }
            let mut t1 = None;
            for k in 0..q {
                if rr[k] > T::zero() {
                    let ratio = u[k] / rr[k];
                    if t1.is_none_or(|(best, _)| ratio < best) {
                        t1 = Some((ratio, k));
                    }
                }
            }
            let sp = slack(&x, p);
            let full = if d2n > T::tol(1e-11) * d.norm() && d2n > T::zero() { Some(-sp / (d2n * d2n)) } else { None };
            match (t1, full) {
                (None, None) => return Err(KktError::Infeasible),
                (Some((t, l)), None) => {
                    for k in 0..q {
                        u[k] -= t * rr[k];
                    }
                    u_plus += t;
                    drop_constraint(&mut j, &mut r, &mut active, &mut u, &mut is_active, l);
                }
                (t1, Some(t2)) => {
                    let partial = t1.filter(|&(t, _)| t < t2);
                    let t = partial.map_or(t2, |(t, _)| t);
                    x += &z * t;
                    for k in 0..q {
                        u[k] -= t * rr[k];
                    }
                    u_plus += t;
                    match partial {
                        None => {
                            add_constraint(&mut j, &mut r, d, q);
                            active.push(p);
                            u.push(u_plus);
                            is_active[p] = true;
                            break;
                        }
                        Some((_, l)) => drop_constraint(&mut j, &mut r, &mut active, &mut u, &mut is_active, l),
                    }
                }
            }
        }
    }
    let mut full_u = DVector::zeros(m);
    for (k, &i) in active.iter().enumerate() {
        full_u[i] = u[k].max(T::zero());
    }
    Ok(GiResult { x, u: full_u, active, iterations })
}

fn add_constraint<T: Real>(j: &mut DMatrix<T>, r: &mut DMatrix<T>, mut d: DVector<T>, q: usize) {
    let n = d.len();
    for i in (q + 1..n).rev() {
        let (c, s, h) = givens(d[i - 1], d[i]);
        d[i - 1] = h;
        d[i] = T::zero();
        rotate_cols(j, i - 1, c, s);
    }
    for i in 0..=q {
        r[(i, q)] = d[i];
    }
}

fn drop_constraint<T: Real>(
    j: &mut DMatrix<T>,
    r: &mut DMatrix<T>,
    active: &mut Vec<usize>,
    u: &mut Vec<T>,
    is_active: &mut [bool],
    k: usize,
) {
    let q = active.len();
    is_active[active[k]] = false;
    active.remove(k);
    u.remove(k);
    for col in k..q - 1 {
        for row in 0..q {
            r[(row, col)] = r[(row, col + 1)];
        }
    }
    for row in 0..q {
        r[(row, q - 1)] = T::zero();
    }
    // restore the triangle: zero the subdiagonal left by the shift
    for col in k..q - 1 {
        let (c, s, h) = givens(r[(col, col)], r[(col + 1, col)]);
        r[(col, col)] = h;
        r[(col + 1, col)] = T::zero();
        for cc in col + 1..q - 1 {
            let a = r[(col, cc)];
            let b = r[(col + 1, cc)];
            r[(col, cc)] = c * a + s * b;
            r[(col + 1, cc)] = -s * a + c * b;
        }
        rotate_cols(j, col, c, s);
    }
}
