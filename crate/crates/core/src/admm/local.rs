use nalgebra::DVector;

use super::kernels::{h_row_update, h_times_psi, phi_row_update, xi_times_g};
use super::layout::{SubsystemLayout, TargetSource};
use super::AdmmError;
use crate::Real;

/// Everything subsystem `i` stores between iterations: its row blocks of
/// `Phi`, `Omega`, `Xi` with their scaled multipliers, its column block of
/// `Psi`, and the views of `Psi` / `H Psi` restricted to its rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsystemAdmmState<T: Real> {
    pub phi_row: Vec<DVector<T>>,
    pub lambda1: Vec<DVector<T>>,
    pub omega_row: Vec<DVector<T>>,
    pub lambda2: Vec<DVector<T>>,
    pub xi_row: Vec<DVector<T>>,
    /// `Xi G` of every owned `H` row, kept next to `xi_row`
    pub xig_row: Vec<DVector<T>>,
    pub lambda3: Vec<DVector<T>>,
    pub psi_col: Vec<DVector<T>>,
    pub psi_view: Vec<DVector<T>>,
    pub hpsi_view: Vec<DVector<T>>,
    pub rho: T,
}

/// Squared local norms produced by one iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalResiduals<T: Real> {
    /// `|Phi~ - H~ Psi~|^2` over owned rows
    pub primal_sq: T,
    /// `|Psi^{k+1} - Psi^k|^2` over owned rows
    pub psi_change_sq: T,
    /// `|H~ (Psi~^{k+1} - Psi~^k)|^2` over owned rows
    pub hpsi_change_sq: T,
}

impl<T: Real> SubsystemAdmmState<T> {
    pub fn zeros(sub: &SubsystemLayout<T>, rho: T) -> Self {
        let first = |v: &Vec<usize>| DVector::zeros(v.len());
        Self {
            phi_row: sub.rows.iter().map(|r| DVector::zeros(r.n_first)).collect(),
            lambda1: sub.rows.iter().map(|r| DVector::zeros(r.n_first)).collect(),
            omega_row: sub.h_rows.iter().map(|h| first(&h.first_cols)).collect(),
            lambda2: sub.h_rows.iter().map(|h| first(&h.first_cols)).collect(),
            xi_row: sub.h_rows.iter().map(|h| DVector::zeros(h.xi_rows.len())).collect(),
            xig_row: sub.h_rows.iter().map(|h| first(&h.rest_cols)).collect(),
            lambda3: sub.h_rows.iter().map(|h| first(&h.rest_cols)).collect(),
            psi_col: sub.cols.iter().map(|c| DVector::zeros(c.rows.len())).collect(),
            psi_view: sub.rows.iter().map(|r| DVector::zeros(r.cols.len())).collect(),
            hpsi_view: sub.h_rows.iter().map(|h| DVector::zeros(h.width())).collect(),
            rho,
        }
    }

    /// Checks every block has exactly the length its layout prescribes, i.e.
    /// no entry outside the mask can be represented.
    pub fn matches(&self, sub: &SubsystemLayout<T>) -> bool {
        let rows = sub.rows.iter().enumerate().all(|(k, r)| {
            self.phi_row[k].len() == r.n_first && self.lambda1[k].len() == r.n_first && self.psi_view[k].len() == r.cols.len()
        });
        let hs = sub.h_rows.iter().enumerate().all(|(k, h)| {
            self.omega_row[k].len() == h.first_cols.len()
                && self.lambda2[k].len() == h.first_cols.len()
                && self.xi_row[k].len() == h.xi_rows.len()
                && self.xig_row[k].len() == h.rest_cols.len()
                && self.lambda3[k].len() == h.rest_cols.len()
                && self.hpsi_view[k].len() == h.width()
        });
        let cols = sub.cols.iter().enumerate().all(|(k, c)| self.psi_col[k].len() == c.rows.len());
        rows && hs && cols
            && self.phi_row.len() == sub.rows.len()
            && self.omega_row.len() == sub.h_rows.len()
            && self.psi_col.len() == sub.cols.len()
    }

    /// Row step: new `Phi`, `Omega`, `Xi` blocks from the current views.
    /// `x0` only needs to be correct on the columns of owned rows.
    pub fn row_update(&mut self, sub: &SubsystemLayout<T>, x0: &DVector<T>) -> Result<(), AdmmError> {
        for (k, spec) in sub.rows.iter().enumerate() {
            let x = DVector::from_iterator(spec.n_first, spec.cols[..spec.n_first].iter().map(|&c| x0[c]));
            let a = self.psi_view[k].rows(0, spec.n_first) - &self.lambda1[k];
            self.phi_row[k] = phi_row_update(spec.weight, &x, &a, self.rho);
        }
        for (k, spec) in sub.h_rows.iter().enumerate() {
            let x = DVector::from_iterator(spec.first_cols.len(), spec.first_cols.iter().map(|&c| x0[c]));
            let n1 = spec.first_cols.len();
            let mut target = self.hpsi_view[k].clone();
            {
                let mut head = target.rows_mut(0, n1);
                head -= &self.lambda2[k];
            }
            {
                let mut tail = target.rows_mut(n1, spec.rest_cols.len());
                tail -= &self.lambda3[k];
            }
            let (omega, xi) = h_row_update(spec, &x, &target)
                .ok_or(AdmmError::LocalInfeasible { subsystem: sub.id, h_row: spec.index })?;
            self.xig_row[k] = xi_times_g(spec, &xi);
            self.omega_row[k] = omega;
            self.xi_row[k] = xi;
        }
        Ok(())
    }

    /// Value of `Phi~ + Lambda` read by a column owner.
    pub fn target(&self, source: TargetSource) -> T {
        match source {
            TargetSource::Phi { row, pos, .. } => self.phi_row[row][pos] + self.lambda1[row][pos],
            TargetSource::Omega { hrow, pos, .. } => self.omega_row[hrow][pos] + self.lambda2[hrow][pos],
            TargetSource::XiG { hrow, pos, .. } => self.xig_row[hrow][pos] + self.lambda3[hrow][pos],
        }
    }

    /// Multiplier step once the new row views of `Psi` have arrived; returns
    /// the local residuals.
    pub fn finish(&mut self, sub: &SubsystemLayout<T>, psi_view: Vec<DVector<T>>) -> LocalResiduals<T> {
        let mut primal_sq = T::zero();
        let mut psi_change_sq = T::zero();
        let mut hpsi_change_sq = T::zero();
        for (k, spec) in sub.rows.iter().enumerate() {
            let nf = spec.n_first;
            let diff = &self.phi_row[k] - psi_view[k].rows(0, nf);
            primal_sq += diff.norm_squared();
            self.lambda1[k] += &diff;
            let change = &psi_view[k] - &self.psi_view[k];
            psi_change_sq += change.norm_squared();
            hpsi_change_sq += change.rows(0, nf).norm_squared();
        }
        for (k, spec) in sub.h_rows.iter().enumerate() {
            let n1 = spec.first_cols.len();
            let hpsi = h_times_psi(spec, &psi_view);
            let d1 = &self.omega_row[k] - hpsi.rows(0, n1);
            let d3 = &self.xig_row[k] - hpsi.rows(n1, spec.rest_cols.len());
            primal_sq += d1.norm_squared() + d3.norm_squared();
            self.lambda2[k] += &d1;
            self.lambda3[k] += &d3;
            hpsi_change_sq += (&hpsi - &self.hpsi_view[k]).norm_squared();
            self.hpsi_view[k] = hpsi;
        }
        self.psi_view = psi_view;
        LocalResiduals { primal_sq, psi_change_sq, hpsi_change_sq }
    }

    /// Keeps `rho * Lambda` fixed when the penalty moves.
    pub fn set_rho(&mut self, rho: T) {
        if rho == self.rho {
            return;
        }
        let factor = self.rho / rho;
        for v in self.lambda1.iter_mut().chain(self.lambda2.iter_mut()).chain(self.lambda3.iter_mut()) {
            *v *= factor;
        }
        self.rho = rho;
    }

    /// `Psi_r{1} x0` for an owned row, e.g. a first input.
    pub fn first_input(&self, sub: &SubsystemLayout<T>, owned_row: usize, x0: &DVector<T>) -> T {
        let spec = &sub.rows[owned_row];
        spec.cols[..spec.n_first]
            .iter()
            .enumerate()
            .fold(T::zero(), |acc, (j, &c)| acc + self.psi_view[owned_row][j] * x0[c])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::admm::AdmmLayout;
    use crate::constraints::ProblemKind;
    use crate::testing::Chain;

    #[test]
    fn rescaling_keeps_the_unscaled_multiplier() {
        let p = Chain::<f64>::new(3, 1, 2).problem(&[1.0, 0.5, -1.0], ProblemKind::Robust);
        let layout = AdmmLayout::new(&p).unwrap();
        let mut s = SubsystemAdmmState::zeros(&layout.subsystems[1], 2.0);
        assert!(s.matches(&layout.subsystems[1]));
        assert!(!s.matches(&layout.subsystems[0]) || layout.subsystems[0].rows.len() == layout.subsystems[1].rows.len());
        for v in s.lambda1.iter_mut().chain(s.lambda2.iter_mut()).chain(s.lambda3.iter_mut()) {
            v.fill(3.0);
        }
        s.set_rho(6.0);
        assert_eq!(s.rho, 6.0);
        assert!(s.lambda1.iter().chain(&s.lambda2).chain(&s.lambda3).all(|v| v.iter().all(|&x| x == 1.0)));
    }
}
