//! Experiment configuration read from TOML.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rdlmpc::admm::AdmmParams;
use rdlmpc::constraints::{BoxBounds, CostWeights, ProblemKind};
use rdlmpc::mpc::{ExperimentConfig, SolverKind, BENCHMARK_ACTUATION};
use rdlmpc::sls::SystemModel;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Plant description: a chain (default) or explicit dense matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemSection {
    /// number of subsystems of the chain
    pub n: usize,
    pub alpha: f64,
    pub kappa: f64,
    /// actuation gains; the benchmark pattern repeated when unset
    pub beta: Option<Vec<f64>>,
    /// explicit `A` (rows); overrides the chain
    pub a: Option<Vec<Vec<f64>>>,
    pub b: Option<Vec<Vec<f64>>>,
    pub state_dims: Option<Vec<usize>>,
    pub input_dims: Option<Vec<usize>>,
    /// locality radius `d`
    pub radius: usize,
    /// `|x|` bound for actuated chain nodes
    pub x_bound_actuated: f64,
    /// `|x|` bound for the other chain nodes
    pub x_bound_unactuated: f64,
    /// per-state bounds; override the two above
    pub x_bounds: Option<Vec<f64>>,
    /// `|u|` bound, unconstrained when unset
    pub u_bound: Option<f64>,
}

impl Default for SystemSection {
    fn default() -> Self {
        Self {
            n: 10,
            alpha: 0.8,
            kappa: 2.0,
            beta: None,
            a: None,
            b: None,
            state_dims: None,
            input_dims: None,
            radius: 3,
            x_bound_actuated: 1.5,
            x_bound_unactuated: 20.0,
            x_bounds: None,
            u_bound: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub horizon: usize,
    pub t_sim: usize,
    pub sigma: f64,
    pub seeds: Vec<u64>,
    pub modes: Vec<ProblemKind>,
    pub solver: SolverKind,
    /// diagonal state weight
    pub q: f64,
    /// diagonal input weight
    pub r: f64,
    /// fixed initial state; drawn per seed when unset
    pub x0: Option<Vec<f64>>,
    /// half-width of the box the initial state is drawn from, clipped to
    /// the state bounds; the whole state box when unset
    pub x0_box: Option<f64>,
    pub warm_start: bool,
    pub allow_unconverged: bool,
    /// slack allowed before a state counts as violating its bound
    pub violation_tol: f64,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            horizon: 5,
            t_sim: 20,
            sigma: 1.0,
            seeds: (0..5).collect(),
            modes: vec![ProblemKind::Robust, ProblemKind::Nominal],
            solver: SolverKind::Monolithic,
            q: 1.0,
            r: 1.0,
            x0: None,
            x0_box: Some(1.5),
            warm_start: false,
            allow_unconverged: false,
            violation_tol: 1e-6,
        }
    }
}

/// Runtime sweeps over the network size and the locality radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub sizes: Vec<usize>,
    /// radius used in the size sweep
    pub size_radius: usize,
    pub radii: Vec<usize>,
    /// chain length used in the radius sweep
    pub radius_size: usize,
    /// closed-loop steps per point
    pub steps: usize,
    pub seeds: Vec<u64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self { sizes: vec![10, 20, 40, 80], size_radius: 3, radii: vec![1, 2, 3, 4], radius_size: 20, steps: 5, seeds: vec![0] }
    }
}

/// Overrides of [`AdmmParams::closed_loop`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdmmSection {
    pub rho0: Option<f64>,
    pub tau: Option<f64>,
    pub mu1: Option<f64>,
    pub mu2: Option<f64>,
    pub rho_max: Option<f64>,
    pub eps_p: Option<f64>,
    pub eps_d: Option<f64>,
    pub max_iters: Option<usize>,
    pub freeze_after: Option<usize>,
    pub scale_tolerances: Option<bool>,
    pub audit_mask: Option<bool>,
}

impl AdmmSection {
    pub fn params(&self) -> AdmmParams {
        let d = AdmmParams::closed_loop();
        AdmmParams {
            rho0: self.rho0.unwrap_or(d.rho0),
            tau: self.tau.unwrap_or(d.tau),
            mu1: self.mu1.unwrap_or(d.mu1),
            mu2: self.mu2.unwrap_or(d.mu2),
            rho_max: self.rho_max.unwrap_or(d.rho_max),
            eps_p: self.eps_p.unwrap_or(d.eps_p),
            eps_d: self.eps_d.unwrap_or(d.eps_d),
            max_iters: self.max_iters.unwrap_or(d.max_iters),
            freeze_after: self.freeze_after.unwrap_or(d.freeze_after),
            scale_tolerances: self.scale_tolerances.unwrap_or(d.scale_tolerances),
            audit_mask: self.audit_mask.unwrap_or(d.audit_mask),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub system: SystemSection,
    pub experiment: ExperimentSection,
    pub admm: AdmmSection,
    pub sweep: SweepSection,
}

fn matrix(rows: &[Vec<f64>], name: &str) -> Result<DMatrix<f64>, CliError> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(CliError::Config(format!("system.{name}: rows have different lengths")));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let e = &self.experiment;
        if e.seeds.is_empty() {
            return Err(CliError::Config("experiment.seeds: at least one seed is required".into()));
        }
        if e.modes.is_empty() {
            return Err(CliError::Config("experiment.modes: at least one mode is required".into()));
        }
        if e.violation_tol.is_nan() || e.violation_tol < 0.0 {
            return Err(CliError::Config("experiment.violation_tol must be nonnegative".into()));
        }
        if let Some(b) = e.x0_box {
            if b.is_nan() || b < 0.0 {
                return Err(CliError::Config("experiment.x0_box must be nonnegative".into()));
            }
        }
        if self.system.a.is_none() && self.system.n == 0 {
            return Err(CliError::Config("system.n must be positive".into()));
        }
        self.admm.params().validate().map_err(|e| CliError::Config(format!("admm: {e}")))?;
        self.model()?;
        Ok(())
    }

    fn actuation(&self) -> Vec<f64> {
        match &self.system.beta {
            Some(b) => b.clone(),
            None => (0..self.system.n).map(|i| if BENCHMARK_ACTUATION[i % 10] { 1.0 } else { 0.0 }).collect(),
        }
    }

    pub fn model(&self) -> Result<SystemModel<f64>, CliError> {
        let s = &self.system;
        let model = match (&s.a, &s.b) {
            (Some(a), Some(b)) => {
                let a = matrix(a, "a")?;
                let b = matrix(b, "b")?;
                let n = a.nrows();
                let sd = s.state_dims.clone().unwrap_or_else(|| vec![1; n]);
                let id = s.input_dims.clone().unwrap_or_else(|| vec![1; sd.len()]);
                SystemModel::new(sd, id, a, b)
            }
            (None, None) => {
                let beta = self.actuation();
                if beta.len() != s.n {
                    return Err(CliError::Config(format!("system.beta has {} entries, n = {}", beta.len(), s.n)));
                }
                SystemModel::chain(s.alpha, s.kappa, &beta)
            }
            _ => return Err(CliError::Config("system.a and system.b must be given together".into())),
        };
        model.map_err(|e| CliError::Config(format!("system: {e}")))
    }

    pub fn bounds(&self, model: &SystemModel<f64>) -> Result<BoxBounds<f64>, CliError> {
        let s = &self.system;
        let n = model.n_states();
        let x = match &s.x_bounds {
            Some(v) if v.len() == n => v.clone(),
            Some(v) => return Err(CliError::Config(format!("system.x_bounds has {} entries, model has {n} states", v.len()))),
            None if s.a.is_some() => vec![s.x_bound_actuated; n],
            None => self
                .actuation()
                .iter()
                .map(|&b| if b != 0.0 { s.x_bound_actuated } else { s.x_bound_unactuated })
                .collect(),
        };
        let u = vec![s.u_bound.unwrap_or(f64::INFINITY); model.n_inputs()];
        Ok(BoxBounds::symmetric(&x, &u))
    }

    /// Library configuration for one mode.
    pub fn experiment(&self, mode: ProblemKind) -> Result<ExperimentConfig<f64>, CliError> {
        let model = self.model()?;
        let e = &self.experiment;
        let bounds = self.bounds(&model)?;
        let x0 = match &e.x0 {
            Some(v) if v.len() == model.n_states() => Some(DVector::from_column_slice(v)),
            Some(v) => {
                return Err(CliError::Config(format!(
                    "experiment.x0 has {} entries, model has {} states",
                    v.len(),
                    model.n_states()
                )))
            }
            None => None,
        };
        Ok(ExperimentConfig {
            cost: CostWeights { q: vec![e.q; model.n_states()], r: vec![e.r; model.n_inputs()] },
            horizon: e.horizon,
            t_sim: e.t_sim,
            radius: self.system.radius,
            bounds,
            sigma: e.sigma,
            admm: self.admm.params(),
            mode,
            solver: e.solver,
            x0,
            x0_box: e.x0_box,
            warm_start: e.warm_start,
            allow_unconverged: e.allow_unconverged,
            model,
        })
    }
}
