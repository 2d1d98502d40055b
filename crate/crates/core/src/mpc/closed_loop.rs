use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::disturbance::{draw_initial_state, generate_disturbance};
use super::trajectory::{evaluate_cost, NetworkStats, StepStats, Trajectory};
use super::MpcError;
use crate::admm::{AdmmEngine, AdmmError, AdmmParams, IterationRecord, SubsystemAdmmState};
use crate::constraints::{
    assemble_robust_problem, build_box_constraints, build_disturbance_polytope, BoxBounds, BoxOptions, CostWeights,
    ProblemKind, RobustConstraintData, RobustProblem,
};
use crate::network::Network;
use crate::sls::{build_locality_mask, LocalityMask, SystemModel};
use crate::Real;

/// Which execution of the iteration produces the inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    #[default]
    Monolithic,
    Distributed,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig<T: Real> {
    pub model: SystemModel<T>,
    /// prediction horizon `T`
    pub horizon: usize,
    /// closed-loop length
    pub t_sim: usize,
    pub radius: usize,
    pub bounds: BoxBounds<T>,
    /// `|w_i| <= sigma`
    pub sigma: T,
    pub cost: CostWeights<T>,
    pub admm: AdmmParams,
    pub mode: ProblemKind,
    pub solver: SolverKind,
    /// initial state; drawn from the state box with the run's seed when unset
    pub x0: Option<DVector<T>>,
    /// caps the box `x0` is drawn from
    pub x0_box: Option<T>,
    /// reuse the previous step's iterates
    pub warm_start: bool,
    /// apply the last iterate instead of failing when the iteration limit is hit
    pub allow_unconverged: bool,
}

/// Actuation of the ten-node benchmark chain, repeated for longer chains.
pub const BENCHMARK_ACTUATION: [bool; 10] = [true, false, true, false, true, true, false, true, false, true];

impl<T: Real> ExperimentConfig<T> {
    /// Benchmark chain: `alpha = 0.8`, `kappa = 2`, horizon 5, 20 steps,
    /// `|x_i| <= 1.5` on actuated nodes and 20 elsewhere, free inputs,
    /// `sigma = 1`, identity weights, robust mode. Initial states are drawn
    /// with every entry capped at 1.5.
    pub fn chain_benchmark(n: usize, radius: usize) -> Result<Self, MpcError> {
        let actuated: Vec<bool> = (0..n).map(|i| BENCHMARK_ACTUATION[i % 10]).collect();
        let beta: Vec<T> = actuated.iter().map(|&a| if a { T::one() } else { T::zero() }).collect();
        let model = SystemModel::chain(T::lit(0.8), T::lit(2.0), &beta).map_err(|e| MpcError::Config(e.to_string()))?;
        let x_bound: Vec<T> = actuated.iter().map(|&a| T::lit(if a { 1.5 } else { 20.0 })).collect();
        Ok(Self {
            horizon: 5,
            t_sim: 20,
            radius,
            bounds: BoxBounds::symmetric(&x_bound, &vec![T::lit(f64::INFINITY); n]),
            sigma: T::one(),
            cost: CostWeights::identity(n, n),
            admm: AdmmParams::closed_loop(),
            mode: ProblemKind::Robust,
            solver: SolverKind::Monolithic,
            x0: None,
            x0_box: Some(T::lit(1.5)),
            warm_start: false,
            allow_unconverged: false,
            model,
        })
    }

    /// Indices of the states with a finite bound tighter than `limit`.
    pub fn tight_states(&self, limit: T) -> Vec<usize> {
        (0..self.bounds.x_max.len()).filter(|&s| self.bounds.x_max[s] <= limit).collect()
    }

    pub fn validate(&self) -> Result<(), MpcError> {
        if self.horizon == 0 {
            return Err(MpcError::Config("horizon must be at least 1".into()));
        }
        if self.t_sim == 0 {
            return Err(MpcError::Config("t_sim must be at least 1".into()));
        }
        if self.sigma < T::zero() {
            return Err(MpcError::Config("sigma must be nonnegative".into()));
        }
        if let Some(x0) = &self.x0 {
            if x0.len() != self.model.n_states() {
                return Err(MpcError::Config(format!("x0 has {} entries, model has {} states", x0.len(), self.model.n_states())));
            }
        }
        self.admm.validate().map_err(MpcError::Setup)
    }

    pub fn mask(&self) -> LocalityMask {
        build_locality_mask(&self.model, self.radius, self.horizon)
    }

    /// Box constraints over the horizon with the disturbance box attached.
    pub fn constraint_data(&self) -> Result<RobustConstraintData<T>, MpcError> {
        let data = build_box_constraints(&self.model, std::slice::from_ref(&self.bounds), self.horizon, BoxOptions::default())?;
        Ok(data.with_disturbance(build_disturbance_polytope(&self.model, self.sigma, self.horizon)?))
    }

    /// The problem at `x0` in this configuration's mode.
    pub fn problem(&self, x0: &DVector<T>) -> Result<RobustProblem<T>, MpcError> {
        Ok(assemble_robust_problem(&self.model, &self.mask(), &self.constraint_data()?, x0, &self.cost, self.mode)?)
    }
}

#[derive(Debug, Clone)]
pub struct StepResult<T: Real> {
    pub u: DVector<T>,
    pub stats: StepStats,
    pub trace: Vec<IterationRecord>,
}

enum Backend<T: Real> {
    Monolithic(AdmmEngine<T>),
    Distributed(Network<T>),
}

/// Holds the x0-independent solver setup and the warm-start iterates.
pub struct MpcController<T: Real> {
    backend: Backend<T>,
    params: AdmmParams,
    warm_start: bool,
    allow_unconverged: bool,
    previous: Option<Vec<SubsystemAdmmState<T>>>,
}

impl<T: Real> MpcController<T> {
    pub fn new(config: &ExperimentConfig<T>) -> Result<Self, MpcError> {
        config.validate()?;
        let problem = config.problem(&DVector::zeros(config.model.n_states()))?;
        let backend = match config.solver {
            SolverKind::Monolithic => Backend::Monolithic(AdmmEngine::new(&problem).map_err(MpcError::Setup)?),
            SolverKind::Distributed => Backend::Distributed(Network::new(&problem).map_err(MpcError::Setup)?),
        };
        Ok(Self {
            backend,
            params: config.admm,
            warm_start: config.warm_start,
            allow_unconverged: config.allow_unconverged,
            previous: None,
        })
    }

    /// Solves at the measured state `x` and returns the first input.
    pub fn step(&mut self, time: usize, x: &DVector<T>) -> Result<StepResult<T>, MpcError> {
        let start = Instant::now();
        let warm = if self.warm_start { self.previous.take() } else { None };
        let wrap = |source: AdmmError| MpcError::Solver { time, source };
        let (u, converged, iterations, status, states, trace, network) = match &self.backend {
            Backend::Monolithic(engine) => {
                let out = match warm {
                    Some(s) => engine.solve_from(x, &self.params, s),
                    None => engine.solve(x, &self.params),
                }
                .map_err(wrap)?;
                (out.u0, out.converged, out.iterations, out.status, out.states, out.trace, None)
            }
            Backend::Distributed(net) => {
                let out = net.run(x, &self.params, warm).map_err(wrap)?;
                let nodes = out.node_seconds.len().max(1) as f64;
                let sent = &out.comm.sent_per_iteration;
                let stats = NetworkStats {
                    mean_node_seconds: out.node_seconds.iter().sum::<f64>() / nodes,
                    max_node_seconds: out.node_seconds.iter().copied().fold(0.0, f64::max),
                    critical_path_seconds: out.critical_path_seconds,
                    messages: out.comm.messages,
                    messages_per_node_iteration: sent.iter().sum::<f64>() / sent.len().max(1) as f64,
                    max_hops: out.comm.max_hops,
                    bytes: out.comm.bytes,
                };
                (out.u0, out.converged, out.iterations, out.status, out.states, out.trace, Some(stats))
            }
        };
        if !converged && !self.allow_unconverged {
            return Err(wrap(AdmmError::NotConverged {
                iterations,
                primal: status.primal_residual,
                dual: status.dual_residual,
            }));
        }
        if self.warm_start {
            self.previous = Some(states);
        }
        Ok(StepResult {
            u,
            stats: StepStats {
                iterations,
                converged,
                primal_residual: status.primal_residual,
                dual_residual: status.dual_residual,
                solve_seconds: start.elapsed().as_secs_f64(),
                network,
            },
            trace,
        })
    }
}

/// Simulates `t_sim` receding-horizon steps. `seed` drives the disturbance
/// and, when `config.x0` is unset, the initial state.
pub fn run_closed_loop<T: Real>(config: &ExperimentConfig<T>, seed: u64) -> Result<Trajectory<T>, MpcError> {
    let mut controller = MpcController::new(config)?;
    let x0 = match &config.x0 {
        Some(x) => x.clone(),
        None => draw_initial_state(seed, &config.bounds, config.x0_box)?,
    };
    let n = config.model.n_states();
    let disturbances = generate_disturbance(seed, config.sigma, n, config.t_sim);
    let mut states = vec![x0];
    let mut inputs = Vec::with_capacity(config.t_sim);
    let mut stats = Vec::with_capacity(config.t_sim);
    let mut traces = Vec::with_capacity(config.t_sim);
    for (t, w) in disturbances.iter().enumerate() {
        let step = controller.step(t, &states[t])?;
        states.push(config.model.step(&states[t], &step.u, w));
        inputs.push(step.u);
        stats.push(step.stats);
        traces.push(step.trace);
    }
    let mut traj = Trajectory { states, inputs, disturbances, stats, traces, cost: T::zero() };
    traj.cost = evaluate_cost(&traj, &config.cost);
    Ok(traj)
}

/// First block column `Phi{1}` of the disturbance-free problem at `x0`
/// (rows of the stacked response, `n` columns), with the solver outcome.
pub fn nominal_solve<T: Real>(
    model: &SystemModel<T>,
    mask: &LocalityMask,
    data: &RobustConstraintData<T>,
    x0: &DVector<T>,
    cost: &CostWeights<T>,
    params: &AdmmParams,
) -> Result<(DMatrix<T>, crate::admm::AdmmOutcome<T>), MpcError> {
    let problem = assemble_robust_problem(model, mask, data, x0, cost, ProblemKind::Nominal)?;
    let engine = AdmmEngine::new(&problem).map_err(MpcError::Setup)?;
    let out = engine.solve(x0, params).map_err(|source| MpcError::Solver { time: 0, source })?;
    let sol = engine.assemble(&out.states);
    let first = sol.psi.columns(0, model.n_states()).into_owned();
    Ok((first, out))
}
