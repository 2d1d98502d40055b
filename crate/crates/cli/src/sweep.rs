use std::path::Path;

use clap::ValueEnum;
use log::info;
use rdlmpc::constraints::ProblemKind;
use rdlmpc::mpc::{run_closed_loop, SolverKind};
use serde::{Deserialize, Serialize};

use crate::{CliError, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    /// chain length at fixed radius
    Size,
    /// radius at fixed chain length
    Radius,
}

/// Distributed runtime statistics of one sweep point, averaged over all
/// solves.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub kind: SweepKind,
    pub n: usize,
    pub radius: usize,
    pub solves: usize,
    pub mean_iterations: f64,
    /// compute per node per solve, averaged over nodes
    pub node_seconds_per_solve: f64,
    pub node_seconds_per_iteration: f64,
    /// slowest node per iteration
    pub critical_path_per_iteration: f64,
    pub messages_per_node_iteration: f64,
    pub max_hops: usize,
}

/// Robust closed loops with the distributed solver at every point of the
/// sweep; writes `sweep_<kind>.csv` when `out` is set.
pub fn run_sweep(cfg: &RunConfig, kind: SweepKind, out: Option<&Path>) -> Result<Vec<SweepPoint>, CliError> {
    let s = &cfg.sweep;
    let points: Vec<(usize, usize)> = match kind {
        SweepKind::Size => s.sizes.iter().map(|&n| (n, s.size_radius)).collect(),
        SweepKind::Radius => s.radii.iter().map(|&d| (s.radius_size, d)).collect(),
    };
    let mut rows = Vec::new();
    for (n, radius) in points {
        let mut c = cfg.clone();
        c.system.n = n;
        c.system.radius = radius;
        c.system.beta = None;
        c.system.x_bounds = None;
        c.experiment.t_sim = s.steps;
        c.experiment.solver = SolverKind::Distributed;
        let ex = c.experiment(ProblemKind::Robust)?;
        let mut stats = Vec::new();
        for &seed in &s.seeds {
            let traj = run_closed_loop(&ex, seed).map_err(|e| CliError::Solver(format!("sweep n={n} d={radius}: {e}")))?;
            stats.extend(traj.stats);
        }
        let solves = stats.len().max(1) as f64;
        let iters: usize = stats.iter().map(|s| s.iterations).sum();
        let net: Vec<_> = stats.iter().filter_map(|s| s.network).collect();
        let node: f64 = net.iter().map(|x| x.mean_node_seconds).sum();
        let crit: f64 = net.iter().map(|x| x.critical_path_seconds).sum();
        let point = SweepPoint {
            kind,
            n,
            radius,
            solves: stats.len(),
            mean_iterations: iters as f64 / solves,
            node_seconds_per_solve: node / solves,
            node_seconds_per_iteration: node / iters.max(1) as f64,
            critical_path_per_iteration: crit / iters.max(1) as f64,
            messages_per_node_iteration: net.iter().map(|x| x.messages_per_node_iteration).sum::<f64>() / solves,
            max_hops: net.iter().map(|x| x.max_hops).max().unwrap_or(0),
        };
        info!("sweep n={n} d={radius}: {:.3e} s per node per solve", point.node_seconds_per_solve);
        rows.push(point);
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        let name = match kind {
            SweepKind::Size => "sweep_size.csv",
            SweepKind::Radius => "sweep_radius.csv",
        };
        let mut w = csv::Writer::from_path(dir.join(name))?;
        for r in &rows {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    Ok(rows)
}
