use std::path::Path;

use log::info;
use rdlmpc::constraints::ProblemKind;
use rdlmpc::mpc::run_closed_loop;
use serde::Serialize;

use crate::output::{write_trace, write_trajectory};
use crate::sweep::SweepPoint;
use crate::{CliError, RunConfig};

/// One closed-loop run. Timing is kept out so the record only depends on
/// the configuration and the seed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedRun {
    pub mode: ProblemKind,
    pub seed: u64,
    pub cost: f64,
    /// largest bound excess over all states and times
    pub max_violation: f64,
    pub violated: bool,
    pub iterations: Vec<usize>,
    pub unconverged_steps: usize,
    pub trajectory_file: Option<String>,
    pub trace_file: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeSummary {
    pub mode: ProblemKind,
    pub runs: usize,
    pub mean_cost: f64,
    /// sample standard deviation
    pub std_cost: f64,
    /// runs with at least one violation
    pub violations: usize,
    pub mean_iterations: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairedCost {
    pub seed: u64,
    pub robust: f64,
    pub nominal: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub pairs: Vec<PairedCost>,
    /// mean robust cost over mean nominal cost
    pub ratio_of_means: f64,
    pub mean_ratio: f64,
    pub std_ratio: f64,
    pub robust_violations: usize,
    pub nominal_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub runs: Vec<SeedRun>,
    pub modes: Vec<ModeSummary>,
    pub comparison: Option<Comparison>,
    pub sweeps: Vec<SweepPoint>,
}

impl RunReport {
    /// Robust runs that left the state bounds.
    pub fn robust_violations(&self) -> usize {
        self.runs.iter().filter(|r| r.mode == ProblemKind::Robust && r.violated).count()
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 { v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

fn mode_name(mode: ProblemKind) -> &'static str {
    match mode {
        ProblemKind::Robust => "robust",
        ProblemKind::Nominal => "nominal",
    }
}

/// Runs every configured mode and seed; with `out` set, writes one
/// trajectory and one trace CSV per run.
pub fn run_experiment(cfg: &RunConfig, out: Option<&Path>) -> Result<RunReport, CliError> {
    cfg.validate()?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
    }
    let mut runs = Vec::new();
    for &mode in &cfg.experiment.modes {
        let ex = cfg.experiment(mode)?;
        let coords: Vec<usize> = (0..ex.model.n_states()).filter(|&s| ex.bounds.x_max[s].is_finite() || ex.bounds.x_min[s].is_finite()).collect();
        for &seed in &cfg.experiment.seeds {
            let traj = run_closed_loop(&ex, seed).map_err(|e| CliError::Solver(format!("{} seed {seed}: {e}", mode_name(mode))))?;
            let max_violation = traj.state_violation(&ex.bounds, &coords);
            let mut run = SeedRun {
                mode,
                seed,
                cost: traj.cost,
                max_violation,
                violated: max_violation > cfg.experiment.violation_tol,
                iterations: traj.stats.iter().map(|s| s.iterations).collect(),
                unconverged_steps: traj.stats.iter().filter(|s| !s.converged).count(),
                trajectory_file: None,
                trace_file: None,
            };
            if let Some(dir) = out {
                let tname = format!("trajectory_{}_seed{seed}.csv", mode_name(mode));
                let iname = format!("trace_{}_seed{seed}.csv", mode_name(mode));
                write_trajectory(&dir.join(&tname), &ex.model, &traj)?;
                write_trace(&dir.join(&iname), &traj.traces)?;
                run.trajectory_file = Some(tname);
                run.trace_file = Some(iname);
            }
            info!("{} seed {seed}: cost {:.4} violation {:.3e}", mode_name(mode), run.cost, run.max_violation);
            runs.push(run);
        }
    }
    let modes = cfg
        .experiment
        .modes
        .iter()
        .map(|&mode| {
            let mine: Vec<&SeedRun> = runs.iter().filter(|r| r.mode == mode).collect();
            let costs: Vec<f64> = mine.iter().map(|r| r.cost).collect();
            let (mean_cost, std_cost) = mean_std(&costs);
            let steps: usize = mine.iter().map(|r| r.iterations.len()).sum();
            let iters: usize = mine.iter().flat_map(|r| r.iterations.iter()).sum();
            ModeSummary {
                mode,
                runs: mine.len(),
                mean_cost,
                std_cost,
                violations: mine.iter().filter(|r| r.violated).count(),
                mean_iterations: iters as f64 / steps.max(1) as f64,
            }
        })
        .collect();
    let mut report = RunReport { config: cfg.clone(), runs, modes, comparison: None, sweeps: Vec::new() };
    report.comparison = compare_modes(&report).ok();
    Ok(report)
}

/// Pairs robust and nominal runs by seed.
pub fn compare_modes(report: &RunReport) -> Result<Comparison, CliError> {
    let of = |mode| report.runs.iter().filter(move |r: &&SeedRun| r.mode == mode);
    for mode in [ProblemKind::Robust, ProblemKind::Nominal] {
        if of(mode).next().is_none() {
            return Err(CliError::MissingMode(mode));
        }
    }
    let pairs: Vec<PairedCost> = of(ProblemKind::Robust)
        .filter_map(|r| {
            of(ProblemKind::Nominal)
                .find(|n| n.seed == r.seed)
                .map(|n| PairedCost { seed: r.seed, robust: r.cost, nominal: n.cost, ratio: r.cost / n.cost })
        })
        .collect();
    let ratios: Vec<f64> = pairs.iter().map(|p| p.ratio).collect();
    let (mean_ratio, std_ratio) = mean_std(&ratios);
    let robust: Vec<f64> = pairs.iter().map(|p| p.robust).collect();
    let nominal: Vec<f64> = pairs.iter().map(|p| p.nominal).collect();
    Ok(Comparison {
        ratio_of_means: mean_std(&robust).0 / mean_std(&nominal).0,
        mean_ratio,
        std_ratio,
        robust_violations: of(ProblemKind::Robust).filter(|r| r.violated).count(),
        nominal_violations: of(ProblemKind::Nominal).filter(|r| r.violated).count(),
        pairs,
    })
}
