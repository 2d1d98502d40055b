use std::path::Path;

use rdlmpc::admm::IterationRecord;
use rdlmpc::constraints::CostWeights;
use rdlmpc::mpc::Trajectory;
use rdlmpc::sls::SystemModel;

use crate::CliError;

pub const TRAJECTORY_HEADER: [&str; 6] = ["t", "subsystem", "component", "x", "u", "w"];

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

/// One row per time, subsystem and local component. The last time carries
/// only the state.
pub fn write_trajectory(path: &Path, model: &SystemModel<f64>, traj: &Trajectory<f64>) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(TRAJECTORY_HEADER)?;
    for (t, x) in traj.states.iter().enumerate() {
        for i in 0..model.n_subsystems() {
            let xs = model.state_range(i);
            let us = model.input_range(i);
            for k in 0..xs.len().max(us.len()) {
                let xv = (k < xs.len()).then(|| x[xs.start + k]);
                let uv = (k < us.len()).then(|| traj.inputs.get(t).map(|u| u[us.start + k])).flatten();
                let wv = (k < xs.len()).then(|| traj.disturbances.get(t).map(|w| w[xs.start + k])).flatten();
                w.write_record([t.to_string(), i.to_string(), k.to_string(), cell(xv), cell(uv), cell(wv)])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Residual history of every solve in a run.
pub fn write_trace(path: &Path, traces: &[Vec<IterationRecord>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "iteration", "rho", "primal_residual", "dual_residual"])?;
    for (t, trace) in traces.iter().enumerate() {
        for r in trace {
            w.write_record([
                t.to_string(),
                r.iteration.to_string(),
                format!("{:e}", r.rho),
                format!("{:e}", r.primal_residual),
                format!("{:e}", r.dual_residual),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Closed-loop cost recomputed from a trajectory file, assuming every
/// subsystem's component `k` indexes its `k`-th state and input.
pub fn read_trajectory_cost(path: &Path, model: &SystemModel<f64>, weights: &CostWeights<f64>) -> Result<f64, CliError> {
    let mut r = csv::Reader::from_path(path)?;
    let mut cost = 0.0;
    for rec in r.records() {
        let rec = rec?;
        let parse = |j: usize| -> Result<Option<f64>, CliError> {
            let s = rec.get(j).unwrap_or("");
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
            }
        };
        let idx = |j: usize| -> Result<usize, CliError> {
            rec.get(j).unwrap_or("").parse().map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
        };
        let (i, k) = (idx(1)?, idx(2)?);
        // the final state carries no disturbance and is not part of the cost
        if let (Some(x), Some(_)) = (parse(3)?, parse(5)?) {
            cost += weights.q[model.state_range(i).start + k] * x * x;
        }
        if let Some(u) = parse(4)? {
            cost += weights.r[model.input_range(i).start + k] * u * u;
        }
    }
    Ok(cost)
}
