//! Experiment runner: closed-loop comparisons of the robust and nominal
//! controllers and runtime sweeps, written as CSV and JSON.

mod config;
mod output;
mod report;
mod sweep;

pub use config::{AdmmSection, ExperimentSection, RunConfig, SweepSection, SystemSection};
pub use output::{read_trajectory_cost, write_trace, write_trajectory, TRAJECTORY_HEADER};
pub use report::{compare_modes, run_experiment, Comparison, ModeSummary, PairedCost, RunReport, SeedRun};
pub use sweep::{run_sweep, SweepKind, SweepPoint};

use rdlmpc::constraints::ProblemKind;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
    #[error("solver: {0}")]
    Solver(String),
    #[error("report has no {0:?} runs")]
    MissingMode(ProblemKind),
}

impl CliError {
    /// 1 for configuration problems, 2 for solver and output failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::MissingMode(_) => 1,
            Self::Io(_) | Self::Solver(_) => 2,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::Io(e.to_string())
    }
}
