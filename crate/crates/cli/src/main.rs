use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use log::{error, info};
use rdlmpc::constraints::ProblemKind;
use rdlmpc_cli::{run_experiment, run_sweep, CliError, RunConfig, SweepKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Robust,
    Nominal,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SweepArg {
    None,
    Size,
    Radius,
    All,
}

/// Closed-loop experiments with the robust distributed MPC controller.
#[derive(Debug, Parser)]
#[command(version)]
struct Args {
    /// TOML configuration; the benchmark chain when omitted
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// output directory
    #[arg(short, long, default_value = "out")]
    out: PathBuf,
    /// run this seed only
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long, value_enum, default_value = "none")]
    sweep: SweepArg,
    /// skip the closed-loop comparison
    #[arg(long)]
    sweep_only: bool,
    /// -v info, -vv debug
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
}

fn run(args: &Args) -> Result<bool, CliError> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.experiment.seeds = vec![seed];
        cfg.sweep.seeds = vec![seed];
    }
    match args.mode {
        Some(ModeArg::Robust) => cfg.experiment.modes = vec![ProblemKind::Robust],
        Some(ModeArg::Nominal) => cfg.experiment.modes = vec![ProblemKind::Nominal],
        Some(ModeArg::Both) => cfg.experiment.modes = vec![ProblemKind::Robust, ProblemKind::Nominal],
        None => {}
    }
    cfg.validate()?;
    let mut report = if args.sweep_only {
        rdlmpc_cli::RunReport { config: cfg.clone(), runs: vec![], modes: vec![], comparison: None, sweeps: vec![] }
    } else {
        run_experiment(&cfg, Some(&args.out))?
    };
    let kinds: &[SweepKind] = match args.sweep {
        SweepArg::None => &[],
        SweepArg::Size => &[SweepKind::Size],
        SweepArg::Radius => &[SweepKind::Radius],
        SweepArg::All => &[SweepKind::Size, SweepKind::Radius],
    };
    for &kind in kinds {
        report.sweeps.extend(run_sweep(&cfg, kind, Some(&args.out))?);
    }
    std::fs::create_dir_all(&args.out)?;
    let summary = args.out.join("summary.json");
    let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Io(e.to_string()))?;
    std::fs::write(&summary, json)?;
    for m in &report.modes {
        println!(
            "{:?}: mean cost {:.3} (std {:.3}), {} of {} runs violate bounds, {:.1} iterations per step",
            m.mode, m.mean_cost, m.std_cost, m.violations, m.runs, m.mean_iterations
        );
    }
    if let Some(c) = &report.comparison {
        println!("robust/nominal cost ratio {:.4}", c.ratio_of_means);
    }
    for p in &report.sweeps {
        println!(
            "{:?} n={} d={}: {:.3e} s per node per solve, {:.1} iterations",
            p.kind, p.n, p.radius, p.node_seconds_per_solve, p.mean_iterations
        );
    }
    info!("wrote {}", summary.display());
    Ok(report.robust_violations() == 0)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let level = match args.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            error!("robust closed loop left the state bounds");
            ExitCode::from(3)
        }
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
