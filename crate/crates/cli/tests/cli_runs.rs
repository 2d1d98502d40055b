use std::path::Path;
use std::process::Command;

use rdlmpc::constraints::ProblemKind;
use rdlmpc_cli::{read_trajectory_cost, run_experiment, RunConfig};

const SMALL: &str = r#"
[system]
n = 4
radius = 1

[experiment]
horizon = 2
t_sim = 4
seeds = [0, 1]
"#;

fn small(extra: &str) -> RunConfig {
    RunConfig::from_toml(&format!("{SMALL}{extra}")).unwrap()
}

fn bin(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_rdlmpc")).args(args).output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn trajectory_files_reproduce_the_cost() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small("");
    let report = run_experiment(&cfg, Some(dir.path())).unwrap();
    assert_eq!(report.runs.len(), 4);
    let model = cfg.model().unwrap();
    let ex = cfg.experiment(ProblemKind::Robust).unwrap();
    for run in &report.runs {
        let file = dir.path().join(run.trajectory_file.as_ref().unwrap());
        let cost = read_trajectory_cost(&file, &model, &ex.cost).unwrap();
        assert!((cost - run.cost).abs() <= 1e-12 * (1.0 + run.cost), "{cost} vs {}", run.cost);
        assert!(dir.path().join(run.trace_file.as_ref().unwrap()).exists());
    }
}

#[test]
fn runs_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = small("");
    let ra = run_experiment(&cfg, Some(a.path())).unwrap();
    let rb = run_experiment(&cfg, Some(b.path())).unwrap();
    assert_eq!(serde_json::to_string(&ra).unwrap(), serde_json::to_string(&rb).unwrap());
    for run in &ra.runs {
        for name in [run.trajectory_file.as_ref().unwrap(), run.trace_file.as_ref().unwrap()] {
            assert_eq!(std::fs::read(a.path().join(name)).unwrap(), std::fs::read(b.path().join(name)).unwrap());
        }
    }
}

#[test]
fn zero_disturbance_costs_match() {
    let report = run_experiment(&small("sigma = 0.0\n"), None).unwrap();
    let cmp = report.comparison.unwrap();
    assert!((cmp.ratio_of_means - 1.0).abs() <= 1e-3, "{}", cmp.ratio_of_means);
    assert_eq!(cmp.robust_violations, 0);
}

#[test]
fn binary_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let res = bin(&["--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "3", "--mode", "robust"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["runs"].as_array().unwrap().len(), 1);
    assert_eq!(summary["runs"][0]["seed"], 3);
    assert!(out.join("trajectory_robust_seed3.csv").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();

    let cfg = write_config(dir.path(), "[system]\nn = 0\n");
    assert_eq!(bin(&["--config", &cfg, "--out", out]).status.code(), Some(1));
    let cfg = write_config(dir.path(), "[system]\nsize = 4\n");
    assert_eq!(bin(&["--config", &cfg, "--out", out]).status.code(), Some(1));

    let cfg = write_config(dir.path(), &format!("{SMALL}\n[admm]\nmax_iters = 1\n"));
    assert_eq!(bin(&["--config", &cfg, "--out", out, "--mode", "robust"]).status.code(), Some(2));

    // an unsolved controller at the edge of the box drives the plant out of it
    let body = SMALL.replace("seeds = [0, 1]", "seeds = [0]\nx0 = [1.5, 20.0, 1.5, 20.0]\nallow_unconverged = true");
    let cfg = write_config(dir.path(), &format!("{body}\n[admm]\nmax_iters = 1\n"));
    assert_eq!(bin(&["--config", &cfg, "--out", out, "--mode", "robust"]).status.code(), Some(3));
}

#[test]
fn shipped_config_is_the_default() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/chain10.toml");
    let cfg = RunConfig::load(&path).unwrap();
    assert_eq!(cfg.admm.params(), RunConfig::default().admm.params());
    assert_eq!(cfg.system, RunConfig::default().system);
    assert_eq!(cfg.experiment, RunConfig::default().experiment);
    assert_eq!(cfg.sweep, RunConfig::default().sweep);
}
