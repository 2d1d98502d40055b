mod common;

use common::{vertex_excess, Instance};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rdlmpc::admm::{penalty_update, AdmmEngine, AdmmParams};
use rdlmpc::constraints::ProblemKind;
use rdlmpc::kkt::{solve_equality_lsq, solve_qp, DenseQp, EqualityLsq};
use rdlmpc::mpc::{run_closed_loop, ExperimentConfig};
use rdlmpc::network::Network;
use rdlmpc::oracle::solve_central;
use rdlmpc::sls::{build_locality_mask, controller_step, ControllerState, SystemModel, SystemResponse};

fn config() -> ProptestConfig {
    ProptestConfig { cases: 24, ..ProptestConfig::default() }
}

fn instance(n: usize, horizon: usize, radius: usize, sigma: f64) -> Instance {
    Instance { sigma, ..Instance::chain(n, radius, horizon, sigma) }
}

fn x0_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, n)
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn mask_grows_with_radius(n in 2usize..7, horizon in 1usize..4, d in 0usize..4) {
        let m = SystemModel::chain(0.8, 2.0, &vec![1.0; n]).unwrap();
        let small = build_locality_mask(&m, d, horizon);
        let big = build_locality_mask(&m, d + 1, horizon);
        prop_assert!(small.is_subset_of(&big));
        for i in 0..n {
            let (inc, out) = m.graph().d_local_sets(i, d).unwrap();
            prop_assert_eq!(inc, out);
        }
    }

    #[test]
    fn controller_reproduces_response(
        n in 1usize..4,
        horizon in 1usize..4,
        seed in any::<u64>(),
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let beta: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let m = SystemModel::chain(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), &beta).unwrap();
        let rows = n * (horizon + 1);
        let cols = n * (horizon + 1);
        let mut phi_u = DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0));
        // causal: input block t only sees disturbance blocks k <= t
        for t in 0..=horizon {
            for k in t + 1..=horizon {
                phi_u.view_mut((t * n, k * n), (n, n)).fill(0.0);
            }
        }
        let phi = SystemResponse::from_input_map(&m, horizon, &phi_u).unwrap();
        prop_assert!(phi.achievability_residual(&m) < 1e-10);
        let x0 = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let ws: Vec<DVector<f64>> = (0..horizon).map(|_| DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))).collect();
        let (xs, us) = phi.apply(&rdlmpc::sls::HorizonSignal::disturbance(&x0, &ws).unwrap());
        let mut state = ControllerState::new();
        let mut x = x0;
        for t in 0..horizon {
            prop_assert!((&x - xs.rows(t * n, n)).amax() < 1e-10);
            let u = controller_step(&phi, &x, &mut state).unwrap();
            prop_assert!((&u - us.rows(t * n, n)).amax() < 1e-10);
            x = m.step(&x, &u, &ws[t]);
        }
        prop_assert!((&x - xs.rows(horizon * n, n)).amax() < 1e-10);
    }

    #[test]
    fn constraint_rows_are_block_diagonal(n in 1usize..5, horizon in 1usize..4, sigma in 0.0..1.0f64) {
        let inst = instance(n, horizon, 1, sigma);
        let p = inst.problem(&vec![0.0; n], ProblemKind::Robust);
        prop_assert!(p.data.audit(&p.model).is_ok());
    }

    #[test]
    fn lsq_stationarity_and_feasibility(seed in any::<u64>(), rows in 1usize..7, cols in 1usize..6, eqs in 0usize..3) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let eqs = eqs.min(cols);
        let m = DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0));
        let v = DVector::from_fn(rows, |_, _| rng.random_range(-1.0..1.0));
        let p = DMatrix::from_fn(eqs, cols, |_, _| rng.random_range(-1.0..1.0));
        let q = DVector::from_fn(eqs, |_, _| rng.random_range(-1.0..1.0));
        let sol = solve_equality_lsq(&EqualityLsq { m: m.clone(), v: v.clone(), p: p.clone(), q: q.clone() }).unwrap();
        let stat = m.transpose() * (&m * &sol.z - &v) + p.transpose() * &sol.mu;
        prop_assert!(stat.amax() < 1e-8);
        if eqs > 0 {
            prop_assert!((&p * &sol.z - &q).amax() < 1e-8);
        }
        if rows >= cols {
            // full column rank almost surely: the QP backend sees the same problem
            let qp = DenseQp::new(m.transpose() * &m * 2.0, m.transpose() * &v * -2.0).with_equalities(p, q);
            let z = solve_qp(&qp).unwrap().z;
            prop_assert!((z - sol.z).amax() < 1e-8);
        }
    }

    #[test]
    fn penalty_stays_on_the_grid(rho in 0.01..100.0f64, r in 0.0..10.0f64, s in 0.0..10.0f64, iter in 0usize..400) {
        let params = AdmmParams::default();
        let next = penalty_update(rho, r, s, &params, iter);
        if iter >= params.freeze_after {
            prop_assert!(next <= params.rho_max && next <= rho);
        } else {
            let grid = [rho * params.tau, rho / params.tau, rho];
            prop_assert!(grid.iter().any(|g| (g - next).abs() <= 1e-12 * rho));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, ..ProptestConfig::default() })]

    #[test]
    fn oracle_certifies_every_vertex(n in 2usize..4, horizon in 1usize..3, sigma in 0.05..0.4f64, x0 in x0_strategy(3)) {
        let inst = instance(n, horizon, 1, sigma);
        let p = inst.problem(&x0[..n], ProblemKind::Robust);
        let sol = solve_central(&p).unwrap();
        let res = p.residual(&sol.phi, Some(&sol.xi));
        prop_assert!(res.max() < 1e-8, "{:?}", res);
        prop_assert!(sol.xi.mask_violation(&p) == 0.0);
        prop_assert!(vertex_excess(&p, &sol.phi, sigma) < 1e-8);
    }

    #[test]
    fn admm_is_deterministic_and_local(n in 2usize..5, horizon in 1usize..4, sigma in 0.0..0.4f64, x0 in x0_strategy(4)) {
        let inst = instance(n, horizon, 1, sigma);
        let p = inst.problem(&x0[..n], ProblemKind::Robust);
        let params = AdmmParams { max_iters: 60, audit_mask: true, ..AdmmParams::default() };
        let engine = AdmmEngine::new(&p).unwrap();
        let a = engine.solve(&p.x0, &params).unwrap();
        let b = engine.solve(&p.x0, &params).unwrap();
        prop_assert_eq!(&a.trace, &b.trace);
        prop_assert_eq!(&a.states, &b.states);
        let sol = engine.assemble(&a.states);
        prop_assert!(sol.xi.negativity() == 0.0);
        prop_assert!(sol.xi.mask_violation(&p) == 0.0);
        let dist = Network::new(&p).unwrap().run(&p.x0, &params, None).unwrap();
        prop_assert_eq!(&dist.states, &a.states);
        prop_assert_eq!(dist.comm.violations, 0);
    }

    #[test]
    fn closed_loop_rollout_and_separable_cost(n in 2usize..5, sigma in 0.0..0.5f64, seed in any::<u64>()) {
        let inst = instance(n, 2, 1, sigma);
        let mut cfg = ExperimentConfig::<f64>::chain_benchmark(n, 1).unwrap();
        cfg.model = inst.model();
        cfg.bounds = rdlmpc::constraints::BoxBounds::symmetric(&inst.x_bound, &inst.u_bound);
        cfg.horizon = 2;
        cfg.t_sim = 3;
        cfg.sigma = sigma;
        cfg.x0_box = Some(1.0);
        cfg.allow_unconverged = true;
        let traj = run_closed_loop(&cfg, seed).unwrap();
        prop_assert!(traj.rollout_error(&cfg.model) <= 1e-12);
        let parts: f64 = traj.subsystem_costs(&cfg.model, &cfg.cost).iter().sum();
        prop_assert!((parts - traj.cost).abs() <= 1e-12 * (1.0 + traj.cost));
        prop_assert!(traj.disturbances.iter().all(|w| w.iter().all(|v| v.abs() <= sigma)));
    }
}
