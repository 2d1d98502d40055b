mod common;

use common::Instance;
use rdlmpc::admm::{AdmmEngine, AdmmParams};
use rdlmpc::constraints::ProblemKind;
use rdlmpc::network::{MessageKind, Network};

fn params(iters: usize) -> AdmmParams {
    AdmmParams { max_iters: iters, eps_p: 1e-14, eps_d: 1e-14, scale_tolerances: false, ..AdmmParams::default() }
}

#[test]
fn distributed_iterates_equal_monolithic() {
    let inst = Instance::chain(6, 1, 3, 0.4);
    let x0 = [1.2, -0.7, 0.3, 1.9, -1.5, 0.1];
    for kind in [ProblemKind::Robust, ProblemKind::Nominal] {
        let p = inst.problem(&x0, kind);
        let engine = AdmmEngine::new(&p).unwrap();
        let mono = engine.solve(&p.x0, &params(40)).unwrap();
        let net = Network::new(&p).unwrap();
        let dist = net.run(&p.x0, &params(40), None).unwrap();
        assert_eq!(mono.iterations, dist.iterations);
        assert_eq!(mono.trace, dist.trace);
        assert_eq!(mono.u0, dist.u0);
        for (a, b) in mono.states.iter().zip(&dist.states) {
            assert_eq!(a.psi_col, b.psi_col);
            assert_eq!(a.phi_row, b.phi_row);
            assert_eq!(a.lambda1, b.lambda1);
            assert_eq!(a.lambda3, b.lambda3);
        }
        assert!(dist.u0.iter().all(|v| v.is_finite()));
    }
}

#[test]
fn messages_stay_within_radius() {
    for radius in [1, 2] {
        let inst = Instance::chain(7, radius, 3, 0.2);
        let p = inst.problem(&[0.5, -0.5, 1.0, 0.0, 0.3, -1.2, 0.9], ProblemKind::Robust);
        let net = Network::new(&p).unwrap();
        assert!(net.footprint_hops() <= radius + 1);
        let out = net.run(&p.x0, &params(5), None).unwrap();
        assert_eq!(out.comm.violations, 0);
        assert!(out.comm.max_hops <= radius + 1);
        assert!(out.comm.messages > 0);
        assert_eq!(out.comm.sent_per_iteration.len(), 7);
        assert_eq!(MessageKind::StateRow.allowed_hops(radius), radius);
        assert_eq!(out.node_seconds.len(), 7);
    }
}

#[test]
fn warm_start_continues_the_run() {
    let inst = Instance::chain(4, 1, 2, 0.3);
    let p = inst.problem(&[1.0, -1.0, 0.5, 0.2], ProblemKind::Robust);
    let net = Network::new(&p).unwrap();
    let first = net.run(&p.x0, &params(10), None).unwrap();
    let resumed = net.run(&p.x0, &params(10), Some(first.states.clone())).unwrap();
    let engine = AdmmEngine::new(&p).unwrap();
    let cont = engine.solve_from(&p.x0, &params(10), first.states).unwrap();
    assert_eq!(resumed.u0, cont.u0);
}
