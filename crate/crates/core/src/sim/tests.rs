use super::*;
use crate::model::fixtures::{arc, node};
use crate::model::{CycleConfig, NetworkInstance, NS_PER_US};
use crate::scenario;

fn line(n: u32) -> Network {
    Network::new(NetworkInstance {
        cycle: CycleConfig::new(10_000, 8, 3),
        nodes: (1..=n).map(|v| node(v, 20, 1)).collect(),
        arcs: (1..n)
            .flat_map(|v| [arc(v, v + 1, 3, 125_000), arc(v + 1, v, 3, 125_000)])
            .collect(),
    })
    .unwrap()
}

fn sim_flow(net: &Network, id: u32, path: &[u32], rate: u64, burst: Bytes) -> SimFlow {
    let ids: Vec<NodeId> = path.iter().map(|&v| NodeId(v)).collect();
    let pattern = TransmissionPattern {
        multiple: 1,
        b_prime: crate::model::sustainable_b_prime(rate, 1500, 1, net.cycle()),
    };
    SimFlow {
        spec: FlowSpec {
            id: FlowId(id),
            src: ids[0],
            dst: *ids.last().unwrap(),
            rate_bps: rate,
            burst_bytes: burst,
            throughput_bps: rate,
            deadline_ns: 10_000 * NS_PER_US,
            max_packet_bytes: 1500,
            patterns: vec![pattern],
        },
        arcs: net.arcs_of_node_path(&ids).unwrap(),
        pattern,
    }
}

#[test]
fn single_flow_has_constant_pair_delay() {
    let net = line(3);
    let flows = vec![sim_flow(&net, 1, &[1, 2, 3], 1_000_000_000, 3000)];
    let res = run_simulation(&net, &flows, &TrafficModel::default(), &SimConfig::new(2_000_000, 7)).unwrap();
    assert!(res.faults.is_empty());
    assert_eq!(res.hp_generated, res.hp_delivered);
    assert!(res.hp_delivered > 100);
    let report = check_invariants(&net, &flows, &res.trace);
    assert!(report.is_clean(), "{:?}", &report.violations[..report.violations.len().min(5)]);
    assert!(report.pairs_checked >= 2 * res.hp_delivered);
    let s = &res.stats[0];
    assert!(s.ok);
    assert!(s.jitter_ns <= 20 * NS_PER_US);
}

#[test]
fn shared_link_flows_are_not_dropped() {
    let net = line(4);
    let flows = vec![
        sim_flow(&net, 1, &[1, 2, 3, 4], 2_000_000_000, 6000),
        sim_flow(&net, 2, &[2, 3, 4], 3_000_000_000, 4500),
        sim_flow(&net, 3, &[4, 3, 2, 1], 1_000_000_000, 1500),
    ];
    let traffic = TrafficModel {
        best_effort: vec![BeFlow {
            src: NodeId(1),
            dst: NodeId(4),
            rate_bps: 20_000_000_000,
            packet_bytes: 1000,
        }],
    };
    let res = run_simulation(&net, &flows, &traffic, &SimConfig::new(3_000_000, 11)).unwrap();
    assert!(res.faults.is_empty(), "{:?}", res.faults.first());
    assert_eq!(res.hp_generated, res.hp_delivered);
    assert!(res.be_delivered > 0);
    let report = check_invariants(&net, &flows, &res.trace);
    assert!(report.is_clean(), "{:?}", &report.violations[..report.violations.len().min(5)]);
    assert!(res.stats.iter().all(|s| s.ok));
}

#[test]
fn same_cycle_packets_keep_their_gap_over_four_hops() {
    let net = line(5);
    let flows = vec![sim_flow(&net, 1, &[1, 2, 3, 4, 5], 4_000_000_000, 15_000)];
    let res = run_simulation(&net, &flows, &TrafficModel::default(), &SimConfig::new(1_000_000, 3)).unwrap();
    let report = check_invariants(&net, &flows, &res.trace);
    assert!(report.is_clean());
    assert!(report.gap_pairs_long_paths > 0);
    assert_eq!(report.gap_pairs_checked, report.gap_pairs_long_paths);
}

#[test]
fn inflated_header_breaks_pair_delay() {
    let net = line(3);
    let flows = vec![sim_flow(&net, 1, &[1, 2, 3], 1_000_000_000, 3000)];
    let mut cfg = SimConfig::new(500_000, 7);
    cfg.fault = Some(FaultInjection {
        flow: FlowId(1),
        seq: 4,
        hop: 0,
        inflate_q_ns: 1_000,
    });
    let res = run_simulation(&net, &flows, &TrafficModel::default(), &cfg).unwrap();
    let report = check_invariants(&net, &flows, &res.trace);
    assert!(report
        .violations
        .iter()
        .any(|v| matches!(v, Violation::PairDelay { seq: 4, hop: 0, .. })));
}

#[test]
fn header_above_bound_is_an_error() {
    let net = line(3);
    let flows = vec![sim_flow(&net, 1, &[1, 2, 3], 1_000_000_000, 3000)];
    let mut cfg = SimConfig::new(500_000, 7);
    cfg.fault = Some(FaultInjection {
        flow: FlowId(1),
        seq: 0,
        hop: 0,
        inflate_q_ns: 25_000,
    });
    let err = run_simulation(&net, &flows, &TrafficModel::default(), &cfg).unwrap_err();
    assert!(matches!(err, SimError::QueuingBound { seq: 0, hop: 0, .. }));
}

#[test]
fn short_horizon_warns() {
    let net = line(3);
    let flows = vec![sim_flow(&net, 1, &[1, 2, 3], 1_000_000_000, 3000)];
    let res = run_simulation(&net, &flows, &TrafficModel::default(), &SimConfig::new(100_000, 1)).unwrap();
    assert_eq!(res.warnings.len(), 1);
    let res = run_simulation(&net, &flows, &TrafficModel::default(), &SimConfig::new(400_000, 1)).unwrap();
    assert!(res.warnings.is_empty());
}

#[test]
fn overload_is_rejected() {
    let net = line(3);
    let flows = vec![
        sim_flow(&net, 1, &[1, 2, 3], 60_000_000_000, 75_000),
        sim_flow(&net, 2, &[1, 2, 3], 60_000_000_000, 75_000),
    ];
    let err = run_simulation(&net, &flows, &TrafficModel::default(), &SimConfig::new(500_000, 1)).unwrap_err();
    assert!(matches!(err, SimError::Overload { .. }));
}

#[test]
fn runs_are_deterministic() {
    let b = scenario::sec5a();
    let net = Network::new(b.instance.clone()).unwrap();
    let flows = SimFlow::from_solution(&net, &b.flows, &b.solution).unwrap();
    let cfg = SimConfig::new(200_000, 42);
    let a = run_simulation(&net, &flows, &b.traffic, &cfg).unwrap();
    let c = run_simulation(&net, &flows, &b.traffic, &cfg).unwrap();
    assert_eq!(a.trace, c.trace);
    assert_eq!(a.be_delivered, c.be_delivered);
}

#[test]
fn bundled_scenario_is_clean() {
    let b = scenario::sec5a();
    let net = Network::new(b.instance.clone()).unwrap();
    let flows = SimFlow::from_solution(&net, &b.flows, &b.solution).unwrap();
    let res = run_simulation(&net, &flows, &b.traffic, &SimConfig::new(b.horizon_ns, 1)).unwrap();
    assert!(res.faults.is_empty(), "{:?}", res.faults.first());
    assert!(res.hp_delivered >= 100_000, "{}", res.hp_delivered);
    assert_eq!(res.hp_generated, res.hp_delivered);
    let report = check_invariants(&net, &flows, &res.trace);
    assert!(report.is_clean(), "{:?}", &report.violations[..report.violations.len().min(5)]);
    for s in &res.stats {
        assert!(s.jitter_ns <= scenario::QUEUING_NS, "{s:?}");
        assert!(s.ok);
    }
}

mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn damper_invariants_hold(
            hops in 2u32..6,
            flows in proptest::collection::vec((1u64..8, 1u64..6), 1..4),
            seed in any::<u64>(),
            drift in -50.0f64..50.0,
            be_rate in 0u64..30,
        ) {
            let n = hops + 1;
            let net = line(n);
            let path: Vec<u32> = (1..=n).collect();
            let sim: Vec<SimFlow> = flows
                .iter()
                .enumerate()
                .map(|(i, &(gbps, pkts))| sim_flow(&net, i as u32 + 1, &path, gbps * 1_000_000_000, pkts * 1500))
                .collect();
            let traffic = TrafficModel {
                best_effort: if be_rate == 0 {
                    vec![]
                } else {
                    vec![BeFlow { src: NodeId(1), dst: NodeId(n), rate_bps: be_rate * 1_000_000_000, packet_bytes: 700 }]
                },
            };
            let cfg = SimConfig { drift_ppm: drift, ..SimConfig::new(400_000, seed) };
            let res = match run_simulation(&net, &sim, &traffic, &cfg) {
                Err(SimError::Overload { .. }) => return Ok(()),
                r => r.unwrap(),
            };
            prop_assert!(res.faults.is_empty());
            prop_assert_eq!(res.hp_generated, res.hp_delivered);
            let report = check_invariants(&net, &sim, &res.trace);
            prop_assert!(report.is_clean(), "{:?}", report.violations.first());
            let t = net.cycle().cycle_ns;
            prop_assert!(res.trace.iter().all(|r| r.q >= 0 && r.q <= 2 * t));
        }
    }
}
