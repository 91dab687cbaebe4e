use super::*;
use crate::lp::{solve_lp, LpStatus, SimplexBackend};
use crate::model::fixtures::{arc, line3, node};
use crate::model::{
    CycleConfig, FlowParams, Nanos, NetworkInstance, NodeId, NodeSpec, TransmissionPattern, NS_PER_US,
};
use crate::ospf::{ospf_admit, OspfConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn params(id: u32, src: u32, dst: u32, gbps: u64, burst: Bytes, deadline_us: i64) -> FlowParams {
    FlowParams {
        id: FlowId(id),
        src: NodeId(src),
        dst: NodeId(dst),
        rate_bps: gbps * 1_000_000_000,
        burst_bytes: burst,
        throughput_bps: gbps * 1_000_000_000,
        deadline_ns: deadline_us * NS_PER_US,
        max_packet_bytes: 1500,
    }
}

fn opts() -> CgOptions {
    CgOptions {
        parallel: false,
        ..CgOptions::default()
    }
}

/// Every simple path from `src` to `dst`, as arc lists.
fn simple_paths(net: &Network, src: usize, dst: usize) -> Vec<Vec<usize>> {
    fn walk(net: &Network, v: usize, dst: usize, seen: &mut Vec<bool>, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if v == dst {
            out.push(path.clone());
            return;
        }
        for &a in net.out_arcs(v) {
            let w = net.head(a);
            if !seen[w] {
                seen[w] = true;
                path.push(a);
                walk(net, w, dst, seen, path, out);
                path.pop();
                seen[w] = false;
            }
        }
    }
    let mut seen = vec![false; net.node_count()];
    seen[src] = true;
    let mut out = Vec::new();
    walk(net, src, dst, &mut seen, &mut Vec::new(), &mut out);
    out
}

/// All delay-feasible columns of a flow.
fn all_columns(net: &Network, flow: &FlowSpec) -> Vec<Column> {
    let src = net.node_index(flow.src).unwrap();
    let dst = net.node_index(flow.dst).unwrap();
    let mut out = Vec::new();
    for arcs in simple_paths(net, src, dst) {
        for k in 0..flow.patterns.len() {
            if let Some(c) = Column::new(net, flow, k, &arcs).unwrap() {
                out.push(c);
            }
        }
    }
    out
}

/// Random connected instance with tight capacities.
fn random_instance(rng: &mut ChaCha8Rng, max_nodes: usize, max_flows: usize) -> (Network, Vec<FlowSpec>) {
    let n = rng.random_range(4..=max_nodes) as u32;
    let nodes: Vec<NodeSpec> = (1..=n)
        .map(|id| NodeSpec {
            buffer_bytes: rng.random_range(6_000..40_000),
            ..node(id, rng.random_range(5..25), 1)
        })
        .collect();
    let mut links = Vec::new();
    for v in 2..=n {
        links.push((rng.random_range(1..v), v));
    }
    for _ in 0..rng.random_range(1..=n) {
        let (a, b) = (rng.random_range(1..=n), rng.random_range(1..=n));
        if a != b && !links.iter().any(|&(x, y)| (x, y) == (a, b) || (x, y) == (b, a)) {
            links.push((a, b));
        }
    }
    let mut arcs = Vec::new();
    for (a, b) in links {
        let prop = rng.random_range(0..20);
        arcs.push(arc(a, b, prop, rng.random_range(3_000..12_000)));
        arcs.push(arc(b, a, prop, rng.random_range(3_000..12_000)));
    }
    let net = Network::new(NetworkInstance {
        cycle: CycleConfig::new(10_000, 4, 3),
        nodes,
        arcs,
    })
    .unwrap();
    let flows = (0..rng.random_range(2..=max_flows))
        .map(|i| {
            let src = rng.random_range(1..=n);
            let mut dst = rng.random_range(1..=n);
            if dst == src {
                dst = src % n + 1;
            }
            params(i as u32 + 1, src, dst, rng.random_range(1..4), rng.random_range(1500..4500), rng.random_range(100..300))
                .with_catalog(&net)
        })
        .collect();
    (net, flows)
}

#[test]
fn empty_master_has_all_rows() {
    let net = line3();
    let f = params(1, 1, 3, 1, 1500, 500).with_catalog(&net);
    let m = build_master(&net, &[f], &[]);
    assert_eq!(m.lp.num_rows(), 1 + 2 + 3);
    assert_eq!(m.lp.num_columns(), 0);
    assert_eq!(solve_lp(&m.lp).objective, 0.0);
}

#[test]
fn column_entries_cover_route_arcs_and_all_path_nodes() {
    let net = line3();
    let f = params(1, 1, 3, 1, 1500, 500).with_catalog(&net);
    let col = Column::new(&net, &f, 0, &[0, 1]).unwrap().unwrap();
    let m = build_master(&net, &[f], &[col.clone(), col]);
    assert_eq!(m.lp.num_columns(), 1, "duplicate dropped");
    let entries = &m.lp.columns[0].entries;
    assert_eq!(entries.len(), 1 + 2 + 3);
    let beta = m.columns[0].beta() as f64;
    assert_eq!(entries[0], (0, 1.0));
    assert!(entries[1..].iter().all(|&(_, a)| a == beta));
}

#[test]
fn row_count_at_paper_scale() {
    let n = 505u32;
    let nodes: Vec<NodeSpec> = (1..=n).map(|id| node(id, 20, 1)).collect();
    let mut arcs: Vec<_> = (1..n).flat_map(|v| [arc(v, v + 1, 1, 100_000), arc(v + 1, v, 1, 100_000)]).collect();
    let mut extra = 0;
    while arcs.len() < 1061 {
        arcs.push(arc(1 + extra, 3 + extra, 1, 100_000));
        extra += 1;
    }
    let net = Network::new(NetworkInstance {
        cycle: CycleConfig::new(10_000, 8, 3),
        nodes,
        arcs,
    })
    .unwrap();
    assert_eq!(net.arc_count(), 1061);
    let flows: Vec<FlowSpec> = (1..=100).map(|i| params(i, 1, 2, 1, 1500, 500).into_flow(Vec::new())).collect();
    assert_eq!(build_master(&net, &flows, &[]).lp.num_rows(), 1666);
}

#[test]
fn zero_duals_always_price_a_column() {
    let net = line3();
    let f = params(1, 1, 3, 1, 1500, 500).with_catalog(&net);
    let duals = DualValues::zero(&net, std::slice::from_ref(&f));
    for k in 0..f.patterns.len() {
        let col = pricing(&net, &f, k, &duals).expect("reduced cost R_f > 0");
        assert_eq!(col.path.arcs, vec![0, 1]);
    }
}

#[test]
fn saturated_routing_dual_blocks_pricing() {
    let net = line3();
    let f = params(1, 1, 3, 1, 1500, 500).with_catalog(&net);
    let mut duals = DualValues::zero(&net, std::slice::from_ref(&f));
    duals.lambda.insert(f.id, f.throughput_bps as f64);
    assert!(price_flow(&net, &f, &duals).columns.is_empty());
}

fn five_node() -> Network {
    let nodes = (1..=5).map(|id| node(id, 10, 1)).collect();
    let mut arcs = Vec::new();
    for (a, b, p) in [(1, 2, 5), (2, 5, 5), (1, 3, 1), (3, 4, 1), (4, 5, 1), (2, 3, 2), (3, 5, 30), (4, 2, 3)] {
        arcs.push(arc(a, b, p, 20_000));
        arcs.push(arc(b, a, p, 20_000));
    }
    Network::new(NetworkInstance {
        cycle: CycleConfig::new(10_000, 8, 3),
        nodes,
        arcs,
    })
    .unwrap()
}

#[test]
fn pricing_matches_exhaustive_paths_with_hand_set_duals() {
    let net = five_node();
    let f = params(1, 1, 5, 2, 3000, 120).with_catalog(&net);
    assert!(!f.patterns.is_empty());
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..50 {
        let mut duals = DualValues::zero(&net, std::slice::from_ref(&f));
        for mu in duals.mu.iter_mut() {
            *mu = if rng.random_bool(0.5) { rng.random_range(0.0..2e5) } else { 0.0 };
        }
        for om in duals.omega.iter_mut() {
            *om = if rng.random_bool(0.5) { rng.random_range(0.0..1e5) } else { 0.0 };
        }
        duals.lambda.insert(f.id, rng.random_range(0.0..1e9));
        let priced = price_flow(&net, &f, &duals);
        for k in 0..f.patterns.len() {
            let best = all_columns(&net, &f)
                .into_iter()
                .filter(|c| c.path.pattern == k)
                .map(|c| duals.reduced_cost(&c))
                .fold(f64::NEG_INFINITY, f64::max);
            match priced.columns.iter().find(|c| c.path.pattern == k) {
                Some(c) => {
                    let rc = duals.reduced_cost(c);
                    assert!((rc - best).abs() <= 1e-6 * best.abs().max(1.0), "{rc} vs {best}");
                    assert!(rc > 0.0);
                }
                None => assert!(best <= EPS_PRICE_TEST * f.throughput_bps as f64),
            }
        }
    }
}

const EPS_PRICE_TEST: f64 = 1e-6;

#[test]
fn csp_examples() {
    // Diamond 1 -> {2, 3} -> 4: via 2 is cheap and slow, via 3 costly and fast.
    let net = Network::new(NetworkInstance {
        cycle: CycleConfig::new(10_000, 8, 3),
        nodes: (1..=4).map(|id| node(id, 10, 0)).collect(),
        arcs: vec![arc(1, 2, 0, 1), arc(2, 4, 0, 1), arc(1, 3, 0, 1), arc(3, 4, 0, 1)],
    })
    .unwrap();
    let cost = [1.0, 1.0, 5.0, 5.0];
    let delay = [50, 50, 10, 10];
    let loose = csp_shortest_path(&net, &cost, &delay, 1000, 0, 3).unwrap();
    assert_eq!((loose.arcs, loose.cost, loose.delay), (vec![0, 1], 2.0, 100));
    let tight = csp_shortest_path(&net, &cost, &delay, 40, 0, 3).unwrap();
    assert_eq!((tight.arcs, tight.cost, tight.delay), (vec![2, 3], 10.0, 20));
    assert!(csp_shortest_path(&net, &cost, &delay, 19, 0, 3).is_none());
}

fn random_graph(rng: &mut ChaCha8Rng) -> Network {
    let n = rng.random_range(2..=8u32);
    let mut arcs = Vec::new();
    for a in 1..=n {
        for b in 1..=n {
            if a != b && rng.random_bool(0.4) {
                arcs.push(arc(a, b, 0, 1));
            }
        }
    }
    Network::new(NetworkInstance {
        cycle: CycleConfig::new(10_000, 8, 3),
        nodes: (1..=n).map(|id| node(id, 10, 0)).collect(),
        arcs,
    })
    .unwrap()
}

#[test]
fn csp_agrees_with_path_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let net = random_graph(&mut rng);
        let m = net.arc_count();
        let cost: Vec<f64> = (0..m).map(|_| rng.random_range(0..10) as f64).collect();
        let delay: Vec<Nanos> = (0..m).map(|_| rng.random_range(1..10)).collect();
        let budget = rng.random_range(0..30);
        let src = rng.random_range(0..net.node_count());
        let dst = rng.random_range(0..net.node_count());
        let got = csp_shortest_path(&net, &cost, &delay, budget, src, dst);
        let oracle = if src == dst {
            None
        } else {
            simple_paths(&net, src, dst)
                .into_iter()
                .map(|p| {
                    let c: f64 = p.iter().map(|&a| cost[a]).sum();
                    let d: Nanos = p.iter().map(|&a| delay[a]).sum();
                    (c, d)
                })
                .filter(|&(_, d)| d <= budget)
                .map(|(c, _)| c)
                .min_by(f64::total_cmp)
        };
        match (got, oracle) {
            (None, None) => {}
            (Some(p), Some(c)) => {
                assert_eq!(p.cost, c);
                assert!(p.delay <= budget);
                assert!(net.check_path(&p.arcs, src, dst));
                assert_eq!(p.cost, p.arcs.iter().map(|&a| cost[a]).sum::<f64>());
            }
            (g, o) => panic!("csp {g:?} vs oracle {o:?}"),
        }
    }
}

#[test]
fn unique_paths_with_ample_capacity_admit_everything() {
    let net = line3();
    let flows = vec![
        params(1, 1, 3, 1, 1500, 500).with_catalog(&net),
        params(2, 2, 3, 2, 1500, 500).with_catalog(&net),
    ];
    let mut backend = SimplexBackend::new();
    let cg = run_cg(&net, &flows, &mut backend, &opts());
    assert!(cg.certified);
    assert!(cg.log[0].columns_added >= 1);
    assert!((cg.ub - 3e9).abs() < 1e-3);
    let res = admit(&net, &flows, &opts());
    assert_eq!(res.report.z, 3e9);
    assert_eq!(res.report.gap_percent, 0.0);
}

#[test]
fn optimality_gap_examples() {
    assert_eq!(optimality_gap(100.0, 100.0), 0.0);
    assert!((optimality_gap(100.0, 98.0) - 2.0).abs() < 1e-12);
    assert_eq!(optimality_gap(0.0, 0.0), 0.0);
    assert_eq!(optimality_gap(100.0, 100.0 + 1e-9), 0.0);
}

#[test]
fn flows_without_feasible_couples_are_rejected_upfront() {
    let net = line3();
    let mut f = params(1, 1, 3, 1, 1500, 500).with_catalog(&net);
    f.deadline_ns = 10 * NS_PER_US;
    let cg = run_cg(&net, std::slice::from_ref(&f), &mut SimplexBackend::new(), &opts());
    assert_eq!(cg.rejected_upfront, vec![f.id]);
    assert_eq!(cg.ub, 0.0);
}

#[test]
fn cg_matches_full_enumeration_and_certifies() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..40 {
        let (net, flows) = random_instance(&mut rng, 8, 8);
        let all: Vec<Column> = flows.iter().flat_map(|f| all_columns(&net, f)).collect();
        let full = solve_lp(&build_master(&net, &flows, &all).lp);
        assert_eq!(full.status, LpStatus::Optimal);
        let cg = run_cg(&net, &flows, &mut SimplexBackend::new(), &opts());
        assert!(cg.certified);
        assert!((cg.ub - full.objective).abs() <= 1e-6 * (1.0 + full.objective), "{} vs {}", cg.ub, full.objective);
        // Monotone master values.
        assert!(cg.log.windows(2).all(|w| w[1].lp_obj >= w[0].lp_obj - 1e-6 * (1.0 + w[0].lp_obj)));
        // Pricing exhaustion and dual feasibility of every generated column.
        let eligible: Vec<FlowSpec> = flows.iter().filter(|f| !cg.rejected_upfront.contains(&f.id)).cloned().collect();
        for f in &eligible {
            assert!(price_flow(&net, f, &cg.duals).columns.is_empty());
        }
        for c in &cg.pool {
            assert!(cg.duals.reduced_cost(c) <= 1e-6 * c.value.max(1.0));
        }
    }
}

/// Best 0-1 selection over `pool`, at most one column per flow.
fn brute_force(net: &Network, flows: &[FlowSpec], pool: &[Column]) -> u64 {
    fn go(i: usize, flows: &[FlowSpec], by_flow: &[Vec<&Column>], arc: &mut [Bytes], node: &mut [Bytes], net: &Network) -> u64 {
        if i == flows.len() {
            return 0;
        }
        let mut best = go(i + 1, flows, by_flow, arc, node, net);
        for c in &by_flow[i] {
            let b = c.beta();
            let fits = c.path.arcs.iter().all(|&a| arc[a] >= b) && c.nodes.iter().all(|&v| node[v] >= b);
            if fits {
                c.path.arcs.iter().for_each(|&a| arc[a] -= b);
                c.nodes.iter().for_each(|&v| node[v] -= b);
                best = best.max(flows[i].throughput_bps + go(i + 1, flows, by_flow, arc, node, net));
                c.path.arcs.iter().for_each(|&a| arc[a] += b);
                c.nodes.iter().for_each(|&v| node[v] += b);
            }
        }
        best
    }
    let by_flow: Vec<Vec<&Column>> = flows.iter().map(|f| pool.iter().filter(|c| c.flow() == f.id).collect()).collect();
    let mut arc: Vec<Bytes> = (0..net.arc_count()).map(|a| net.arc(a).capacity_bytes).collect();
    let mut node: Vec<Bytes> = (0..net.node_count()).map(|v| net.node(v).buffer_bytes).collect();
    go(0, flows, &by_flow, &mut arc, &mut node, net)
}

#[test]
fn rounding_is_exact_over_the_pool() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..40 {
        let (net, flows) = random_instance(&mut rng, 7, 6);
        let res = admit(&net, &flows, &opts());
        res.solution.verify(&net, &flows).unwrap();
        let oracle = brute_force(&net, &flows, &res.pool);
        assert_eq!(res.report.z as u64, oracle);
        assert_eq!(res.solution.throughput_bps(&flows), oracle);
        assert!(res.report.z <= res.report.ub + 1e-6 * res.report.ub.max(1.0));
        let base = res.baseline.throughput_bps(&flows);
        assert!(res.solution.throughput_bps(&flows) >= base);
        res.baseline.verify(&net, &flows).unwrap();
    }
}

#[test]
fn ospf_weight_examples() {
    let net = Network::new(NetworkInstance {
        cycle: CycleConfig::new(10_000, 8, 3),
        nodes: (1..=3).map(|id| node(id, 10, 0)).collect(),
        arcs: vec![arc(1, 2, 0, 12_500_000), arc(2, 3, 0, 25_000_000), arc(1, 3, 0, 1_250_000)],
    })
    .unwrap();
    let w = ospf_weights(&net, &OspfConfig::default());
    assert_eq!(w[0], 1.0);
    assert_eq!(w[1], 0.5);
    assert!((w[2] / w[0] - 10.0).abs() < 1e-12);
}

use crate::ospf::ospf_weights;

#[test]
fn ospf_greedy_order() {
    let net = line3();
    // beta of the m=1 pattern is 3000 bytes, so two flows need 6000.
    let mut small = line3().instance;
    for a in small.arcs.iter_mut() {
        a.capacity_bytes = 4_000;
    }
    let small = Network::new(small).unwrap();
    let mk = |id| {
        let mut f = params(id, 1, 3, 1, 1500, 200).into_flow(vec![TransmissionPattern {
            multiple: 1,
            b_prime: 1500,
        }]);
        f.throughput_bps = u64::from(id) * 1_000_000_000;
        f
    };
    let flows = vec![mk(1), mk(2)];
    let ample = ospf_admit(&net, &flows, &OspfConfig::default());
    assert_eq!(ample.accepted_count(), 2);
    assert_eq!(ample.decision(FlowId(1)).unwrap().arcs, vec![0, 1]);
    let tight = ospf_admit(&small, &flows, &OspfConfig::default());
    assert!(tight.decision(FlowId(1)).is_some());
    assert!(tight.decision(FlowId(2)).is_none());
    // The exact method prefers the larger flow.
    let res = admit(&small, &flows, &opts());
    assert!(res.solution.decision(FlowId(2)).is_some());
    assert_eq!(throughput_gap_of(&res, &flows), Some(200.0));
}

fn throughput_gap_of(res: &CgxResult, flows: &[FlowSpec]) -> Option<f64> {
    crate::ospf::throughput_gap(res.solution.throughput_bps(flows), res.baseline.throughput_bps(flows))
}

#[test]
fn ospf_six_node_replay() {
    // Two routes 1-2-3-6 (fat links) and 1-4-5-6 (thin); the weights steer
    // every flow onto the fat route until it fills up.
    let nodes = (1..=6).map(|id| node(id, 10, 1)).collect();
    let mut arcs = Vec::new();
    for (a, b, cap) in [(1, 2, 7_000), (2, 3, 7_000), (3, 6, 7_000), (1, 4, 60_000), (4, 5, 60_000), (5, 6, 60_000)] {
        arcs.push(arc(a, b, 1, cap));
        arcs.push(arc(b, a, 1, cap));
    }
    let net = Network::new(NetworkInstance {
        cycle: CycleConfig::new(10_000, 8, 3),
        nodes,
        arcs,
    })
    .unwrap();
    let flows: Vec<FlowSpec> = (1..=4).map(|i| params(i, 1, 6, 1, 1500, 500).with_catalog(&net)).collect();
    let sol = ospf_admit(&net, &flows, &OspfConfig::default());
    // Replay: weights favour the 60 kB links; the smallest reservation is
    // 1500 bytes (m >= 2) and three hops share each node's 1 MB buffer.
    let beta = flows[0].patterns.iter().map(|p| p.max_reservation()).min().unwrap();
    let fat_path = net.arcs_of_node_path(&[NodeId(1), NodeId(4), NodeId(5), NodeId(6)]).unwrap();
    let mut left = 60_000u64;
    for f in &flows {
        let d = sol.decision(f.id);
        if left >= beta {
            assert_eq!(d.unwrap().arcs, fat_path);
            assert_eq!(d.unwrap().beta, beta);
            left -= beta;
        } else {
            assert!(d.is_none());
        }
    }
    sol.verify(&net, &flows).unwrap();
}

#[test]
fn throughput_gap_examples() {
    use crate::ospf::throughput_gap;
    assert_eq!(throughput_gap(5, 5), Some(100.0));
    assert_eq!(throughput_gap(10, 5), Some(200.0));
    assert_eq!(throughput_gap(10, 0), None);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn admitted_solutions_pass_integer_recheck(seed in 0u64..100_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (net, flows) = random_instance(&mut rng, 8, 10);
        let res = admit(&net, &flows, &opts());
        prop_assert!(res.solution.verify(&net, &flows).is_ok());
        prop_assert!(res.baseline.verify(&net, &flows).is_ok());
        prop_assert!(res.solution.throughput_bps(&flows) >= res.baseline.throughput_bps(&flows));
        prop_assert!(res.report.z <= res.report.ub + 1e-6 * res.report.ub.max(1.0));
    }
}
