//! The bundled proof-of-concept scenario: five high-priority flows over
//! 10 Gb/s ports with a 5 us queuing bound per hop, plus best-effort
//! background traffic.

use crate::admission::{AdmissionSolution, FlowDecision};
use crate::model::{
    path_feasibility, sustainable_b_prime, ArcSpec, CycleConfig, FlowId, FlowSpec, NetworkInstance, Network, NodeId,
    NodeSpec, TransmissionPattern, NS_PER_US,
};
use crate::sim::{BeFlow, TrafficModel};

pub const CYCLE_NS: i64 = 2_500;
pub const QUEUING_NS: i64 = 5_000;
pub const LINK_BPS: u64 = 10_000_000_000;
pub const HORIZON_NS: i64 = 30_000_000;

#[derive(Clone, Debug)]
pub struct Bundle {
    pub instance: NetworkInstance,
    pub flows: Vec<FlowSpec>,
    pub solution: AdmissionSolution,
    pub traffic: TrafficModel,
    pub horizon_ns: i64,
}

const LINKS: [(u32, u32); 15] = [
    (1, 2),
    (2, 3),
    (3, 4),
    (4, 5),
    (5, 6),
    (7, 2),
    (4, 8),
    (9, 4),
    (6, 10),
    (11, 12),
    (12, 13),
    (13, 14),
    (14, 15),
    (16, 12),
    (14, 17),
];

/// (rate, burst, packet, path)
const FLOWS: [(u64, u64, u64, &[u32]); 5] = [
    (2_240_000_000, 1400, 350, &[1, 2, 3, 4, 5, 6]),
    (6_720_000_000, 4200, 700, &[7, 2, 3, 4, 8]),
    (6_720_000_000, 4200, 700, &[9, 4, 5, 6, 10]),
    (3_360_000_000, 2100, 525, &[11, 12, 13, 14, 15]),
    (3_360_000_000, 2100, 525, &[16, 12, 13, 14, 17]),
];

/// (src, dst, rate, packet)
const BEST_EFFORT: [(u32, u32, u64, u64); 7] = [
    (1, 6, 400_000_000, 256),
    (7, 8, 300_000_000, 200),
    (9, 10, 300_000_000, 300),
    (11, 15, 1_500_000_000, 300),
    (16, 17, 1_000_000_000, 250),
    (6, 1, 2_000_000_000, 300),
    (15, 11, 2_000_000_000, 220),
];

pub fn sec5a() -> Bundle {
    let cycle = CycleConfig::new(CYCLE_NS, 8, 3);
    let capacity = LINK_BPS * CYCLE_NS as u64 / 8 / 1_000_000_000;
    let nodes = (1..=17)
        .map(|id| NodeSpec {
            id: NodeId(id),
            queuing_ns: QUEUING_NS,
            processing_ns: 0,
            buffer_bytes: 1_000_000,
        })
        .collect();
    let arcs = LINKS
        .iter()
        .flat_map(|&(a, b)| [(a, b), (b, a)])
        .map(|(a, b)| ArcSpec {
            tail: NodeId(a),
            head: NodeId(b),
            prop_ns: 0,
            capacity_bytes: capacity,
        })
        .collect();
    let instance = NetworkInstance { cycle, nodes, arcs };
    let net = Network::new(instance.clone()).expect("bundled instance is valid");

    let mut flows = Vec::new();
    let mut decisions = Vec::new();
    for (i, &(rate, burst, packet, path)) in FLOWS.iter().enumerate() {
        let pattern = TransmissionPattern {
            multiple: 1,
            b_prime: sustainable_b_prime(rate, packet, 1, &cycle),
        };
        let flow = FlowSpec {
            id: FlowId(i as u32 + 1),
            src: NodeId(path[0]),
            dst: NodeId(*path.last().unwrap()),
            rate_bps: rate,
            burst_bytes: burst,
            throughput_bps: rate,
            deadline_ns: 100 * NS_PER_US,
            max_packet_bytes: packet,
            patterns: vec![pattern],
        };
        let ids: Vec<NodeId> = path.iter().map(|&v| NodeId(v)).collect();
        let arcs = net.arcs_of_node_path(&ids).expect("bundled path exists");
        let pp = path_feasibility(&net, &flow, 0, &arcs)
            .expect("bundled path is connected")
            .expect("bundled deadline is loose");
        decisions.push(FlowDecision {
            flow: flow.id,
            accepted: Some(pp),
        });
        flows.push(flow);
    }
    let traffic = TrafficModel {
        best_effort: BEST_EFFORT
            .iter()
            .map(|&(s, d, rate, size)| BeFlow {
                src: NodeId(s),
                dst: NodeId(d),
                rate_bps: rate,
                packet_bytes: size,
            })
            .collect(),
    };
    Bundle {
        instance,
        flows,
        solution: AdmissionSolution { decisions },
        traffic,
        horizon_ns: HORIZON_NS,
    }
}
