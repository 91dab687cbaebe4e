//! Shortest-path baseline: inverse-capacity link weights, one path per flow,
//! greedy admission in input order.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::admission::{AdmissionSolution, FlowDecision};
use crate::model::{path_feasibility, Bytes, FlowSpec, Network, PathPattern};

#[derive(Clone, Debug, PartialEq)]
pub struct OspfConfig {
    /// Numerator of the weight rule `w_a = K / (8 c_a)`.
    pub weight_constant: f64,
}

impl Default for OspfConfig {
    fn default() -> Self {
        OspfConfig { weight_constant: 1e8 }
    }
}

pub fn ospf_weights(net: &Network, cfg: &OspfConfig) -> Vec<f64> {
    (0..net.arc_count())
        .map(|a| cfg.weight_constant / (8.0 * net.arc(a).capacity_bytes as f64))
        .collect()
}

#[derive(PartialEq)]
struct Entry {
    dist: f64,
    node_id: u32,
    node: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    // Reversed so the max-heap pops the nearest node, lowest id first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then(other.node_id.cmp(&self.node_id))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Minimum-weight path as arc indices. Among equal-weight paths the one
/// whose predecessor has the lowest node id wins.
pub fn shortest_path(net: &Network, weights: &[f64], src: usize, dst: usize) -> Option<Vec<usize>> {
    let n = net.node_count();
    let mut dist = vec![f64::INFINITY; n];
    let mut pred: Vec<Option<usize>> = vec![None; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[src] = 0.0;
    heap.push(Entry {
        dist: 0.0,
        node_id: net.node(src).id.0,
        node: src,
    });
    while let Some(Entry { node: v, .. }) = heap.pop() {
        if std::mem::replace(&mut done[v], true) {
            continue;
        }
        if v == dst {
            break;
        }
        for &a in net.out_arcs(v) {
            let w = net.head(a);
            if done[w] {
                continue;
            }
            let nd = dist[v] + weights[a];
            let better = nd < dist[w]
                || (nd == dist[w] && pred[w].is_some_and(|p| net.node(v).id < net.node(net.tail(p)).id));
            if better {
                dist[w] = nd;
                pred[w] = Some(a);
                heap.push(Entry {
                    dist: nd,
                    node_id: net.node(w).id.0,
                    node: w,
                });
            }
        }
    }
    if src == dst || pred[dst].is_none() {
        return None;
    }
    let mut arcs = Vec::new();
    let mut at = dst;
    while at != src {
        let a = pred[at]?;
        arcs.push(a);
        at = net.tail(a);
    }
    arcs.reverse();
    Some(arcs)
}

/// Greedy admission along weight-shortest paths with the smallest-reservation
/// delay-feasible pattern. Flows are processed in input order.
pub fn ospf_admit(net: &Network, flows: &[FlowSpec], cfg: &OspfConfig) -> AdmissionSolution {
    let weights = ospf_weights(net, cfg);
    let mut arc_left: Vec<Bytes> = (0..net.arc_count()).map(|a| net.arc(a).capacity_bytes).collect();
    let mut node_left: Vec<Bytes> = (0..net.node_count()).map(|v| net.node(v).buffer_bytes).collect();
    let mut decisions = Vec::with_capacity(flows.len());
    for flow in flows {
        let accepted = choose(net, flow, &weights).filter(|pp| {
            let nodes = net.path_nodes(&pp.arcs);
            let fits = pp.arcs.iter().all(|&a| arc_left[a] >= pp.beta) && nodes.iter().all(|&v| node_left[v] >= pp.beta);
            if fits {
                pp.arcs.iter().for_each(|&a| arc_left[a] -= pp.beta);
                nodes.iter().for_each(|&v| node_left[v] -= pp.beta);
            }
            fits
        });
        decisions.push(FlowDecision {
            flow: flow.id,
            accepted,
        });
    }
    AdmissionSolution { decisions }
}

fn choose(net: &Network, flow: &FlowSpec, weights: &[f64]) -> Option<PathPattern> {
    let src = net.node_index(flow.src).ok()?;
    let dst = net.node_index(flow.dst).ok()?;
    let arcs = shortest_path(net, weights, src, dst)?;
    let mut order: Vec<usize> = (0..flow.patterns.len()).collect();
    order.sort_by_key(|&k| (flow.patterns[k].max_reservation(), k));
    order
        .into_iter()
        .find_map(|k| path_feasibility(net, flow, k, &arcs).ok().flatten())
}

/// `Th(CGX) / Th(OSPF) * 100`; `None` when the baseline accepts nothing.
pub fn throughput_gap(cgx_bps: u64, ospf_bps: u64) -> Option<f64> {
    (ospf_bps > 0).then(|| cgx_bps as f64 / ospf_bps as f64 * 100.0)
}
