//! Static domain model: topology, flows, transmission patterns and the
//! closed-form delay and reservation formulas used by both the data plane
//! and the admission control.
//!
//! All durations are integer nanoseconds and all data sizes are bytes.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Integer nanoseconds.
pub type Nanos = i64;
/// Data size in bytes.
pub type Bytes = u64;

pub const NS_PER_US: Nanos = 1_000;
pub const NS_PER_S: i128 = 1_000_000_000;

/// Converts a microsecond quantity to nanoseconds, rounding to the nearest
/// nanosecond. Integer microsecond inputs convert exactly.
pub fn us_to_ns(us: f64) -> Result<Nanos, ModelError> {
    if !us.is_finite() {
        return Err(ModelError::BadDuration(us));
    }
    let ns = (us * NS_PER_US as f64).round();
    if ns.abs() > i64::MAX as f64 / 4.0 {
        return Err(ModelError::BadDuration(us));
    }
    Ok(ns as Nanos)
}

pub fn ns_to_us(ns: Nanos) -> f64 {
    ns as f64 / NS_PER_US as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FlowId(pub u32);

impl fmt::Display for FlowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("duration {0} us is not representable")]
    BadDuration(f64),
    #[error("arc {tail}->{head} does not connect the given nodes {got_tail}->{got_head}")]
    MismatchedEndpoints {
        tail: NodeId,
        head: NodeId,
        got_tail: NodeId,
        got_head: NodeId,
    },
    #[error("path is not a connected simple path from {src} to {dst}")]
    DisconnectedPath { src: NodeId, dst: NodeId },
    #[error("pattern index {0} out of range")]
    NoSuchPattern(usize),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("invalid instance: {0}")]
    Invalid(ValidationReport),
}

/// Global cycle parameters shared by every gate-controlled port.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleConfig {
    /// Cycle length T.
    pub cycle_ns: Nanos,
    /// Hypercycle length HC in cycles.
    pub hypercycle: u32,
    /// Gated queues per port.
    pub queues: u32,
}

impl CycleConfig {
    pub fn new(cycle_ns: Nanos, hypercycle: u32, queues: u32) -> Self {
        CycleConfig {
            cycle_ns,
            hypercycle,
            queues,
        }
    }

    /// Divisors of the hypercycle, ascending. These are the admissible
    /// pattern periods in cycles.
    pub fn period_divisors(&self) -> Vec<u32> {
        (1..=self.hypercycle)
            .filter(|m| self.hypercycle.is_multiple_of(*m))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: NodeId,
    /// Queuing-delay upper bound Q.
    pub queuing_ns: Nanos,
    /// Constant processing delay P.
    pub processing_ns: Nanos,
    /// Buffer capacity c_v shared over all ports.
    pub buffer_bytes: Bytes,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArcSpec {
    pub tail: NodeId,
    pub head: NodeId,
    pub prop_ns: Nanos,
    /// Link capacity c_a per cycle.
    pub capacity_bytes: Bytes,
}

impl ArcSpec {
    /// Line rate implied by a per-cycle byte budget.
    pub fn rate_bps(&self, cycle: &CycleConfig) -> u64 {
        ((self.capacity_bytes as i128 * 8 * NS_PER_S) / cycle.cycle_ns as i128) as u64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkInstance {
    pub cycle: CycleConfig,
    pub nodes: Vec<NodeSpec>,
    pub arcs: Vec<ArcSpec>,
}

/// A regular reservation of `b_prime` bytes every `multiple` cycles.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TransmissionPattern {
    pub multiple: u32,
    pub b_prime: Bytes,
}

impl TransmissionPattern {
    pub fn period_ns(&self, cycle: &CycleConfig) -> Nanos {
        self.multiple as Nanos * cycle.cycle_ns
    }

    pub fn max_reservation(&self) -> Bytes {
        max_reservation(self)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowSpec {
    pub id: FlowId,
    pub src: NodeId,
    pub dst: NodeId,
    /// Arrival-curve rate r_f.
    pub rate_bps: u64,
    /// Arrival-curve burst b_f.
    pub burst_bytes: Bytes,
    /// Throughput R_f, the objective weight.
    pub throughput_bps: u64,
    /// End-to-end deadline D_f.
    pub deadline_ns: Nanos,
    pub max_packet_bytes: Bytes,
    pub patterns: Vec<TransmissionPattern>,
}

impl FlowSpec {
    pub fn pattern(&self, k: usize) -> Result<&TransmissionPattern, ModelError> {
        self.patterns.get(k).ok_or(ModelError::NoSuchPattern(k))
    }
}

/// A delay-feasible (path, pattern) couple of one flow.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PathPattern {
    pub flow: FlowId,
    /// Arc indices into the network, from source to destination.
    pub arcs: Vec<usize>,
    pub pattern: usize,
    /// Sum of arc delays plus the shaping delay.
    pub total_delay_ns: Nanos,
    pub beta: Bytes,
}

/// `l_a = Q(tail) + P(head) + Prop`.
pub fn arc_delay(arc: &ArcSpec, tail: &NodeSpec, head: &NodeSpec) -> Result<Nanos, ModelError> {
    if arc.tail != tail.id || arc.head != head.id {
        return Err(ModelError::MismatchedEndpoints {
            tail: arc.tail,
            head: arc.head,
            got_tail: tail.id,
            got_head: head.id,
        });
    }
    Ok(tail.queuing_ns + head.processing_ns + arc.prop_ns)
}

/// Delay seen by the last packet of a maximal burst at the ingress shaper:
/// `T_res * ceil(b_f / b'_f)`.
pub fn shaping_delay(flow: &FlowSpec, pattern: &TransmissionPattern, cycle: &CycleConfig) -> Nanos {
    assert!(pattern.b_prime > 0, "shaped burst must be positive");
    let chunks = flow.burst_bytes.div_ceil(pattern.b_prime);
    pattern.period_ns(cycle) * chunks as Nanos
}

/// Worst-case per-cycle load of a pattern downstream of the dampers: two
/// adjacent reservations can collapse into one cycle only when the pattern
/// reserves every cycle.
pub fn max_reservation(pattern: &TransmissionPattern) -> Bytes {
    if pattern.multiple == 1 {
        2 * pattern.b_prime
    } else {
        pattern.b_prime
    }
}

/// Smallest shaped burst for a pattern period: a whole number of maximum
/// size packets that carries the arrival rate over one period.
pub fn sustainable_b_prime(rate_bps: u64, max_packet: Bytes, multiple: u32, cycle: &CycleConfig) -> Bytes {
    let bits = rate_bps as u128 * multiple as u128 * cycle.cycle_ns as u128;
    let bytes = bits.div_ceil(8 * NS_PER_S as u128) as Bytes;
    let packets = bytes.div_ceil(max_packet).max(1);
    packets * max_packet
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, msg: impl Into<String>) {
        self.violations.push(msg.into());
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.violations.join("; "))
    }
}

/// Lists every violated structural invariant of an instance.
pub fn validate_instance(instance: &NetworkInstance) -> ValidationReport {
    let mut report = ValidationReport::default();
    let c = &instance.cycle;
    if c.cycle_ns <= 0 {
        report.push(format!("cycle length {} ns must be positive", c.cycle_ns));
    }
    if c.hypercycle < 1 {
        report.push("hypercycle must be at least one cycle");
    }
    if c.queues < 3 {
        report.push(format!("{} queues per port, need at least 3", c.queues));
    }

    let mut seen = BTreeMap::new();
    for node in &instance.nodes {
        if seen.insert(node.id, ()).is_some() {
            report.push(format!("duplicate node id {}", node.id));
        }
        if node.queuing_ns <= 0 {
            report.push(format!("node {}: queuing bound must be positive", node.id));
        }
        if node.processing_ns < 0 {
            report.push(format!("node {}: negative processing delay", node.id));
        }
        if node.buffer_bytes == 0 {
            report.push(format!("node {}: zero buffer capacity", node.id));
        }
    }
    for (i, arc) in instance.arcs.iter().enumerate() {
        for end in [arc.tail, arc.head] {
            if !seen.contains_key(&end) {
                report.push(format!("arc {i}: endpoint {end} is not a node"));
            }
        }
        if arc.tail == arc.head {
            report.push(format!("arc {i}: self loop at {}", arc.tail));
        }
        if arc.prop_ns < 0 {
            report.push(format!("arc {i}: negative propagation delay"));
        }
        if arc.capacity_bytes == 0 {
            report.push(format!("arc {i}: zero capacity"));
        }
    }
    report
}

pub fn validate_flow(flow: &FlowSpec, cycle: &CycleConfig) -> ValidationReport {
    let mut report = ValidationReport::default();
    let id = flow.id;
    if flow.src == flow.dst {
        report.push(format!("flow {id}: source equals destination"));
    }
    if flow.burst_bytes == 0 {
        report.push(format!("flow {id}: zero burst"));
    }
    if flow.throughput_bps == 0 {
        report.push(format!("flow {id}: zero throughput"));
    }
    if flow.deadline_ns <= 0 {
        report.push(format!("flow {id}: non-positive deadline"));
    }
    if flow.max_packet_bytes == 0 {
        report.push(format!("flow {id}: zero packet size"));
    }
    for (k, p) in flow.patterns.iter().enumerate() {
        if p.multiple == 0 || !cycle.hypercycle.is_multiple_of(p.multiple) {
            report.push(format!("flow {id}: pattern {k} period {} does not divide the hypercycle", p.multiple));
        }
        if p.b_prime < flow.max_packet_bytes {
            report.push(format!("flow {id}: pattern {k} shaped burst below packet size"));
        }
    }
    report
}

/// A validated instance with adjacency indices.
#[derive(Clone, Debug)]
pub struct Network {
    pub instance: NetworkInstance,
    index: BTreeMap<NodeId, usize>,
    arc_tail: Vec<usize>,
    arc_head: Vec<usize>,
    out_arcs: Vec<Vec<usize>>,
    in_arcs: Vec<Vec<usize>>,
    arc_delay: Vec<Nanos>,
}

impl Network {
    pub fn new(instance: NetworkInstance) -> Result<Self, ModelError> {
        let report = validate_instance(&instance);
        if !report.is_empty() {
            return Err(ModelError::Invalid(report));
        }
        let index: BTreeMap<NodeId, usize> = instance
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id, i))
            .collect();
        let n = instance.nodes.len();
        let mut out_arcs = vec![Vec::new(); n];
        let mut in_arcs = vec![Vec::new(); n];
        let mut arc_tail = Vec::with_capacity(instance.arcs.len());
        let mut arc_head = Vec::with_capacity(instance.arcs.len());
        let mut delays = Vec::with_capacity(instance.arcs.len());
        for (a, arc) in instance.arcs.iter().enumerate() {
            let t = index[&arc.tail];
            let h = index[&arc.head];
            arc_tail.push(t);
            arc_head.push(h);
            out_arcs[t].push(a);
            in_arcs[h].push(a);
            delays.push(arc_delay(arc, &instance.nodes[t], &instance.nodes[h])?);
        }
        Ok(Network {
            instance,
            index,
            arc_tail,
            arc_head,
            out_arcs,
            in_arcs,
            arc_delay: delays,
        })
    }

    pub fn cycle(&self) -> &CycleConfig {
        &self.instance.cycle
    }

    pub fn instance(&self) -> &NetworkInstance {
        &self.instance
    }

    pub fn node_count(&self) -> usize {
        self.instance.nodes.len()
    }

    pub fn arc_count(&self) -> usize {
        self.instance.arcs.len()
    }

    pub fn node_index(&self, id: NodeId) -> Result<usize, ModelError> {
        self.index.get(&id).copied().ok_or(ModelError::UnknownNode(id))
    }

    pub fn node(&self, v: usize) -> &NodeSpec {
        &self.instance.nodes[v]
    }

    pub fn arc(&self, a: usize) -> &ArcSpec {
        &self.instance.arcs[a]
    }

    pub fn tail(&self, a: usize) -> usize {
        self.arc_tail[a]
    }

    pub fn head(&self, a: usize) -> usize {
        self.arc_head[a]
    }

    pub fn out_arcs(&self, v: usize) -> &[usize] {
        &self.out_arcs[v]
    }

    pub fn in_arcs(&self, v: usize) -> &[usize] {
        &self.in_arcs[v]
    }

    /// Precomputed `l_a`.
    pub fn arc_delay(&self, a: usize) -> Nanos {
        self.arc_delay[a]
    }

    pub fn find_arc(&self, tail: usize, head: usize) -> Option<usize> {
        self.out_arcs[tail].iter().copied().find(|&a| self.arc_head[a] == head)
    }

    /// Node indices visited by an arc path, source first.
    pub fn path_nodes(&self, arcs: &[usize]) -> Vec<usize> {
        let mut nodes = Vec::with_capacity(arcs.len() + 1);
        if let Some(&first) = arcs.first() {
            nodes.push(self.arc_tail[first]);
        }
        nodes.extend(arcs.iter().map(|&a| self.arc_head[a]));
        nodes
    }

    /// Converts a node-id path to arc indices.
    pub fn arcs_of_node_path(&self, nodes: &[NodeId]) -> Result<Vec<usize>, ModelError> {
        let idx = nodes
            .iter()
            .map(|&id| self.node_index(id))
            .collect::<Result<Vec<_>, _>>()?;
        let (src, dst) = match (nodes.first(), nodes.last()) {
            (Some(&s), Some(&d)) if nodes.len() >= 2 => (s, d),
            _ => {
                let id = nodes.first().copied().unwrap_or(NodeId(0));
                return Err(ModelError::DisconnectedPath { src: id, dst: id });
            }
        };
        idx.windows(2)
            .map(|w| {
                self.find_arc(w[0], w[1])
                    .ok_or(ModelError::DisconnectedPath { src, dst })
            })
            .collect()
    }

    /// Checks that `arcs` is a simple connected path from `src` to `dst`.
    pub fn check_path(&self, arcs: &[usize], src: usize, dst: usize) -> bool {
        if arcs.is_empty() || arcs.iter().any(|&a| a >= self.arc_count()) {
            return false;
        }
        if self.arc_tail[arcs[0]] != src || self.arc_head[*arcs.last().unwrap()] != dst {
            return false;
        }
        if arcs.windows(2).any(|w| self.arc_head[w[0]] != self.arc_tail[w[1]]) {
            return false;
        }
        let mut seen = vec![false; self.node_count()];
        self.path_nodes(arcs).into_iter().all(|v| !std::mem::replace(&mut seen[v], true))
    }

    /// Minimum total arc delay from `src` to every node.
    pub fn min_delays_from(&self, src: usize) -> Vec<Option<Nanos>> {
        dijkstra(self.node_count(), src, |v| {
            self.out_arcs[v].iter().map(move |&a| (self.arc_head[a], self.arc_delay[a]))
        })
    }

    /// Minimum total arc delay from every node to `dst`.
    pub fn min_delays_to(&self, dst: usize) -> Vec<Option<Nanos>> {
        dijkstra(self.node_count(), dst, |v| {
            self.in_arcs[v].iter().map(move |&a| (self.arc_tail[a], self.arc_delay[a]))
        })
    }
}

fn dijkstra<F, I>(n: usize, src: usize, mut next: F) -> Vec<Option<Nanos>>
where
    F: FnMut(usize) -> I,
    I: Iterator<Item = (usize, Nanos)>,
{
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;
    let mut dist: Vec<Option<Nanos>> = vec![None; n];
    let mut heap = BinaryHeap::new();
    dist[src] = Some(0);
    heap.push(Reverse((0, src)));
    while let Some(Reverse((d, v))) = heap.pop() {
        if dist[v].is_some_and(|best| d > best) {
            continue;
        }
        for (w, len) in next(v) {
            let nd = d + len;
            if dist[w].is_none_or(|cur| nd < cur) {
                dist[w] = Some(nd);
                heap.push(Reverse((nd, w)));
            }
        }
    }
    dist
}

/// Checks a (flow, pattern, path) triple against the delay budget.
pub fn path_feasibility(
    net: &Network,
    flow: &FlowSpec,
    k: usize,
    arcs: &[usize],
) -> Result<Option<PathPattern>, ModelError> {
    let Some(pattern) = flow.patterns.get(k) else {
        return Ok(None);
    };
    let src = net.node_index(flow.src)?;
    let dst = net.node_index(flow.dst)?;
    if !net.check_path(arcs, src, dst) {
        return Err(ModelError::DisconnectedPath {
            src: flow.src,
            dst: flow.dst,
        });
    }
    let path_delay: Nanos = arcs.iter().map(|&a| net.arc_delay(a)).sum();
    let total = path_delay + shaping_delay(flow, pattern, net.cycle());
    if total > flow.deadline_ns {
        return Ok(None);
    }
    Ok(Some(PathPattern {
        flow: flow.id,
        arcs: arcs.to_vec(),
        pattern: k,
        total_delay_ns: total,
        beta: max_reservation(pattern),
    }))
}

/// Delay and jitter guarantees of an admitted path.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct E2eBounds {
    /// Sum of per-pair delays: `Q + P(next)` for every complete pair and
    /// `Q` of the egress node for the final incomplete pair.
    pub pair_delay_ns: Nanos,
    pub propagation_ns: Nanos,
    pub shaping_ns: Nanos,
    /// `Q` of the egress node.
    pub jitter_ns: Nanos,
}

impl E2eBounds {
    /// Bound on delay from the ingress eligibility time to egress departure.
    pub fn from_ingress_ns(&self) -> Nanos {
        self.pair_delay_ns + self.propagation_ns
    }

    /// Bound including the worst-case ingress shaping delay.
    pub fn with_shaping_ns(&self) -> Nanos {
        self.from_ingress_ns() + self.shaping_ns
    }
}

pub fn e2e_bounds(net: &Network, flow: &FlowSpec, pp: &PathPattern) -> Result<E2eBounds, ModelError> {
    let nodes = net.path_nodes(&pp.arcs);
    let last = *nodes.last().ok_or(ModelError::DisconnectedPath {
        src: flow.src,
        dst: flow.dst,
    })?;
    let complete: Nanos = nodes
        .windows(2)
        .map(|w| net.node(w[0]).queuing_ns + net.node(w[1]).processing_ns)
        .sum();
    let jitter = net.node(last).queuing_ns;
    let pattern = flow.pattern(pp.pattern)?;
    Ok(E2eBounds {
        pair_delay_ns: complete + jitter,
        propagation_ns: pp.arcs.iter().map(|&a| net.arc(a).prop_ns).sum(),
        shaping_ns: shaping_delay(flow, pattern, net.cycle()),
        jitter_ns: jitter,
    })
}

/// Flow parameters before a pattern catalog is attached.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowParams {
    pub id: FlowId,
    pub src: NodeId,
    pub dst: NodeId,
    pub rate_bps: u64,
    pub burst_bytes: Bytes,
    pub throughput_bps: u64,
    pub deadline_ns: Nanos,
    pub max_packet_bytes: Bytes,
}

/// One pattern per divisor of the hypercycle, keeping those whose shaping
/// delay leaves at least one delay-feasible path.
pub fn build_pattern_catalog(net: &Network, params: &FlowParams) -> Vec<TransmissionPattern> {
    let cycle = net.cycle();
    let min_path = match (net.node_index(params.src), net.node_index(params.dst)) {
        (Ok(s), Ok(t)) if s != t => net.min_delays_from(s)[t],
        _ => None,
    };
    let Some(min_path) = min_path else {
        return Vec::new();
    };
    let flow = params.clone().into_flow(Vec::new());
    cycle
        .period_divisors()
        .into_iter()
        .map(|m| TransmissionPattern {
            multiple: m,
            b_prime: sustainable_b_prime(params.rate_bps, params.max_packet_bytes, m, cycle),
        })
        .filter(|p| min_path + shaping_delay(&flow, p, cycle) <= params.deadline_ns)
        .collect()
}

impl FlowParams {
    pub fn into_flow(self, patterns: Vec<TransmissionPattern>) -> FlowSpec {
        FlowSpec {
            id: self.id,
            src: self.src,
            dst: self.dst,
            rate_bps: self.rate_bps,
            burst_bytes: self.burst_bytes,
            throughput_bps: self.throughput_bps,
            deadline_ns: self.deadline_ns,
            max_packet_bytes: self.max_packet_bytes,
            patterns,
        }
    }

    pub fn with_catalog(self, net: &Network) -> FlowSpec {
        let patterns = build_pattern_catalog(net, &self);
        self.into_flow(patterns)
    }
}

impl From<&FlowSpec> for FlowParams {
    fn from(f: &FlowSpec) -> Self {
        FlowParams {
            id: f.id,
            src: f.src,
            dst: f.dst,
            rate_bps: f.rate_bps,
            burst_bytes: f.burst_bytes,
            throughput_bps: f.throughput_bps,
            deadline_ns: f.deadline_ns,
            max_packet_bytes: f.max_packet_bytes,
        }
    }
}
