//! Discrete-event simulation of the damper data plane: ingress shaping into
//! pattern reservations, cyclic gated queues, damper eligibility times, and
//! per-packet delay measurement.

mod check;
pub mod clock;
pub mod damper;
mod engine;
pub mod port;
pub mod shaper;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::admission::AdmissionSolution;
use crate::model::{Bytes, FlowId, FlowSpec, Nanos, Network, NodeId, TransmissionPattern};

pub use check::{check_invariants, flow_stats, InvariantReport, Violation};
pub use clock::NodeClock;
pub use damper::{compute_eligibility, record_departure, DamperHeader};
pub use engine::run_simulation;
pub use port::{tx_ns, PortScheduler};
pub use shaper::{packetize, Shaper};

/// An admitted flow as the data plane sees it.
#[derive(Clone, Debug, PartialEq)]
pub struct SimFlow {
    pub spec: FlowSpec,
    pub arcs: Vec<usize>,
    pub pattern: TransmissionPattern,
}

impl SimFlow {
    /// The accepted flows of an admission decision.
    pub fn from_solution(net: &Network, flows: &[FlowSpec], solution: &AdmissionSolution) -> Result<Vec<SimFlow>, SimError> {
        solution
            .accepted()
            .map(|pp| {
                let spec = flows
                    .iter()
                    .find(|f| f.id == pp.flow)
                    .ok_or_else(|| SimError::Invalid(format!("unknown flow {}", pp.flow)))?;
                let pattern = *spec
                    .pattern(pp.pattern)
                    .map_err(|e| SimError::Invalid(format!("flow {}: {e}", pp.flow)))?;
                let flow = SimFlow {
                    spec: spec.clone(),
                    arcs: pp.arcs.clone(),
                    pattern,
                };
                flow.check(net)?;
                Ok(flow)
            })
            .collect()
    }

    pub fn check(&self, net: &Network) -> Result<(), SimError> {
        let bad = |msg: String| SimError::Invalid(format!("flow {}: {msg}", self.spec.id));
        let src = net.node_index(self.spec.src).map_err(|e| bad(e.to_string()))?;
        let dst = net.node_index(self.spec.dst).map_err(|e| bad(e.to_string()))?;
        if !net.check_path(&self.arcs, src, dst) {
            return Err(bad("path is not a simple path from source to destination".into()));
        }
        let p = self.pattern;
        if p.multiple == 0 || !net.cycle().hypercycle.is_multiple_of(p.multiple) {
            return Err(bad(format!("pattern period {} does not divide the hypercycle", p.multiple)));
        }
        if p.b_prime < self.spec.max_packet_bytes {
            return Err(bad("shaped burst smaller than a packet".into()));
        }
        Ok(())
    }
}

/// A best-effort background source with Poisson arrivals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeFlow {
    pub src: NodeId,
    pub dst: NodeId,
    pub rate_bps: u64,
    pub packet_bytes: Bytes,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrafficModel {
    #[serde(default)]
    pub best_effort: Vec<BeFlow>,
}

/// Adds `inflate_q_ns` to the queuing delay written in the header of one
/// packet when it leaves hop `hop`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FaultInjection {
    pub flow: FlowId,
    pub seq: u64,
    pub hop: usize,
    pub inflate_q_ns: Nanos,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub horizon_ns: Nanos,
    pub seed: u64,
    pub drift_ppm: f64,
    /// Best-effort FIFO size per port.
    pub be_queue_bytes: Bytes,
    pub fault: Option<FaultInjection>,
}

impl SimConfig {
    pub fn new(horizon_ns: Nanos, seed: u64) -> Self {
        SimConfig {
            horizon_ns,
            seed,
            drift_ppm: 0.0,
            be_queue_bytes: 64 * 1024,
            fault: None,
        }
    }
}

/// One packet at one node of its path.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HopRecord {
    pub flow: FlowId,
    pub seq: u64,
    pub hop: u32,
    pub node: NodeId,
    pub t_in: Nanos,
    pub e: Nanos,
    pub t_out: Nanos,
    /// `t_out - e`.
    pub q: Nanos,
    /// Damper hold `e - t_in - P`; at the ingress, the shaping hold.
    pub d: Nanos,
    /// Local cycle of the transmission.
    pub cycle: i64,
    pub size: Bytes,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FaultKind {
    /// A high-priority packet did not fit in its cycle and was dropped.
    Overrun,
    /// Node buffer exhausted; the packet was dropped.
    BufferOverflow,
    /// A gated queue was still holding an older cycle.
    QueueWrap,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FaultRecord {
    pub kind: FaultKind,
    pub flow: FlowId,
    pub seq: u64,
    pub node: NodeId,
    pub time: Nanos,
}

/// Delay statistics of one flow, measured from the ingress eligibility time
/// to the egress departure.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowStats {
    pub flow: FlowId,
    pub packets: u64,
    pub min_e2e_ns: Nanos,
    pub max_e2e_ns: Nanos,
    pub mean_e2e_ns: f64,
    pub jitter_ns: Nanos,
    /// Jitter bound: `Q` of the egress node.
    pub bound_ns: Nanos,
    pub delay_bound_ns: Nanos,
    /// Largest delay from packet creation to egress departure.
    pub max_creation_to_delivery_ns: Nanos,
    pub ok: bool,
}

#[derive(Clone, Debug, Default)]
pub struct SimResult {
    pub trace: Vec<HopRecord>,
    pub stats: Vec<FlowStats>,
    pub faults: Vec<FaultRecord>,
    pub hp_generated: u64,
    pub hp_delivered: u64,
    pub be_generated: u64,
    pub be_delivered: u64,
    pub be_dropped: u64,
    pub events: u64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid admission: {0}")]
    Invalid(String),
    #[error("port {tail}->{head} needs {need_ns} ns per cycle but the cycle is {cycle_ns} ns")]
    Overload {
        tail: NodeId,
        head: NodeId,
        need_ns: Nanos,
        cycle_ns: Nanos,
    },
    #[error("flow {flow} packet {seq} at hop {hop}: {fault}")]
    QueuingBound {
        flow: FlowId,
        seq: u64,
        hop: usize,
        fault: damper::QueuingBoundFault,
    },
    #[error("flow {flow}: {fault}")]
    Shaper {
        flow: FlowId,
        fault: shaper::ShaperOverflow,
    },
}

#[cfg(test)]
mod tests;
