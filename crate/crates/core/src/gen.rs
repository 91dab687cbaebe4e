//! Seeded random instances: a connected topology whose capacities scale
//! with a level `i`, and random origin/destination demands.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    us_to_ns, ArcSpec, Bytes, CycleConfig, FlowId, FlowParams, FlowSpec, ModelError, Network, NetworkInstance, NodeId,
    NodeSpec,
};

/// Link bandwidth per capacity level.
pub const LEVEL_LINK_BPS: u64 = 100_000_000_000;
/// Node buffer per capacity level: 10 megabits.
pub const LEVEL_BUFFER_BYTES: Bytes = 1_250_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenSpec {
    pub nodes: u32,
    /// Undirected links; each becomes two arcs.
    pub links: u32,
    pub max_prop_us: f64,
    pub level: u32,
    pub flows: u32,
    pub deadline_us: f64,
    pub burst_bytes: Bytes,
    pub packet_bytes: Bytes,
    pub throughput_min_mbps: u64,
    pub throughput_max_mbps: u64,
    pub cycle_us: f64,
    pub hypercycle: u32,
    pub queues: u32,
    pub queuing_us: f64,
    pub processing_us: f64,
    pub seed: u64,
}

impl Default for GenSpec {
    fn default() -> Self {
        GenSpec {
            nodes: 50,
            links: 106,
            max_prop_us: 40.0,
            level: 10,
            flows: 100,
            deadline_us: 1000.0,
            burst_bytes: 1500,
            packet_bytes: 1500,
            throughput_min_mbps: 1_000,
            throughput_max_mbps: 10_000,
            cycle_us: 10.0,
            hypercycle: 8,
            queues: 3,
            queuing_us: 20.0,
            processing_us: 1.0,
            seed: 1,
        }
    }
}

impl GenSpec {
    /// 505 nodes and 1061 links.
    pub fn full_scale() -> Self {
        GenSpec {
            nodes: 505,
            links: 1061,
            ..GenSpec::default()
        }
    }

    pub fn check(&self) -> Result<(), GenError> {
        let n = self.nodes as u64;
        if n < 2 {
            return Err(GenError::Spec("at least two nodes are needed".into()));
        }
        if (self.links as u64) < n - 1 {
            return Err(GenError::Spec(format!(
                "{} links cannot connect {} nodes",
                self.links, self.nodes
            )));
        }
        if self.links as u64 > n * (n - 1) / 2 {
            return Err(GenError::Spec(format!(
                "{} links exceed the {} node pairs",
                self.links,
                n * (n - 1) / 2
            )));
        }
        if !(1..=10).contains(&self.level) {
            return Err(GenError::Spec(format!("level {} outside 1..=10", self.level)));
        }
        if self.max_prop_us.is_nan() || self.max_prop_us <= 0.0 {
            return Err(GenError::Spec("max propagation delay must be positive".into()));
        }
        if self.burst_bytes == 0 || self.packet_bytes == 0 {
            return Err(GenError::Spec("burst and packet size must be positive".into()));
        }
        if self.throughput_min_mbps == 0 || self.throughput_min_mbps > self.throughput_max_mbps {
            return Err(GenError::Spec("throughput range must be positive and ordered".into()));
        }
        if self.hypercycle == 0 || self.queues < 3 {
            return Err(GenError::Spec("need a hypercycle of one cycle or more and three queues".into()));
        }
        Ok(())
    }

    fn cycle(&self) -> Result<CycleConfig, GenError> {
        let t = us_to_ns(self.cycle_us)?;
        if t <= 0 {
            return Err(GenError::Spec("cycle must be positive".into()));
        }
        Ok(CycleConfig::new(t, self.hypercycle, self.queues))
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid generator spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Random spanning tree plus uniformly drawn extra links, both directions
/// per link, node ids `1..=n`.
pub fn generate_topology(spec: &GenSpec) -> Result<NetworkInstance, GenError> {
    spec.check()?;
    let cycle = spec.cycle()?;
    let mut rng = spec.rng(0);
    let n = spec.nodes;
    let max_prop = us_to_ns(spec.max_prop_us)?.max(1);
    let queuing = us_to_ns(spec.queuing_us)?;
    let processing = us_to_ns(spec.processing_us)?;
    let level = spec.level as u64;
    let capacity = (level as u128 * LEVEL_LINK_BPS as u128 * cycle.cycle_ns as u128 / 8 / 1_000_000_000) as Bytes;

    let nodes = (1..=n)
        .map(|id| NodeSpec {
            id: NodeId(id),
            queuing_ns: queuing,
            processing_ns: processing,
            buffer_bytes: level * LEVEL_BUFFER_BYTES,
        })
        .collect();

    let mut order: Vec<u32> = (1..=n).collect();
    order.shuffle(&mut rng);
    let mut links: BTreeSet<(u32, u32)> = BTreeSet::new();
    let mut list = Vec::with_capacity(spec.links as usize);
    let key = |a: u32, b: u32| (a.min(b), a.max(b));
    for i in 1..order.len() {
        let parent = order[rng.random_range(0..i)];
        links.insert(key(parent, order[i]));
        list.push((parent, order[i]));
    }
    while list.len() < spec.links as usize {
        let a = rng.random_range(1..=n);
        let b = rng.random_range(1..=n);
        if a != b && links.insert(key(a, b)) {
            list.push((a, b));
        }
    }

    let mut arcs = Vec::with_capacity(2 * list.len());
    for (a, b) in list {
        let prop = rng.random_range(1..=max_prop);
        for (t, h) in [(a, b), (b, a)] {
            arcs.push(ArcSpec {
                tail: NodeId(t),
                head: NodeId(h),
                prop_ns: prop,
                capacity_bytes: capacity,
            });
        }
    }
    let instance = NetworkInstance { cycle, nodes, arcs };
    Network::new(instance.clone())?;
    Ok(instance)
}

/// Random distinct origin/destination pairs with a shared deadline, burst
/// and packet size. Rate equals throughput, drawn in whole Mb/s.
pub fn generate_flows(spec: &GenSpec, net: &Network) -> Result<Vec<FlowSpec>, GenError> {
    spec.check()?;
    let deadline = us_to_ns(spec.deadline_us)?;
    let mut rng = spec.rng(1);
    let ids: Vec<NodeId> = net.instance().nodes.iter().map(|v| v.id).collect();
    let flows = (1..=spec.flows)
        .map(|i| {
            let s = rng.random_range(0..ids.len());
            let mut d = rng.random_range(0..ids.len() - 1);
            if d >= s {
                d += 1;
            }
            let mbps = rng.random_range(spec.throughput_min_mbps..=spec.throughput_max_mbps);
            let rate = mbps * 1_000_000;
            FlowParams {
                id: FlowId(i),
                src: ids[s],
                dst: ids[d],
                rate_bps: rate,
                burst_bytes: spec.burst_bytes,
                throughput_bps: rate,
                deadline_ns: deadline,
                max_packet_bytes: spec.packet_bytes.min(spec.burst_bytes),
            }
            .with_catalog(net)
        })
        .collect();
    Ok(flows)
}
