use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use log::{debug, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use super::check::flow_stats;
use super::clock::NodeClock;
use super::damper::{compute_eligibility, record_departure, DamperHeader};
use super::port::{tx_ns, PortAction, PortScheduler};
use super::shaper::{packetize, Shaper};
use super::{FaultKind, FaultRecord, HopRecord, SimConfig, SimError, SimFlow, SimResult, TrafficModel};
use crate::model::{Bytes, Nanos, Network, NS_PER_S};
use crate::ospf::{ospf_weights, shortest_path, OspfConfig};

#[derive(Clone, Copy, Debug)]
enum Event {
    Burst { flow: usize },
    Eligible { packet: usize },
    Wake { port: usize, cycle: i64 },
    TxDone { port: usize },
    Arrive { packet: usize },
    BeGen { source: usize },
    BeArrive { packet: usize },
    BeReady { packet: usize },
}

struct Queued {
    time: Nanos,
    id: u64,
    event: Event,
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        (self.time, self.id) == (other.time, other.id)
    }
}

impl Eq for Queued {}

impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.time, self.id).cmp(&(other.time, other.id))
    }
}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct HpPacket {
    flow: usize,
    seq: u64,
    size: Bytes,
    hop: usize,
    t_in: Nanos,
    e: Nanos,
    header: DamperHeader,
}

struct BePacket {
    route: usize,
    hop: usize,
    size: Bytes,
}

#[derive(Clone, Copy)]
enum InFlight {
    Hp { packet: usize, cycle: i64 },
    Be { packet: usize },
}

struct Route {
    /// Nodes of the path, source first.
    nodes: Vec<usize>,
    /// Output port per hop; the last is the egress client port.
    ports: Vec<usize>,
    /// Propagation delay per arc hop.
    props: Vec<Nanos>,
}

struct BeSource {
    route: usize,
    packet_bytes: Bytes,
    exp: Exp<f64>,
    rng: ChaCha8Rng,
}

struct Engine<'a> {
    net: &'a Network,
    flows: &'a [SimFlow],
    cfg: &'a SimConfig,
    clocks: Vec<NodeClock>,
    ports: Vec<PortScheduler>,
    port_node: Vec<usize>,
    in_flight: Vec<Option<InFlight>>,
    buffer: Vec<Bytes>,
    routes: Vec<Route>,
    be_routes: Vec<Route>,
    shapers: Vec<Shaper>,
    burst_origin: Vec<Nanos>,
    burst_count: Vec<u64>,
    next_seq: Vec<u64>,
    be_sources: Vec<BeSource>,
    hp: Vec<HpPacket>,
    be: Vec<BePacket>,
    heap: BinaryHeap<Reverse<Queued>>,
    next_id: u64,
    out: SimResult,
}

/// Runs the data plane over `horizon_ns` of traffic and drains every
/// packet in flight. The run is a pure function of its inputs and seed.
pub fn run_simulation(
    net: &Network,
    flows: &[SimFlow],
    traffic: &TrafficModel,
    cfg: &SimConfig,
) -> Result<SimResult, SimError> {
    for f in flows {
        f.check(net)?;
    }
    let mut engine = Engine::new(net, flows, traffic, cfg)?;
    engine.check_load()?;
    engine.start();
    engine.run()?;
    let mut out = engine.out;
    out.stats = flow_stats(net, flows, &out.trace);
    for s in out.stats.iter_mut() {
        if out.faults.iter().any(|f| f.flow == s.flow) {
            s.ok = false;
        }
    }
    Ok(out)
}

impl<'a> Engine<'a> {
    fn new(net: &'a Network, flows: &'a [SimFlow], traffic: &TrafficModel, cfg: &'a SimConfig) -> Result<Self, SimError> {
        let cycle = *net.cycle();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let clocks: Vec<NodeClock> = (0..net.node_count())
            .map(|_| NodeClock::ideal(rng.random_range(0..cycle.cycle_ns), cycle.cycle_ns).with_drift_ppm(cfg.drift_ppm))
            .collect();
        let mut ports = Vec::new();
        let mut port_node = Vec::new();
        for a in 0..net.arc_count() {
            let v = net.tail(a);
            ports.push(PortScheduler::new(clocks[v], net.arc(a).rate_bps(&cycle), cycle.queues, cfg.be_queue_bytes));
            port_node.push(v);
        }
        for v in 0..net.node_count() {
            let rate = net
                .in_arcs(v)
                .iter()
                .map(|&a| net.arc(a).rate_bps(&cycle))
                .max()
                .unwrap_or(1);
            ports.push(PortScheduler::new(clocks[v], rate.max(1), cycle.queues, cfg.be_queue_bytes));
            port_node.push(v);
        }
        let client = |v: usize| net.arc_count() + v;
        let route_of = |arcs: &[usize]| {
            let nodes = net.path_nodes(arcs);
            let mut ports: Vec<usize> = arcs.to_vec();
            ports.push(client(*nodes.last().unwrap()));
            Route {
                props: arcs.iter().map(|&a| net.arc(a).prop_ns).collect(),
                nodes,
                ports,
            }
        };
        let routes: Vec<Route> = flows.iter().map(|f| route_of(&f.arcs)).collect();
        let shapers = flows
            .iter()
            .enumerate()
            .map(|(i, f)| Shaper::new(f.pattern, i as i64))
            .collect();
        let burst_origin = flows
            .iter()
            .map(|f| rng.random_range(0..burst_period(f).max(1)))
            .collect();

        let weights = ospf_weights(net, &OspfConfig::default());
        let mut be_routes = Vec::new();
        let mut be_sources = Vec::new();
        for (i, b) in traffic.best_effort.iter().enumerate() {
            let bad = |m: &str| SimError::Invalid(format!("best-effort flow {i}: {m}"));
            let src = net.node_index(b.src).map_err(|e| bad(&e.to_string()))?;
            let dst = net.node_index(b.dst).map_err(|e| bad(&e.to_string()))?;
            if b.rate_bps == 0 || b.packet_bytes == 0 {
                return Err(bad("zero rate or packet size"));
            }
            let arcs = shortest_path(net, &weights, src, dst).ok_or_else(|| bad("no route"))?;
            let mean_gap = b.packet_bytes as f64 * 8.0 * NS_PER_S as f64 / b.rate_bps as f64;
            let mut brng = ChaCha8Rng::seed_from_u64(cfg.seed);
            brng.set_stream(i as u64 + 1);
            be_sources.push(BeSource {
                route: be_routes.len(),
                packet_bytes: b.packet_bytes,
                exp: Exp::new(1.0 / mean_gap).map_err(|e| bad(&e.to_string()))?,
                rng: brng,
            });
            be_routes.push(route_of(&arcs));
        }

        Ok(Engine {
            net,
            flows,
            cfg,
            in_flight: vec![None; ports.len()],
            ports,
            port_node,
            clocks,
            buffer: vec![0; net.node_count()],
            routes,
            be_routes,
            shapers,
            burst_origin,
            burst_count: vec![0; flows.len()],
            next_seq: vec![0; flows.len()],
            be_sources,
            hp: Vec::new(),
            be: Vec::new(),
            heap: BinaryHeap::new(),
            next_id: 0,
            out: SimResult::default(),
        })
    }

    /// Reserved bytes per cycle must serialize within one cycle at every
    /// port the flows cross.
    fn check_load(&self) -> Result<(), SimError> {
        let cycle_ns = self.net.cycle().cycle_ns;
        let mut need = vec![0 as Nanos; self.ports.len()];
        for (f, route) in self.flows.iter().zip(&self.routes) {
            let spec = &f.spec;
            let tail = spec.burst_bytes % spec.max_packet_bytes;
            let smallest = if tail > 0 { tail.min(spec.max_packet_bytes) } else { spec.max_packet_bytes };
            let packets = f.pattern.b_prime.div_ceil(smallest) as Nanos;
            for &p in &route.ports {
                need[p] += tx_ns(f.pattern.b_prime, self.ports[p].rate_bps) + packets;
            }
        }
        for (p, &n) in need.iter().enumerate() {
            if n > cycle_ns {
                let (tail, head) = if p < self.net.arc_count() {
                    (self.net.arc(p).tail, self.net.arc(p).head)
                } else {
                    let id = self.net.node(self.port_node[p]).id;
                    (id, id)
                };
                return Err(SimError::Overload {
                    tail,
                    head,
                    need_ns: n,
                    cycle_ns,
                });
            }
        }
        Ok(())
    }

    fn push(&mut self, time: Nanos, event: Event) {
        self.heap.push(Reverse(Queued {
            time,
            id: self.next_id,
            event,
        }));
        self.next_id += 1;
    }

    fn start(&mut self) {
        let cycle = self.net.cycle();
        let hc_ns = cycle.cycle_ns * cycle.hypercycle as Nanos;
        if self.cfg.horizon_ns < 4 * hc_ns {
            let msg = format!(
                "horizon {} ns is shorter than four hypercycles ({} ns); statistics are not representative",
                self.cfg.horizon_ns,
                4 * hc_ns
            );
            warn!("{msg}");
            self.out.warnings.push(msg);
        }
        for f in 0..self.flows.len() {
            let t = self.burst_origin[f];
            if t < self.cfg.horizon_ns {
                self.push(t, Event::Burst { flow: f });
            }
        }
        for s in 0..self.be_sources.len() {
            let t = self.be_gap(s);
            if t < self.cfg.horizon_ns {
                self.push(t, Event::BeGen { source: s });
            }
        }
    }

    fn be_gap(&mut self, s: usize) -> Nanos {
        let src = &mut self.be_sources[s];
        (src.exp.sample(&mut src.rng).ceil() as Nanos).max(1)
    }

    fn run(&mut self) -> Result<(), SimError> {
        while let Some(Reverse(Queued { time, event, .. })) = self.heap.pop() {
            self.out.events += 1;
            match event {
                Event::Burst { flow } => self.on_burst(time, flow)?,
                Event::Eligible { packet } => self.on_eligible(time, packet),
                Event::Wake { port, cycle } => {
                    self.ports[port].wake_fired(cycle);
                    self.serve(time, port);
                }
                Event::TxDone { port } => self.on_tx_done(time, port),
                Event::Arrive { packet } => self.on_arrive(time, packet)?,
                Event::BeGen { source } => self.on_be_gen(time, source),
                Event::BeArrive { packet } => self.on_be_arrive(time, packet),
                Event::BeReady { packet } => {
                    let b = &self.be[packet];
                    let port = self.be_routes[b.route].ports[b.hop];
                    let size = b.size;
                    if self.ports[port].enqueue_best_effort(packet, size) {
                        self.serve(time, port);
                    } else {
                        self.out.be_dropped += 1;
                    }
                }
            }
        }
        debug!("simulation finished after {} events", self.out.events);
        Ok(())
    }

    fn on_burst(&mut self, t: Nanos, f: usize) -> Result<(), SimError> {
        let flow = &self.flows[f];
        let src = self.routes[f].nodes[0];
        let sizes = packetize(flow.spec.burst_bytes, flow.spec.max_packet_bytes);
        let shaped = self.shapers[f]
            .igw_inject(&self.clocks[src], t, &sizes)
            .map_err(|fault| SimError::Shaper {
                flow: flow.spec.id,
                fault,
            })?;
        for s in shaped {
            let seq = self.next_seq[f];
            self.next_seq[f] += 1;
            self.hp.push(HpPacket {
                flow: f,
                seq,
                size: s.size,
                hop: 0,
                t_in: t,
                e: s.e0,
                header: DamperHeader { q_prev: 0, q_bound: 0 },
            });
            self.out.hp_generated += 1;
            self.push(s.e0, Event::Eligible { packet: self.hp.len() - 1 });
        }
        self.burst_count[f] += 1;
        let next = self.burst_origin[f] + burst_offset(flow, self.burst_count[f]);
        if next < self.cfg.horizon_ns {
            self.push(next, Event::Burst { flow: f });
        }
        Ok(())
    }

    fn on_eligible(&mut self, t: Nanos, packet: usize) {
        let p = &self.hp[packet];
        let route = &self.routes[p.flow];
        let (port, node, size) = (route.ports[p.hop], route.nodes[p.hop], p.size);
        if self.buffer[node] + size > self.net.node(node).buffer_bytes {
            self.fault(FaultKind::BufferOverflow, packet, t);
            return;
        }
        match self.ports[port].enqueue_after_eligibility(packet, size, t) {
            Ok((_, cycle, _)) => {
                self.buffer[node] += size;
                if let Some(at) = self.ports[port].request_wake(cycle) {
                    self.push(at, Event::Wake { port, cycle });
                }
            }
            Err(_) => self.fault(FaultKind::QueueWrap, packet, t),
        }
    }

    fn serve(&mut self, now: Nanos, port: usize) {
        if self.ports[port].busy {
            return;
        }
        loop {
            match self.ports[port].next_action(now) {
                PortAction::Hp { packet, size, cycle } => {
                    self.buffer[self.port_node[port]] -= size;
                    self.start_tx(now, port, size, InFlight::Hp { packet, cycle });
                    return;
                }
                PortAction::Be { packet, size } => {
                    self.start_tx(now, port, size, InFlight::Be { packet });
                    return;
                }
                PortAction::Overrun { packet, size, .. } => {
                    self.buffer[self.port_node[port]] -= size;
                    self.fault(FaultKind::Overrun, packet, now);
                }
                PortAction::Idle { wake } => {
                    if let Some((cycle, at)) = wake {
                        self.push(at, Event::Wake { port, cycle });
                    }
                    return;
                }
            }
        }
    }

    fn start_tx(&mut self, now: Nanos, port: usize, size: Bytes, what: InFlight) {
        let done = now + self.ports[port].tx_ns(size);
        self.ports[port].busy = true;
        self.in_flight[port] = Some(what);
        self.push(done, Event::TxDone { port });
    }

    fn on_tx_done(&mut self, now: Nanos, port: usize) {
        self.ports[port].busy = false;
        match self.in_flight[port].take() {
            Some(InFlight::Hp { packet, cycle }) => self.hp_departed(now, packet, cycle),
            Some(InFlight::Be { packet }) => {
                let b = &mut self.be[packet];
                let prop = self.be_routes[b.route].props[b.hop];
                b.hop += 1;
                self.push(now + prop, Event::BeArrive { packet });
            }
            None => {}
        }
        self.serve(now, port);
    }

    fn hp_departed(&mut self, t_out: Nanos, packet: usize, cycle: i64) {
        let p = &self.hp[packet];
        let flow = &self.flows[p.flow];
        let route = &self.routes[p.flow];
        let node = route.nodes[p.hop];
        let spec = self.net.node(node);
        let d = if p.hop == 0 { p.e - p.t_in } else { p.e - p.t_in - spec.processing_ns };
        self.out.trace.push(HopRecord {
            flow: flow.spec.id,
            seq: p.seq,
            hop: p.hop as u32,
            node: spec.id,
            t_in: p.t_in,
            e: p.e,
            t_out,
            q: t_out - p.e,
            d,
            cycle,
            size: p.size,
        });
        let mut header = record_departure(p.e, t_out, spec.queuing_ns);
        if let Some(f) = self.cfg.fault {
            if f.flow == flow.spec.id && f.seq == p.seq && f.hop == p.hop {
                header.q_prev += f.inflate_q_ns;
            }
        }
        let last = p.hop + 1 == route.nodes.len();
        if last {
            self.out.hp_delivered += 1;
            return;
        }
        let prop = route.props[p.hop];
        let p = &mut self.hp[packet];
        p.header = header;
        p.hop += 1;
        self.push(t_out + prop, Event::Arrive { packet });
    }

    fn on_arrive(&mut self, t_in: Nanos, packet: usize) -> Result<(), SimError> {
        let p = &mut self.hp[packet];
        let node = self.routes[p.flow].nodes[p.hop];
        let processing = self.net.node(node).processing_ns;
        let e = compute_eligibility(t_in, processing, p.header).map_err(|fault| SimError::QueuingBound {
            flow: self.flows[p.flow].spec.id,
            seq: p.seq,
            hop: p.hop - 1,
            fault,
        })?;
        p.t_in = t_in;
        p.e = e;
        self.push(e, Event::Eligible { packet });
        Ok(())
    }

    fn on_be_gen(&mut self, t: Nanos, s: usize) {
        let route = self.be_sources[s].route;
        self.be.push(BePacket {
            route,
            hop: 0,
            size: self.be_sources[s].packet_bytes,
        });
        self.out.be_generated += 1;
        let packet = self.be.len() - 1;
        self.push(t, Event::BeReady { packet });
        let next = t + self.be_gap(s);
        if next < self.cfg.horizon_ns {
            self.push(next, Event::BeGen { source: s });
        }
    }

    fn on_be_arrive(&mut self, t: Nanos, packet: usize) {
        let b = &self.be[packet];
        let route = &self.be_routes[b.route];
        if b.hop + 1 == route.nodes.len() {
            self.out.be_delivered += 1;
            return;
        }
        let p = self.net.node(route.nodes[b.hop]).processing_ns;
        self.push(t + p, Event::BeReady { packet });
    }

    fn fault(&mut self, kind: FaultKind, packet: usize, time: Nanos) {
        let p = &self.hp[packet];
        let node = self.net.node(self.routes[p.flow].nodes[p.hop]).id;
        warn!("{kind:?} for flow {} packet {} at node {node}", self.flows[p.flow].spec.id, p.seq);
        self.out.faults.push(FaultRecord {
            kind,
            flow: self.flows[p.flow].spec.id,
            seq: p.seq,
            node,
            time,
        });
    }
}

/// Nominal spacing of greedy bursts: `b_f / r_f`.
fn burst_period(f: &SimFlow) -> Nanos {
    burst_offset(f, 1)
}

/// Arrival of the `k`-th burst after the first: exactly `k b_f / r_f`,
/// rounded down to the nanosecond.
fn burst_offset(f: &SimFlow, k: u64) -> Nanos {
    (k as i128 * f.spec.burst_bytes as i128 * 8 * NS_PER_S / f.spec.rate_bps.max(1) as i128) as Nanos
}
