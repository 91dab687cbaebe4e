use std::collections::BTreeMap;

use super::{FlowStats, HopRecord, SimFlow};
use crate::model::{Bytes, FlowId, Nanos, Network};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    /// `q + p + d` of a complete damper pair differs from `Q + P`.
    PairDelay { flow: FlowId, seq: u64, hop: u32, measured: Nanos, expected: Nanos },
    /// Two packets sent in one cycle see different eligibility gaps later.
    GapChanged { flow: FlowId, seqs: (u64, u64), hop: u32, at_hop: u32, gap: Nanos, later: Nanos },
    /// Two packets sent in one cycle are more than a cycle apart.
    GapAboveCycle { flow: FlowId, seqs: (u64, u64), hop: u32, gap: Nanos },
    QueuingAbove2T { flow: FlowId, seq: u64, hop: u32, q: Nanos },
    Jitter { flow: FlowId, jitter: Nanos, bound: Nanos },
    /// Bytes of one flow in one cycle of one port exceed its reservation.
    Spill { flow: FlowId, hop: u32, cycle: i64, bytes: Bytes, beta: Bytes },
    /// Timestamps go backwards along the path.
    Order { flow: FlowId, seq: u64, hop: u32 },
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct InvariantReport {
    pub packets: u64,
    pub pairs_checked: u64,
    pub gap_pairs_checked: u64,
    /// Same-cycle pairs on paths of four hops or more.
    pub gap_pairs_long_paths: u64,
    pub violations: Vec<Violation>,
}

impl InvariantReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

type ByPacket<'t> = BTreeMap<(FlowId, u64), Vec<&'t HopRecord>>;

fn by_packet(trace: &[HopRecord]) -> ByPacket<'_> {
    let mut map: ByPacket = BTreeMap::new();
    for r in trace {
        map.entry((r.flow, r.seq)).or_default().push(r);
    }
    for hops in map.values_mut() {
        hops.sort_by_key(|r| r.hop);
    }
    map
}

fn path_nodes(net: &Network, f: &SimFlow) -> Vec<usize> {
    net.path_nodes(&f.arcs)
}

/// Checks the per-pair constant delay, the eligibility-gap invariant, the
/// 2T queuing bound, per-cycle spill and the jitter bound on a trace.
pub fn check_invariants(net: &Network, flows: &[SimFlow], trace: &[HopRecord]) -> InvariantReport {
    let t = net.cycle().cycle_ns;
    let mut report = InvariantReport::default();
    let packets = by_packet(trace);
    let specs: BTreeMap<FlowId, (&SimFlow, Vec<usize>)> =
        flows.iter().map(|f| (f.spec.id, (f, path_nodes(net, f)))).collect();

    for (&(flow, seq), hops) in &packets {
        let Some((_, nodes)) = specs.get(&flow) else {
            continue;
        };
        report.packets += 1;
        for r in hops {
            if r.q > 2 * t {
                report.violations.push(Violation::QueuingAbove2T { flow, seq, hop: r.hop, q: r.q });
            }
            if r.t_in > r.e || r.e > r.t_out {
                report.violations.push(Violation::Order { flow, seq, hop: r.hop });
            }
        }
        for w in hops.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b.hop != a.hop + 1 {
                continue;
            }
            if a.t_out > b.t_in {
                report.violations.push(Violation::Order { flow, seq, hop: b.hop });
            }
            let here = net.node(nodes[a.hop as usize]);
            let next = net.node(nodes[b.hop as usize]);
            let measured = a.q + next.processing_ns + b.d;
            let expected = here.queuing_ns + next.processing_ns;
            report.pairs_checked += 1;
            if measured != expected {
                report.violations.push(Violation::PairDelay {
                    flow,
                    seq,
                    hop: a.hop,
                    measured,
                    expected,
                });
            }
        }
    }

    // Same-cycle groups per flow and hop.
    let mut groups: BTreeMap<(FlowId, u32, i64), Vec<&HopRecord>> = BTreeMap::new();
    for r in trace {
        groups.entry((r.flow, r.hop, r.cycle)).or_default().push(r);
    }
    for (&(flow, hop, cycle), members) in &mut groups {
        let Some((f, nodes)) = specs.get(&flow) else {
            continue;
        };
        let bytes: Bytes = members.iter().map(|r| r.size).sum();
        let beta = f.pattern.max_reservation();
        if bytes > beta {
            report.violations.push(Violation::Spill { flow, hop, cycle, bytes, beta });
        }
        members.sort_by_key(|r| r.seq);
        let long = nodes.len() >= 5;
        for w in members.windows(2) {
            let (a, b) = (w[0], w[1]);
            let gap = b.e - a.e;
            report.gap_pairs_checked += 1;
            report.gap_pairs_long_paths += u64::from(long);
            if gap.abs() > t {
                report.violations.push(Violation::GapAboveCycle { flow, seqs: (a.seq, b.seq), hop, gap });
            }
            let (Some(pa), Some(pb)) = (packets.get(&(flow, a.seq)), packets.get(&(flow, b.seq))) else {
                continue;
            };
            for ra in pa.iter().filter(|r| r.hop > hop) {
                if let Some(rb) = pb.iter().find(|r| r.hop == ra.hop) {
                    let later = rb.e - ra.e;
                    if later != gap {
                        report.violations.push(Violation::GapChanged {
                            flow,
                            seqs: (a.seq, b.seq),
                            hop,
                            at_hop: ra.hop,
                            gap,
                            later,
                        });
                    }
                }
            }
        }
    }

    for s in flow_stats(net, flows, trace) {
        if s.jitter_ns > s.bound_ns {
            report.violations.push(Violation::Jitter {
                flow: s.flow,
                jitter: s.jitter_ns,
                bound: s.bound_ns,
            });
        }
    }
    report
}

/// Per-flow delay statistics over packets that reached the egress.
pub fn flow_stats(net: &Network, flows: &[SimFlow], trace: &[HopRecord]) -> Vec<FlowStats> {
    let packets = by_packet(trace);
    flows
        .iter()
        .map(|f| {
            let nodes = path_nodes(net, f);
            let last = (nodes.len() - 1) as u32;
            let egress_q = net.node(*nodes.last().unwrap()).queuing_ns;
            let pairs: Nanos = nodes
                .windows(2)
                .map(|w| net.node(w[0]).queuing_ns + net.node(w[1]).processing_ns)
                .sum();
            let props: Nanos = f.arcs.iter().map(|&a| net.arc(a).prop_ns).sum();
            let delay_bound = pairs + props + egress_q;

            let mut n = 0u64;
            let (mut lo, mut hi, mut sum) = (Nanos::MAX, Nanos::MIN, 0i128);
            let mut worst_total = 0;
            for ((_, _), hops) in packets.range((f.spec.id, 0)..=(f.spec.id, u64::MAX)) {
                let (Some(first), Some(end)) = (hops.first(), hops.last()) else {
                    continue;
                };
                if first.hop != 0 || end.hop != last {
                    continue;
                }
                let e2e = end.t_out - first.e;
                n += 1;
                lo = lo.min(e2e);
                hi = hi.max(e2e);
                sum += e2e as i128;
                worst_total = worst_total.max(end.t_out - first.t_in);
            }
            if n == 0 {
                (lo, hi) = (0, 0);
            }
            let jitter = hi - lo;
            FlowStats {
                flow: f.spec.id,
                packets: n,
                min_e2e_ns: lo,
                max_e2e_ns: hi,
                mean_e2e_ns: if n > 0 { sum as f64 / n as f64 } else { 0.0 },
                jitter_ns: jitter,
                bound_ns: egress_q,
                delay_bound_ns: delay_bound,
                max_creation_to_delivery_ns: worst_total,
                ok: jitter <= egress_q && hi <= delay_bound,
            }
        })
        .collect()
}
