//! File formats: instance, flow, solution and traffic documents (JSON) and
//! iteration, trace and statistics tables (CSV).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::admission::{AdmissionSolution, FlowDecision, IterationRecord};
use crate::model::{
    ns_to_us, path_feasibility, us_to_ns, ArcSpec, Bytes, CycleConfig, FlowId, FlowParams, FlowSpec, ModelError,
    Network, NetworkInstance, NodeId, NodeSpec, TransmissionPattern,
};
use crate::sim::{BeFlow, FlowStats, HopRecord, TrafficModel};

pub const INSTANCE_FORMAT: &str = "dldn-instance/1";
pub const FLOWS_FORMAT: &str = "dldn-flows/1";
pub const SOLUTION_FORMAT: &str = "dldn-solution/1";
pub const TRAFFIC_FORMAT: &str = "dldn-traffic/1";

/// Packet size assumed when a flow record does not give one.
pub const DEFAULT_PACKET_BYTES: Bytes = 1500;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{0}")]
    Format(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct CycleRecord {
    pub T_us: f64,
    pub HC: u32,
    pub N: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct NodeRecord {
    pub id: NodeId,
    pub Q_us: f64,
    pub P_us: f64,
    pub buffer_bytes: Bytes,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArcRecord {
    pub tail: NodeId,
    pub head: NodeId,
    pub prop_us: f64,
    pub capacity_bytes_per_cycle: Bytes,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternRecord {
    pub m: u32,
    pub b_prime_bytes: Bytes,
}

impl From<TransmissionPattern> for PatternRecord {
    fn from(p: TransmissionPattern) -> Self {
        PatternRecord {
            m: p.multiple,
            b_prime_bytes: p.b_prime,
        }
    }
}

impl From<PatternRecord> for TransmissionPattern {
    fn from(p: PatternRecord) -> Self {
        TransmissionPattern {
            multiple: p.m,
            b_prime: p.b_prime_bytes,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowRecord {
    pub id: FlowId,
    pub src: NodeId,
    pub dst: NodeId,
    pub rate_bps: u64,
    pub burst_bytes: Bytes,
    pub throughput_bps: u64,
    pub deadline_us: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub packet_bytes: Option<Bytes>,
    /// Pattern catalog; rebuilt from the topology when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patterns: Option<Vec<PatternRecord>>,
}

impl From<&FlowSpec> for FlowRecord {
    fn from(f: &FlowSpec) -> Self {
        FlowRecord {
            id: f.id,
            src: f.src,
            dst: f.dst,
            rate_bps: f.rate_bps,
            burst_bytes: f.burst_bytes,
            throughput_bps: f.throughput_bps,
            deadline_us: ns_to_us(f.deadline_ns),
            packet_bytes: Some(f.max_packet_bytes),
            patterns: Some(f.patterns.iter().map(|&p| p.into()).collect()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub format: String,
    pub cycle: CycleRecord,
    pub nodes: Vec<NodeRecord>,
    pub arcs: Vec<ArcRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flows: Vec<FlowRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowsFile {
    pub format: String,
    pub flows: Vec<FlowRecord>,
}

impl InstanceFile {
    pub fn new(instance: &NetworkInstance, flows: &[FlowSpec]) -> Self {
        InstanceFile {
            format: INSTANCE_FORMAT.into(),
            cycle: CycleRecord {
                T_us: ns_to_us(instance.cycle.cycle_ns),
                HC: instance.cycle.hypercycle,
                N: instance.cycle.queues,
            },
            nodes: instance
                .nodes
                .iter()
                .map(|v| NodeRecord {
                    id: v.id,
                    Q_us: ns_to_us(v.queuing_ns),
                    P_us: ns_to_us(v.processing_ns),
                    buffer_bytes: v.buffer_bytes,
                })
                .collect(),
            arcs: instance
                .arcs
                .iter()
                .map(|a| ArcRecord {
                    tail: a.tail,
                    head: a.head,
                    prop_us: ns_to_us(a.prop_ns),
                    capacity_bytes_per_cycle: a.capacity_bytes,
                })
                .collect(),
            flows: flows.iter().map(FlowRecord::from).collect(),
        }
    }

    pub fn network(&self) -> Result<NetworkInstance, IoError> {
        expect_format(&self.format, INSTANCE_FORMAT)?;
        let cycle = CycleConfig::new(us_to_ns(self.cycle.T_us)?, self.cycle.HC, self.cycle.N);
        let nodes = self
            .nodes
            .iter()
            .map(|v| {
                Ok(NodeSpec {
                    id: v.id,
                    queuing_ns: us_to_ns(v.Q_us)?,
                    processing_ns: us_to_ns(v.P_us)?,
                    buffer_bytes: v.buffer_bytes,
                })
            })
            .collect::<Result<_, ModelError>>()?;
        let arcs = self
            .arcs
            .iter()
            .map(|a| {
                Ok(ArcSpec {
                    tail: a.tail,
                    head: a.head,
                    prop_ns: us_to_ns(a.prop_us)?,
                    capacity_bytes: a.capacity_bytes_per_cycle,
                })
            })
            .collect::<Result<_, ModelError>>()?;
        Ok(NetworkInstance { cycle, nodes, arcs })
    }
}

impl FlowsFile {
    pub fn new(flows: &[FlowSpec]) -> Self {
        FlowsFile {
            format: FLOWS_FORMAT.into(),
            flows: flows.iter().map(FlowRecord::from).collect(),
        }
    }
}

fn expect_format(got: &str, want: &str) -> Result<(), IoError> {
    if got != want {
        return Err(IoError::Format(format!("expected format \"{want}\", found \"{got}\"")));
    }
    Ok(())
}

/// Turns flow records into flow specs, building missing pattern catalogs.
pub fn flows_from_records(net: &Network, records: &[FlowRecord]) -> Result<Vec<FlowSpec>, IoError> {
    let mut ids = BTreeMap::new();
    let hc = net.cycle().hypercycle;
    records
        .iter()
        .map(|r| {
            let bad = |m: String| IoError::Format(format!("flow {}: {m}", r.id));
            if ids.insert(r.id, ()).is_some() {
                return Err(bad("duplicate id".into()));
            }
            net.node_index(r.src)?;
            net.node_index(r.dst)?;
            if r.src == r.dst {
                return Err(bad("source equals destination".into()));
            }
            if r.rate_bps == 0 || r.burst_bytes == 0 {
                return Err(bad("zero rate or burst".into()));
            }
            let packet = r.packet_bytes.unwrap_or(DEFAULT_PACKET_BYTES.min(r.burst_bytes));
            if packet == 0 || packet > r.burst_bytes {
                return Err(bad(format!("packet size {packet} outside 1..=burst")));
            }
            let params = FlowParams {
                id: r.id,
                src: r.src,
                dst: r.dst,
                rate_bps: r.rate_bps,
                burst_bytes: r.burst_bytes,
                throughput_bps: r.throughput_bps,
                deadline_ns: us_to_ns(r.deadline_us)?,
                max_packet_bytes: packet,
            };
            match &r.patterns {
                None => Ok(params.with_catalog(net)),
                Some(ps) => {
                    for p in ps {
                        if p.m == 0 || !hc.is_multiple_of(p.m) {
                            return Err(bad(format!("pattern period {} does not divide {hc}", p.m)));
                        }
                        if p.b_prime_bytes < packet {
                            return Err(bad(format!("pattern of {} bytes below packet size", p.b_prime_bytes)));
                        }
                    }
                    Ok(params.into_flow(ps.iter().map(|&p| p.into()).collect()))
                }
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowStatus {
    Accepted,
    Rejected,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionFlow {
    pub id: FlowId,
    pub status: FlowStatus,
    #[serde(default)]
    pub path: Vec<NodeId>,
    #[serde(default)]
    pub pattern: Option<PatternRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct SolutionFile {
    pub format: String,
    pub algorithm: String,
    pub flows: Vec<SolutionFlow>,
    pub Th_bps: u64,
    /// Absent for algorithms without a bound.
    pub UB_bps: Option<f64>,
    pub gap_percent: Option<f64>,
}

impl SolutionFile {
    pub fn new(
        net: &Network,
        flows: &[FlowSpec],
        solution: &AdmissionSolution,
        algorithm: &str,
        ub_bps: Option<f64>,
        gap_percent: Option<f64>,
    ) -> Self {
        let records = flows
            .iter()
            .map(|f| match solution.decision(f.id) {
                Some(pp) => SolutionFlow {
                    id: f.id,
                    status: FlowStatus::Accepted,
                    path: net.path_nodes(&pp.arcs).iter().map(|&v| net.node(v).id).collect(),
                    pattern: Some(f.patterns[pp.pattern].into()),
                },
                None => SolutionFlow {
                    id: f.id,
                    status: FlowStatus::Rejected,
                    path: Vec::new(),
                    pattern: None,
                },
            })
            .collect();
        SolutionFile {
            format: SOLUTION_FORMAT.into(),
            algorithm: algorithm.into(),
            flows: records,
            Th_bps: solution.throughput_bps(flows),
            UB_bps: ub_bps,
            gap_percent,
        }
    }

    /// Rebuilds the decisions against a topology and flow set. Accepted
    /// flows must name an existing path and a pattern of their catalog,
    /// and meet their deadline.
    pub fn solution(&self, net: &Network, flows: &[FlowSpec]) -> Result<AdmissionSolution, IoError> {
        expect_format(&self.format, SOLUTION_FORMAT)?;
        let by_id: BTreeMap<FlowId, &SolutionFlow> = self.flows.iter().map(|r| (r.id, r)).collect();
        if by_id.len() != self.flows.len() {
            return Err(IoError::Format("duplicate flow id in solution".into()));
        }
        if let Some(r) = self.flows.iter().find(|r| !flows.iter().any(|f| f.id == r.id)) {
            return Err(IoError::Format(format!("solution names unknown flow {}", r.id)));
        }
        let decisions = flows
            .iter()
            .map(|f| {
                let accepted = match by_id.get(&f.id) {
                    Some(r) if r.status == FlowStatus::Accepted => {
                        let bad = |m: String| IoError::Format(format!("flow {}: {m}", f.id));
                        let pattern: TransmissionPattern = r.pattern.ok_or_else(|| bad("no pattern".into()))?.into();
                        let k = f
                            .patterns
                            .iter()
                            .position(|&p| p == pattern)
                            .ok_or_else(|| bad("pattern is not in the flow's catalog".into()))?;
                        if r.path.first() != Some(&f.src) || r.path.last() != Some(&f.dst) {
                            return Err(bad("path does not join source and destination".into()));
                        }
                        let arcs = net.arcs_of_node_path(&r.path).map_err(|e| bad(e.to_string()))?;
                        let pp = path_feasibility(net, f, k, &arcs)
                            .map_err(|e| bad(e.to_string()))?
                            .ok_or_else(|| bad("path and pattern miss the deadline".into()))?;
                        Some(pp)
                    }
                    _ => None,
                };
                Ok(FlowDecision { flow: f.id, accepted })
            })
            .collect::<Result<_, IoError>>()?;
        Ok(AdmissionSolution { decisions })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrafficFile {
    pub format: String,
    pub best_effort: Vec<BeFlow>,
}

impl TrafficFile {
    pub fn new(traffic: &TrafficModel) -> Self {
        TrafficFile {
            format: TRAFFIC_FORMAT.into(),
            best_effort: traffic.best_effort.clone(),
        }
    }

    pub fn traffic(&self) -> Result<TrafficModel, IoError> {
        expect_format(&self.format, TRAFFIC_FORMAT)?;
        Ok(TrafficModel {
            best_effort: self.best_effort.clone(),
        })
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let text = fs::read_to_string(path).map_err(|source| IoError::File {
        path: path.into(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| IoError::Json {
        path: path.into(),
        source,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| IoError::Json {
        path: path.into(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|source| IoError::File {
        path: path.into(),
        source,
    })
}

/// Writes `header`, then one row per item. The header is written even
/// when there are no rows.
pub fn write_csv<R: Serialize>(path: &Path, header: &[&str], rows: impl IntoIterator<Item = R>) -> Result<(), IoError> {
    let wrap = |source| IoError::Csv {
        path: path.into(),
        source,
    };
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(wrap)?;
    w.write_record(header).map_err(wrap)?;
    for r in rows {
        w.serialize(r).map_err(wrap)?;
    }
    w.flush().map_err(|source| IoError::File {
        path: path.into(),
        source,
    })
}

#[derive(Serialize)]
struct TraceRow {
    flow: FlowId,
    seq: u64,
    hop: u32,
    node: NodeId,
    t_in_ns: i64,
    e_ns: i64,
    t_out_ns: i64,
    q_ns: i64,
    d_ns: i64,
}

#[derive(Serialize)]
struct StatsRow {
    flow: FlowId,
    packets: u64,
    min_e2e_ns: i64,
    max_e2e_ns: i64,
    mean_e2e_ns: String,
    jitter_ns: i64,
    bound_ns: i64,
    ok: bool,
}

pub fn write_iterations(path: &Path, log: &[IterationRecord]) -> Result<(), IoError> {
    #[derive(Serialize)]
    struct Row {
        iter: usize,
        columns_added: usize,
        lp_obj: String,
        wall_ms: String,
    }
    write_csv(
        path,
        &["iter", "columns_added", "lp_obj", "wall_ms"],
        log.iter().map(|r| Row {
            iter: r.iter,
            columns_added: r.columns_added,
            lp_obj: format!("{:.3}", r.lp_obj + 0.0),
            wall_ms: format!("{:.3}", r.wall_ms),
        }),
    )
}

pub fn write_trace(path: &Path, trace: &[HopRecord]) -> Result<(), IoError> {
    write_csv(
        path,
        &["flow", "seq", "hop", "node", "t_in_ns", "E_ns", "t_out_ns", "q_ns", "d_ns"],
        trace.iter().map(|r| TraceRow {
            flow: r.flow,
            seq: r.seq,
            hop: r.hop,
            node: r.node,
            t_in_ns: r.t_in,
            e_ns: r.e,
            t_out_ns: r.t_out,
            q_ns: r.q,
            d_ns: r.d,
        }),
    )
}

pub fn write_stats(path: &Path, stats: &[FlowStats]) -> Result<(), IoError> {
    write_csv(
        path,
        &["flow", "packets", "min_e2e_ns", "max_e2e_ns", "mean_e2e_ns", "jitter_ns", "bound_ns", "ok"],
        stats.iter().map(|s| StatsRow {
            flow: s.flow,
            packets: s.packets,
            min_e2e_ns: s.min_e2e_ns,
            max_e2e_ns: s.max_e2e_ns,
            mean_e2e_ns: format!("{:.3}", s.mean_e2e_ns),
            jitter_ns: s.jitter_ns,
            bound_ns: s.bound_ns,
            ok: s.ok,
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{generate_flows, generate_topology, GenSpec};
    use crate::scenario;

    #[test]
    fn instance_round_trip() {
        let spec = GenSpec {
            flows: 20,
            ..GenSpec::default()
        };
        let inst = generate_topology(&spec).unwrap();
        let net = Network::new(inst.clone()).unwrap();
        let flows = generate_flows(&spec, &net).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("i.json");
        write_json(&p, &InstanceFile::new(&inst, &flows)).unwrap();
        let back: InstanceFile = read_json(&p).unwrap();
        assert_eq!(back.network().unwrap(), inst);
        assert_eq!(flows_from_records(&net, &back.flows).unwrap(), flows);
    }

    #[test]
    fn missing_catalog_is_rebuilt() {
        let b = scenario::sec5a();
        let net = Network::new(b.instance.clone()).unwrap();
        let mut rec = FlowRecord::from(&b.flows[0]);
        rec.patterns = None;
        rec.packet_bytes = None;
        let f = &flows_from_records(&net, &[rec]).unwrap()[0];
        assert_eq!(f.max_packet_bytes, 1400);
        assert!(f.patterns.len() > 1);
        assert_eq!(f.patterns[0].multiple, 1);
    }

    #[test]
    fn solution_round_trip_and_corruption() {
        let b = scenario::sec5a();
        let net = Network::new(b.instance.clone()).unwrap();
        let file = SolutionFile::new(&net, &b.flows, &b.solution, "bundle", None, None);
        assert_eq!(file.Th_bps, 22_400_000_000);
        assert_eq!(file.solution(&net, &b.flows).unwrap(), b.solution);

        let mut bad = file.clone();
        bad.flows[0].path = vec![NodeId(1), NodeId(3), NodeId(4), NodeId(5), NodeId(6)];
        assert!(bad.solution(&net, &b.flows).is_err());
        let mut bad = file.clone();
        bad.flows[1].pattern = Some(PatternRecord { m: 2, b_prime_bytes: 700 });
        assert!(bad.solution(&net, &b.flows).is_err());
        let mut bad = file;
        bad.format = "other".into();
        assert!(bad.solution(&net, &b.flows).is_err());
    }

    #[test]
    fn csv_headers() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        write_stats(&p, &[]).unwrap();
        assert_eq!(
            fs::read_to_string(&p).unwrap(),
            "flow,packets,min_e2e_ns,max_e2e_ns,mean_e2e_ns,jitter_ns,bound_ns,ok\n"
        );
        let p2 = dir.path().join("t.csv");
        let rec = HopRecord {
            flow: FlowId(1),
            seq: 0,
            hop: 0,
            node: NodeId(1),
            t_in: 1,
            e: 2,
            t_out: 3,
            q: 1,
            d: 1,
            cycle: 0,
            size: 10,
        };
        write_trace(&p2, &[rec]).unwrap();
        let text = fs::read_to_string(&p2).unwrap();
        assert_eq!(text, "flow,seq,hop,node,t_in_ns,E_ns,t_out_ns,q_ns,d_ns\n1,0,0,1,1,2,3,1,1\n");
        let log = [IterationRecord {
            iter: 1,
            columns_added: 4,
            lp_obj: 2.5,
            wall_ms: 0.25,
        }];
        let p3 = dir.path().join("it.csv");
        write_iterations(&p3, &log).unwrap();
        assert_eq!(fs::read_to_string(&p3).unwrap(), "iter,columns_added,lp_obj,wall_ms\n1,4,2.500,0.250\n");
    }
}
