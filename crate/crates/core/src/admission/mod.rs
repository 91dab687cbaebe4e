//! Admission control by column generation over path-pattern couples,
//! followed by exact 0-1 rounding over the generated columns.

mod cg;
pub mod csp;
mod master;
mod pricing;
mod round;

use std::collections::BTreeMap;
use std::time::Duration;

use crate::model::{path_feasibility, Bytes, FlowId, FlowSpec, ModelError, Network, PathPattern};

pub use cg::{run_cg, CgOutcome, IterationRecord, Termination};
pub use csp::{csp_shortest_path, CspPath};
pub use master::{build_master, Master};
pub use pricing::{price_flow, pricing, FlowPricing};
pub use round::{admit, round_ilp, CgxResult, Rounded};

/// A path-pattern couple of one flow, as a master column.
#[derive(Clone, Debug, PartialEq)]
pub struct Column {
    pub path: PathPattern,
    /// Node indices of the path, source first.
    pub nodes: Vec<usize>,
    /// Objective coefficient: the flow's requested throughput.
    pub value: f64,
}

impl Column {
    /// Builds a column after checking that the couple is delay-feasible.
    pub fn new(net: &Network, flow: &FlowSpec, k: usize, arcs: &[usize]) -> Result<Option<Column>, ModelError> {
        Ok(path_feasibility(net, flow, k, arcs)?.map(|path| Column {
            nodes: net.path_nodes(&path.arcs),
            value: flow.throughput_bps as f64,
            path,
        }))
    }

    pub fn flow(&self) -> FlowId {
        self.path.flow
    }

    pub fn beta(&self) -> Bytes {
        self.path.beta
    }

    pub(crate) fn key(&self) -> (FlowId, usize, Vec<usize>) {
        (self.path.flow, self.path.pattern, self.path.arcs.clone())
    }
}

/// Master duals: routing, arc capacity and buffer capacity rows.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DualValues {
    pub lambda: BTreeMap<FlowId, f64>,
    pub mu: Vec<f64>,
    pub omega: Vec<f64>,
}

impl DualValues {
    pub fn zero(net: &Network, flows: &[FlowSpec]) -> Self {
        DualValues {
            lambda: flows.iter().map(|f| (f.id, 0.0)).collect(),
            mu: vec![0.0; net.arc_count()],
            omega: vec![0.0; net.node_count()],
        }
    }

    pub fn lambda(&self, flow: FlowId) -> f64 {
        self.lambda.get(&flow).copied().unwrap_or(0.0)
    }

    /// `R_f - lambda_f - beta (omega_src + sum over arcs of mu_a + omega_head)`.
    pub fn reduced_cost(&self, column: &Column) -> f64 {
        let beta = column.beta() as f64;
        let src = column.nodes[0];
        let path: f64 = column
            .path
            .arcs
            .iter()
            .zip(&column.nodes[1..])
            .map(|(&a, &v)| self.mu[a] + self.omega[v])
            .sum();
        column.value - self.lambda(column.flow()) - beta * (self.omega[src] + path)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlowDecision {
    pub flow: FlowId,
    pub accepted: Option<PathPattern>,
}

/// Per-flow admission decisions.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AdmissionSolution {
    pub decisions: Vec<FlowDecision>,
}

impl AdmissionSolution {
    pub fn rejecting_all(flows: &[FlowSpec]) -> Self {
        AdmissionSolution {
            decisions: flows
                .iter()
                .map(|f| FlowDecision {
                    flow: f.id,
                    accepted: None,
                })
                .collect(),
        }
    }

    pub fn decision(&self, flow: FlowId) -> Option<&PathPattern> {
        self.decisions
            .iter()
            .find(|d| d.flow == flow)
            .and_then(|d| d.accepted.as_ref())
    }

    pub fn accepted(&self) -> impl Iterator<Item = &PathPattern> {
        self.decisions.iter().filter_map(|d| d.accepted.as_ref())
    }

    pub fn accepted_count(&self) -> usize {
        self.accepted().count()
    }

    /// Accepted throughput `Th`: the sum of `R_f` over accepted flows.
    pub fn throughput_bps(&self, flows: &[FlowSpec]) -> u64 {
        let by_id: BTreeMap<FlowId, u64> = flows.iter().map(|f| (f.id, f.throughput_bps)).collect();
        self.accepted().map(|p| by_id.get(&p.flow).copied().unwrap_or(0)).sum()
    }

    /// Integer recheck of every admission constraint: one selection per
    /// flow, delay feasibility, and reserved bytes per arc and node.
    pub fn verify(&self, net: &Network, flows: &[FlowSpec]) -> Result<(), String> {
        let mut seen = BTreeMap::new();
        for d in &self.decisions {
            if seen.insert(d.flow, ()).is_some() {
                return Err(format!("flow {} decided twice", d.flow));
            }
        }
        let mut arc_load: Vec<Bytes> = vec![0; net.arc_count()];
        let mut node_load: Vec<Bytes> = vec![0; net.node_count()];
        for pp in self.accepted() {
            let flow = flows
                .iter()
                .find(|f| f.id == pp.flow)
                .ok_or_else(|| format!("unknown flow {}", pp.flow))?;
            let again = path_feasibility(net, flow, pp.pattern, &pp.arcs)
                .map_err(|e| format!("flow {}: {e}", pp.flow))?;
            if again.as_ref() != Some(pp) {
                return Err(format!("flow {}: selection is not delay-feasible", pp.flow));
            }
            for &a in &pp.arcs {
                arc_load[a] += pp.beta;
            }
            for v in net.path_nodes(&pp.arcs) {
                node_load[v] += pp.beta;
            }
        }
        for (a, &load) in arc_load.iter().enumerate() {
            let cap = net.arc(a).capacity_bytes;
            if load > cap {
                let arc = net.arc(a);
                return Err(format!("arc {}->{} carries {load} > {cap} bytes", arc.tail, arc.head));
            }
        }
        for (v, &load) in node_load.iter().enumerate() {
            let cap = net.node(v).buffer_bytes;
            if load > cap {
                return Err(format!("node {} buffers {load} > {cap} bytes", net.node(v).id));
            }
        }
        Ok(())
    }
}

/// `(UB - Z) / UB * 100`, clamped at zero; zero when `UB` is zero.
pub fn optimality_gap(ub: f64, z: f64) -> f64 {
    if ub <= 0.0 {
        return 0.0;
    }
    ((ub - z) / ub * 100.0).max(0.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CgOptions {
    /// Budget for column generation and rounding together.
    pub time_limit: Duration,
    /// Share of the budget given to column generation.
    pub cg_fraction: f64,
    /// Branch-and-bound node limit; keeps results reproducible.
    pub node_limit: usize,
    pub max_iterations: usize,
    /// Run pricing on the rayon pool.
    pub parallel: bool,
}

impl Default for CgOptions {
    fn default() -> Self {
        CgOptions {
            time_limit: Duration::from_secs(300),
            cg_fraction: 0.7,
            node_limit: 20_000,
            max_iterations: 10_000,
            parallel: true,
        }
    }
}

impl CgOptions {
    pub fn cg_budget(&self) -> Duration {
        self.time_limit.mul_f64(self.cg_fraction.clamp(0.0, 1.0))
    }

    pub fn rounding_budget(&self) -> Duration {
        self.time_limit.saturating_sub(self.cg_budget())
    }
}

/// Summary of one admission run.
#[derive(Clone, Debug, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    pub columns_per_iteration: Vec<usize>,
    pub ub: f64,
    pub z: f64,
    pub gap_percent: f64,
    pub wall: Duration,
    pub termination: Termination,
    /// True when pricing proved the final LP value optimal.
    pub certified: bool,
    pub pool_size: usize,
    pub bnb_nodes: usize,
    pub rounding_optimal: bool,
}

#[cfg(test)]
mod tests;
