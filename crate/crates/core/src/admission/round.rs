use std::time::{Duration, Instant};

use log::{info, warn};

use super::cg::{run_cg, CgOutcome};
use super::master::build_master;
use super::{optimality_gap, AdmissionSolution, CgOptions, CgReport, Column, FlowDecision};
use crate::lp::{IpOptions, IpStatus, LpBackend, SimplexBackend};
use crate::model::{FlowSpec, Network};
use crate::ospf::{ospf_admit, OspfConfig};

#[derive(Clone, Debug)]
pub struct Rounded {
    pub solution: AdmissionSolution,
    pub report: CgReport,
    /// Generated columns plus the baseline's, as handed to branch-and-bound.
    pub pool: Vec<Column>,
}

/// Exact 0-1 selection over the generated columns and the baseline's
/// columns, starting from the baseline's selection.
pub fn round_ilp(
    net: &Network,
    flows: &[FlowSpec],
    cg: &CgOutcome,
    baseline: &AdmissionSolution,
    backend: &mut dyn LpBackend,
    opts: &CgOptions,
    time_limit: Duration,
) -> Rounded {
    let start = Instant::now();
    let eligible: Vec<FlowSpec> = flows
        .iter()
        .filter(|f| !cg.rejected_upfront.contains(&f.id))
        .cloned()
        .collect();
    let mut master = build_master(net, &eligible, &cg.pool).into_binary();
    let mut initial_cols = Vec::new();
    for pp in baseline.accepted() {
        let Some(flow) = eligible.iter().find(|f| f.id == pp.flow) else {
            continue;
        };
        let Ok(Some(col)) = Column::new(net, flow, pp.pattern, &pp.arcs) else {
            warn!("baseline selection of flow {} is not a valid column", pp.flow);
            continue;
        };
        let key = col.key();
        master.push(col);
        if let Some(j) = master.columns.iter().position(|c| c.key() == key) {
            initial_cols.push(j);
        }
    }
    let mut initial = vec![false; master.columns.len()];
    for j in initial_cols {
        initial[j] = true;
    }
    let ip = backend.solve_ip(
        &master.lp,
        &IpOptions {
            time_limit,
            node_limit: opts.node_limit,
            initial: Some(initial),
        },
    );

    let mut solution = AdmissionSolution::rejecting_all(flows);
    if ip.status != IpStatus::Infeasible {
        for (j, &on) in ip.incumbent.iter().enumerate() {
            if on {
                let path = master.columns[j].path.clone();
                if let Some(d) = solution.decisions.iter_mut().find(|d| d.flow == path.flow) {
                    *d = FlowDecision {
                        flow: path.flow,
                        accepted: Some(path),
                    };
                }
            }
        }
    }
    if let Err(e) = solution.verify(net, flows) {
        // Float round-off admitted an overload; fall back to the baseline.
        warn!("rounded selection failed the integer recheck ({e}); using the baseline");
        solution = baseline.clone();
    }
    let z = solution.throughput_bps(flows) as f64;
    let ub = cg.ub;
    let gap = optimality_gap(ub, z);
    info!("rounding: Z {z:.6e}, UB {ub:.6e}, gap {gap:.4}% after {} nodes", ip.nodes);
    let report = CgReport {
        iterations: cg.log.len(),
        columns_per_iteration: cg.log.iter().map(|r| r.columns_added).collect(),
        ub,
        z,
        gap_percent: gap,
        wall: cg.wall + start.elapsed(),
        termination: cg.termination,
        certified: cg.certified,
        pool_size: master.columns.len(),
        bnb_nodes: ip.nodes,
        rounding_optimal: ip.status == IpStatus::Optimal,
    };
    Rounded {
        solution,
        report,
        pool: master.columns,
    }
}

#[derive(Clone, Debug)]
pub struct CgxResult {
    pub solution: AdmissionSolution,
    pub report: CgReport,
    pub cg: CgOutcome,
    pub baseline: AdmissionSolution,
    pub pool: Vec<Column>,
}

/// Column generation, then rounding, with the built-in LP engine.
pub fn admit(net: &Network, flows: &[FlowSpec], opts: &CgOptions) -> CgxResult {
    let mut backend = SimplexBackend::new();
    let baseline = ospf_admit(net, flows, &OspfConfig::default());
    let cg = run_cg(net, flows, &mut backend, opts);
    let left = opts.time_limit.saturating_sub(cg.wall).max(opts.rounding_budget());
    let rounded = round_ilp(net, flows, &cg, &baseline, &mut backend, opts, left);
    CgxResult {
        solution: rounded.solution,
        report: rounded.report,
        cg,
        baseline,
        pool: rounded.pool,
    }
}
