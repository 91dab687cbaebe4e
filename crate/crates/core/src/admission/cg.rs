use std::time::{Duration, Instant};

use log::{debug, info};

use super::master::build_master;
use super::pricing::price_all;
use super::{CgOptions, Column, DualValues};
use crate::lp::{LpBackend, LpStatus};
use crate::model::{FlowId, FlowSpec, Network};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    /// Pricing found no improving column.
    Converged,
    TimeLimit,
    IterationLimit,
    /// The master LP could not be solved to optimality.
    LpFailure,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub columns_added: usize,
    pub lp_obj: f64,
    pub wall_ms: f64,
}

#[derive(Clone, Debug)]
pub struct CgOutcome {
    /// Upper bound on the full relaxation: the final LP value when
    /// certified, otherwise the best Lagrangian bound seen.
    pub ub: f64,
    pub lp_objective: f64,
    pub certified: bool,
    pub termination: Termination,
    pub pool: Vec<Column>,
    pub duals: DualValues,
    pub log: Vec<IterationRecord>,
    /// Flows with no delay-feasible path-pattern couple.
    pub rejected_upfront: Vec<FlowId>,
    pub wall: Duration,
}

/// Column generation on the relaxed master until pricing is exhausted.
pub fn run_cg(net: &Network, flows: &[FlowSpec], backend: &mut dyn LpBackend, opts: &CgOptions) -> CgOutcome {
    let start = Instant::now();
    let budget = opts.cg_budget();
    let (eligible, rejected_upfront) = split_eligible(net, flows);
    let mut master = build_master(net, &eligible, &[]);
    let mut log = Vec::new();
    let mut best_bound = f64::INFINITY;
    let mut duals = DualValues::zero(net, &eligible);
    let mut lp_objective = 0.0;
    let mut last_obj = f64::NEG_INFINITY;

    let termination = loop {
        let iter = log.len();
        let sol = backend.solve_lp(&master.lp);
        if sol.status != LpStatus::Optimal {
            break Termination::LpFailure;
        }
        debug_assert!(sol.objective >= last_obj - 1e-6 * (1.0 + last_obj.abs()));
        last_obj = sol.objective;
        lp_objective = sol.objective;
        duals = master.duals(&sol);

        let priced = price_all(net, &eligible, &duals, opts.parallel);
        let lagrangian: f64 = priced
            .iter()
            .filter_map(|p| p.best_reduced_cost)
            .map(|rc| rc.max(0.0))
            .sum();
        best_bound = best_bound.min(sol.objective + lagrangian);
        let mut added = 0;
        for col in priced.into_iter().flat_map(|p| p.columns) {
            if master.push(col) {
                added += 1;
            }
        }
        let wall_ms = start.elapsed().as_secs_f64() * 1e3;
        debug!("cg iteration {iter}: lp {:.6e}, {added} columns", sol.objective);
        log.push(IterationRecord {
            iter,
            columns_added: added,
            lp_obj: sol.objective,
            wall_ms,
        });
        if added == 0 {
            break Termination::Converged;
        }
        if log.len() >= opts.max_iterations {
            break Termination::IterationLimit;
        }
        if start.elapsed() >= budget {
            break Termination::TimeLimit;
        }
    };
    let certified = termination == Termination::Converged;
    let ub = if certified { lp_objective } else { best_bound };
    info!(
        "column generation: {} iterations, {} columns, UB {:.6e} ({:?})",
        log.len(),
        master.columns.len(),
        ub,
        termination
    );
    CgOutcome {
        ub,
        lp_objective,
        certified,
        termination,
        pool: master.columns,
        duals,
        log,
        rejected_upfront,
        wall: start.elapsed(),
    }
}

/// Separates flows that have at least one delay-feasible couple.
pub(crate) fn split_eligible(net: &Network, flows: &[FlowSpec]) -> (Vec<FlowSpec>, Vec<FlowId>) {
    let mut eligible = Vec::new();
    let mut rejected = Vec::new();
    for f in flows {
        let reachable = match (net.node_index(f.src), net.node_index(f.dst)) {
            (Ok(s), Ok(t)) if s != t => net.min_delays_from(s)[t],
            _ => None,
        };
        let feasible = reachable.is_some_and(|d| {
            f.patterns
                .iter()
                .any(|p| d + crate::model::shaping_delay(f, p, net.cycle()) <= f.deadline_ns)
        });
        if feasible {
            eligible.push(f.clone());
        } else {
            rejected.push(f.id);
        }
    }
    (eligible, rejected)
}
