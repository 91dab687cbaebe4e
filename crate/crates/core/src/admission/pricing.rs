use rayon::prelude::*;

use super::csp::{best_within, csp_front};
use super::{Column, DualValues};
use crate::model::{shaping_delay, FlowSpec, Nanos, Network};

/// Relative margin a reduced cost must exceed for a column to be added.
pub const EPS_PRICE: f64 = 1e-6;

/// Pricing result for one flow across all of its patterns.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FlowPricing {
    /// At most one improving column per pattern.
    pub columns: Vec<Column>,
    /// Largest reduced cost over all delay-feasible couples, or `None` when
    /// the flow has none.
    pub best_reduced_cost: Option<f64>,
}

/// Prices every pattern of `flow` with one label-setting run.
pub fn price_flow(net: &Network, flow: &FlowSpec, duals: &DualValues) -> FlowPricing {
    let (Ok(src), Ok(dst)) = (net.node_index(flow.src), net.node_index(flow.dst)) else {
        return FlowPricing::default();
    };
    let budgets: Vec<Nanos> = flow
        .patterns
        .iter()
        .map(|p| flow.deadline_ns - shaping_delay(flow, p, net.cycle()))
        .collect();
    let Some(&max_budget) = budgets.iter().max() else {
        return FlowPricing::default();
    };
    let min_budget = budgets.iter().copied().filter(|&b| b >= 0).min().unwrap_or(max_budget);
    let cost: Vec<f64> = (0..net.arc_count())
        .map(|a| duals.mu[a] + duals.omega[net.head(a)])
        .collect();
    let delay: Vec<Nanos> = (0..net.arc_count()).map(|a| net.arc_delay(a)).collect();
    let front = csp_front(net, &cost, &delay, min_budget, max_budget, src, dst);

    let value = flow.throughput_bps as f64;
    let base = value - duals.lambda(flow.id);
    let mut out = FlowPricing::default();
    for (k, &budget) in budgets.iter().enumerate() {
        let Some(path) = best_within(&front, budget) else {
            continue;
        };
        let beta = flow.patterns[k].max_reservation() as f64;
        let rc = base - beta * (duals.omega[src] + path.cost);
        out.best_reduced_cost = Some(out.best_reduced_cost.map_or(rc, |b: f64| b.max(rc)));
        if rc > EPS_PRICE * value {
            let column = Column::new(net, flow, k, &path.arcs)
                .expect("label-setting returns connected paths")
                .expect("label-setting respects the delay budget");
            out.columns.push(column);
        }
    }
    out
}

/// The improving column of one couple `(flow, k)`, if any.
pub fn pricing(net: &Network, flow: &FlowSpec, k: usize, duals: &DualValues) -> Option<Column> {
    price_flow(net, flow, duals)
        .columns
        .into_iter()
        .find(|c| c.path.pattern == k)
}

/// Prices all flows; results keep the input flow order.
pub(crate) fn price_all(net: &Network, flows: &[FlowSpec], duals: &DualValues, parallel: bool) -> Vec<FlowPricing> {
    if parallel {
        flows.par_iter().map(|f| price_flow(net, f, duals)).collect()
    } else {
        flows.iter().map(|f| price_flow(net, f, duals)).collect()
    }
}
