//! Delay-constrained least-cost paths by label setting.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use crate::model::{Nanos, Network};

#[derive(Clone, Debug, PartialEq)]
pub struct CspPath {
    pub arcs: Vec<usize>,
    pub cost: f64,
    pub delay: Nanos,
}

struct Label {
    node: usize,
    cost: f64,
    delay: Nanos,
    pred: Option<usize>,
    arc: usize,
}

#[derive(PartialEq)]
struct Key {
    cost: f64,
    delay: Nanos,
    node_id: u32,
    label: usize,
}

impl Eq for Key {}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.cost
            .total_cmp(&other.cost)
            .then(self.delay.cmp(&other.delay))
            .then(self.node_id.cmp(&other.node_id))
            .then(self.label.cmp(&other.label))
    }
}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Least-cost simple path from `src` to `dst` whose total delay is at most
/// `budget`. Costs must be nonnegative.
pub fn csp_shortest_path(
    net: &Network,
    cost: &[f64],
    delay: &[Nanos],
    budget: Nanos,
    src: usize,
    dst: usize,
) -> Option<CspPath> {
    let front = csp_front(net, cost, delay, budget, budget, src, dst);
    best_within(&front, budget).cloned()
}

/// Cheapest entry of a Pareto front that meets `budget`.
pub fn best_within(front: &[CspPath], budget: Nanos) -> Option<&CspPath> {
    front.iter().find(|p| p.delay <= budget)
}

/// Pareto-optimal (cost, delay) paths to `dst`, cheapest first, with delay
/// strictly decreasing along the front.
///
/// Only paths with delay at most `max_budget` are explored, and the search
/// stops as soon as a path within `min_budget` is found: every budget in
/// `[min_budget, max_budget]` is then answered by [`best_within`].
pub fn csp_front(
    net: &Network,
    cost: &[f64],
    delay: &[Nanos],
    min_budget: Nanos,
    max_budget: Nanos,
    src: usize,
    dst: usize,
) -> Vec<CspPath> {
    let n = net.node_count();
    let mut front = Vec::new();
    if src == dst || max_budget < 0 {
        return front;
    }
    let lb = delays_to(net, delay, dst);
    if lb[src].is_none_or(|d| d > max_budget) {
        return front;
    }
    let mut labels = vec![Label {
        node: src,
        cost: 0.0,
        delay: 0,
        pred: None,
        arc: usize::MAX,
    }];
    let mut settled: Vec<Option<Nanos>> = vec![None; n];
    let mut heap = BinaryHeap::new();
    heap.push(Reverse(Key {
        cost: 0.0,
        delay: 0,
        node_id: net.node(src).id.0,
        label: 0,
    }));
    while let Some(Reverse(key)) = heap.pop() {
        let (v, c, d) = {
            let l = &labels[key.label];
            (l.node, l.cost, l.delay)
        };
        if settled[v].is_some_and(|best| d >= best) {
            continue;
        }
        settled[v] = Some(d);
        if v == dst {
            front.push(trace(&labels, key.label));
            if d <= min_budget {
                break;
            }
            continue;
        }
        for &a in net.out_arcs(v) {
            let w = net.head(a);
            let nd = d + delay[a];
            if lb[w].is_none_or(|rest| nd + rest > max_budget) {
                continue;
            }
            if settled[w].is_some_and(|best| nd >= best) || on_path(&labels, key.label, w) {
                continue;
            }
            let nc = c + cost[a];
            labels.push(Label {
                node: w,
                cost: nc,
                delay: nd,
                pred: Some(key.label),
                arc: a,
            });
            heap.push(Reverse(Key {
                cost: nc,
                delay: nd,
                node_id: net.node(w).id.0,
                label: labels.len() - 1,
            }));
        }
    }
    front
}

fn on_path(labels: &[Label], mut at: usize, node: usize) -> bool {
    loop {
        if labels[at].node == node {
            return true;
        }
        match labels[at].pred {
            Some(p) => at = p,
            None => return false,
        }
    }
}

fn trace(labels: &[Label], end: usize) -> CspPath {
    let mut arcs = Vec::new();
    let mut at = end;
    while let Some(p) = labels[at].pred {
        arcs.push(labels[at].arc);
        at = p;
    }
    arcs.reverse();
    CspPath {
        arcs,
        cost: labels[end].cost,
        delay: labels[end].delay,
    }
}

/// Minimum delay from every node to `dst` under `delay`.
fn delays_to(net: &Network, delay: &[Nanos], dst: usize) -> Vec<Option<Nanos>> {
    let mut dist: Vec<Option<Nanos>> = vec![None; net.node_count()];
    let mut heap = BinaryHeap::new();
    dist[dst] = Some(0);
    heap.push(Reverse((0, dst)));
    while let Some(Reverse((d, v))) = heap.pop() {
        if dist[v].is_some_and(|best| d > best) {
            continue;
        }
        for &a in net.in_arcs(v) {
            let u = net.tail(a);
            let nd = d + delay[a];
            if dist[u].is_none_or(|cur| nd < cur) {
                dist[u] = Some(nd);
                heap.push(Reverse((nd, u)));
            }
        }
    }
    dist
}
