use std::time::Instant;

use super::simplex::{DualOutcome, Simplex};
use super::{IntegerSolveResult, IpOptions, IpStatus, LinearProgram, LpStatus, EPS_FEAS};

const INT_TOL: f64 = 1e-6;
const RESORT_EVERY: usize = 1000;
const TRACE_EVERY: usize = 100;

struct Node {
    fixings: Vec<(usize, bool)>,
    bound: f64,
}

/// Depth-first branch-and-bound over 0-1 columns with LP bounds.
///
/// Branches on the most fractional binary; open nodes are re-sorted by bound
/// every thousand nodes. Child relaxations are re-optimized from the parent
/// basis with the dual simplex.
pub fn solve_ip_exact(lp: &LinearProgram, opts: &IpOptions) -> IntegerSolveResult {
    let start = Instant::now();
    let deadline = start + opts.time_limit;
    let n = lp.num_columns();
    let binaries: Vec<usize> = (0..n).filter(|&j| lp.columns[j].binary).collect();
    let base_bounds: Vec<(f64, f64)> = lp
        .columns
        .iter()
        .map(|c| {
            let hi = c.upper.unwrap_or(f64::INFINITY);
            (0.0, if c.binary { hi.min(1.0) } else { hi })
        })
        .collect();

    let mut incumbent: Option<(Vec<bool>, f64)> = None;
    let consider = |x: Vec<bool>, incumbent: &mut Option<(Vec<bool>, f64)>| {
        if let Some(obj) = integral_objective(lp, &x) {
            if incumbent.as_ref().is_none_or(|(_, best)| obj > *best) {
                *incumbent = Some((x, obj));
            }
        }
    };
    if let Some(init) = &opts.initial {
        if init.len() == n {
            consider(init.clone(), &mut incumbent);
        }
    }
    if lp.rows.iter().all(|r| r.rhs >= 0.0) {
        consider(vec![false; n], &mut incumbent);
    }

    let mut simplex = Simplex::from_lp(lp, true).expect("malformed linear program");
    simplex.deadline = Some(deadline);
    let root = simplex.solve();
    let mut bound_trace = Vec::new();
    let finish = |status, incumbent: Option<(Vec<bool>, f64)>, bound: f64, nodes, trace: Vec<f64>| {
        let (x, obj) = incumbent.unwrap_or_else(|| (vec![false; n], f64::NEG_INFINITY));
        IntegerSolveResult {
            status,
            objective: obj,
            best_bound: bound.max(obj),
            incumbent: x,
            nodes,
            bound_trace: trace,
        }
    };
    match root {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return finish(IpStatus::Infeasible, None, f64::NEG_INFINITY, 0, bound_trace),
        _ => {
            let bound = f64::INFINITY;
            let status = if incumbent.is_some() { IpStatus::Limit } else { IpStatus::Infeasible };
            return finish(status, incumbent, bound, 0, bound_trace);
        }
    }
    let root_bound = simplex.current_objective();
    let root_x = simplex.structural_solution();
    consider(greedy_round(lp, &root_x), &mut incumbent);

    let mut stack = vec![Node {
        fixings: Vec::new(),
        bound: root_bound,
    }];
    let mut nodes = 0usize;
    let mut limited = false;
    while let Some(node) = stack.pop() {
        let inc = incumbent.as_ref().map_or(f64::NEG_INFINITY, |(_, o)| *o);
        if node.bound <= inc + prune_tol(inc) {
            continue;
        }
        if nodes >= opts.node_limit || Instant::now() >= deadline {
            stack.push(node);
            limited = true;
            break;
        }
        nodes += 1;
        if nodes.is_multiple_of(RESORT_EVERY) {
            stack.sort_by(|a, b| a.bound.total_cmp(&b.bound));
        }
        if nodes.is_multiple_of(TRACE_EVERY) {
            let open = stack.iter().map(|s| s.bound).fold(node.bound, f64::max);
            bound_trace.push(open.max(inc));
        }

        let mut bounds = base_bounds.clone();
        for &(j, one) in &node.fixings {
            let v = if one { 1.0 } else { 0.0 };
            bounds[j] = (v, v);
        }
        simplex.set_structural_bounds(&bounds);
        let cutoff = incumbent.as_ref().map(|(_, o)| *o + prune_tol(*o));
        match simplex.dual(cutoff) {
            DualOutcome::Optimal => {}
            DualOutcome::Infeasible | DualOutcome::Cutoff => continue,
            DualOutcome::Stalled => {
                stack.push(node);
                limited = true;
                break;
            }
        }
        match simplex.polish() {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => {
                // Numerical trouble after the dual pass: solve the node cold.
                let mut fresh = Simplex::from_lp(lp, true).expect("malformed linear program");
                fresh.deadline = Some(deadline);
                fresh.set_structural_bounds(&bounds);
                if fresh.solve() != LpStatus::Optimal {
                    continue;
                }
                simplex = fresh;
            }
            _ => {
                stack.push(node);
                limited = true;
                break;
            }
        }
        let value = simplex.current_objective().min(node.bound);
        if value <= inc + prune_tol(inc) {
            continue;
        }
        let x = simplex.structural_solution();
        let branch = binaries
            .iter()
            .copied()
            .filter(|&j| (x[j] - x[j].round()).abs() > INT_TOL)
            .max_by(|&a, &b| {
                let fa = (x[a] - 0.5).abs();
                let fb = (x[b] - 0.5).abs();
                fb.total_cmp(&fa).then(b.cmp(&a))
            });
        match branch {
            None => {
                let rounded: Vec<bool> = (0..n).map(|j| x[j] > 0.5).collect();
                consider(rounded, &mut incumbent);
            }
            Some(j) => {
                consider(greedy_round(lp, &x), &mut incumbent);
                let mut down = node.fixings.clone();
                down.push((j, false));
                let mut up = node.fixings;
                up.push((j, true));
                stack.push(Node {
                    fixings: down,
                    bound: value,
                });
                stack.push(Node {
                    fixings: up,
                    bound: value,
                });
            }
        }
    }

    let inc = incumbent.as_ref().map_or(f64::NEG_INFINITY, |(_, o)| *o);
    let open = stack.iter().map(|s| s.bound).fold(f64::NEG_INFINITY, f64::max);
    let bound = if limited { open.max(inc).min(root_bound.max(inc)) } else { inc };
    bound_trace.push(bound);
    let status = match (&incumbent, limited) {
        (None, false) => IpStatus::Infeasible,
        (_, true) => IpStatus::Limit,
        (Some(_), false) => IpStatus::Optimal,
    };
    finish(status, incumbent, bound, nodes, bound_trace)
}

fn prune_tol(obj: f64) -> f64 {
    1e-9 * obj.abs().max(1.0)
}

/// Objective of a 0-1 assignment when it satisfies every row.
fn integral_objective(lp: &LinearProgram, x: &[bool]) -> Option<f64> {
    let xf: Vec<f64> = x.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    let feasible = lp
        .activities(&xf)
        .iter()
        .zip(&lp.rows)
        .all(|(a, r)| *a <= r.rhs + EPS_FEAS * r.rhs.abs().max(1.0));
    let bounds_ok = lp
        .columns
        .iter()
        .zip(x)
        .all(|(c, &v)| !v || c.upper.is_none_or(|u| u >= 1.0));
    (feasible && bounds_ok).then(|| lp.objective_value(&xf))
}

/// Adds columns in decreasing LP value while every row stays satisfied.
/// Only meaningful when the all-zero point is feasible.
fn greedy_round(lp: &LinearProgram, x: &[f64]) -> Vec<bool> {
    let n = lp.num_columns();
    let mut chosen = vec![false; n];
    if lp.rows.iter().any(|r| r.rhs < 0.0) {
        return chosen;
    }
    let mut order: Vec<usize> = (0..n)
        .filter(|&j| lp.columns[j].objective > 0.0 && x[j] > INT_TOL)
        .collect();
    order.sort_by(|&a, &b| {
        x[b].total_cmp(&x[a])
            .then(lp.columns[b].objective.total_cmp(&lp.columns[a].objective))
            .then(a.cmp(&b))
    });
    let mut act = vec![0.0; lp.num_rows()];
    for j in order {
        let col = &lp.columns[j];
        let fits = col.entries.iter().all(|&(i, a)| {
            let rhs = lp.rows[i].rhs;
            act[i] + a <= rhs + EPS_FEAS * rhs.abs().max(1.0)
        });
        if fits {
            for &(i, a) in &col.entries {
                act[i] += a;
            }
            chosen[j] = true;
        }
    }
    chosen
}
