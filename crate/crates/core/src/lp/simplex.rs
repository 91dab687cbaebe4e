use std::time::Instant;

use super::{LinearProgram, LpColumn, LpSolution, LpStatus};

// Internal tolerances, applied to the scaled problem.
const PIVOT_TOL: f64 = 1e-11;
const FEAS_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-9;
const DEGENERATE_STREAK: usize = 50;
const REFACTOR_EVERY: usize = 250;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum VarState {
    Basic,
    AtLower,
    AtUpper,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Phase {
    One,
    Two,
}

/// Outcome of a dual simplex run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum DualOutcome {
    Optimal,
    Infeasible,
    /// Objective fell below the cutoff.
    Cutoff,
    Stalled,
}

/// Bounded-variable revised simplex with a dense explicit basis inverse.
///
/// Variable layout: `0..m` slacks, `m..2m` artificials, then structural
/// columns in insertion order, so columns can be appended without
/// renumbering.
#[derive(Clone, Debug)]
pub struct Simplex {
    m: usize,
    row_scale: Vec<f64>,
    rhs: Vec<f64>,
    cols: Vec<Vec<(usize, f64)>>,
    obj: Vec<f64>,
    obj_scale: f64,
    lower: Vec<f64>,
    upper: Vec<f64>,
    state: Vec<VarState>,
    basis: Vec<usize>,
    binv: Vec<f64>,
    xb: Vec<f64>,
    pivots_since_refactor: usize,
    pub iterations: usize,
    pub max_iterations: usize,
    pub deadline: Option<Instant>,
}

impl Simplex {
    /// Builds the internal problem. With `binary_bounds`, binary columns are
    /// bounded by one.
    pub fn from_lp(lp: &LinearProgram, binary_bounds: bool) -> Result<Self, String> {
        lp.check()?;
        let m = lp.num_rows();
        let mut max_entry = vec![0.0f64; m];
        for col in &lp.columns {
            for &(i, a) in &col.entries {
                max_entry[i] = max_entry[i].max(a.abs());
            }
        }
        let row_scale: Vec<f64> = lp
            .rows
            .iter()
            .zip(&max_entry)
            .map(|(r, &amax)| {
                if r.rhs.abs() > 1e-9 {
                    1.0 / r.rhs.abs()
                } else if amax > 0.0 {
                    1.0 / amax
                } else {
                    1.0
                }
            })
            .collect();
        let rhs = lp.rows.iter().zip(&row_scale).map(|(r, s)| r.rhs * s).collect();
        let mut s = Simplex {
            m,
            row_scale,
            rhs,
            cols: Vec::new(),
            obj: Vec::new(),
            obj_scale: 1.0,
            lower: vec![0.0; 2 * m],
            upper: [vec![f64::INFINITY; m], vec![0.0; m]].concat(),
            state: vec![VarState::AtLower; 2 * m],
            basis: (0..m).collect(),
            binv: identity(m),
            xb: vec![0.0; m],
            pivots_since_refactor: 0,
            iterations: 0,
            max_iterations: 50_000 + 20 * (m + lp.num_columns()),
            deadline: None,
        };
        for i in 0..m {
            s.state[i] = VarState::Basic;
        }
        for col in &lp.columns {
            s.push_column(col, binary_bounds);
        }
        s.reset_basis();
        Ok(s)
    }

    pub fn num_structural(&self) -> usize {
        self.cols.len()
    }

    fn var_count(&self) -> usize {
        2 * self.m + self.cols.len()
    }

    /// Whether `lp` equals the problem held here plus appended columns.
    pub fn extends_to(&self, lp: &LinearProgram) -> bool {
        if lp.num_rows() != self.m || lp.num_columns() < self.cols.len() {
            return false;
        }
        let rows_same = lp
            .rows
            .iter()
            .zip(self.rhs.iter().zip(&self.row_scale))
            .all(|(r, (b, s))| (r.rhs * s - b).abs() <= 1e-12 * b.abs().max(1.0));
        rows_same
            && lp.columns.iter().zip(&self.cols).zip(&self.obj).all(|((c, mine), &o)| {
                c.objective == o && c.upper.is_none() && c.entries.len() == mine.len()
            })
            && lp.columns[self.cols.len()..].iter().all(|c| {
                c.upper.is_none() && c.entries.iter().all(|&(i, a)| i < self.m && a.is_finite())
            })
    }

    /// Appends a structural column at its lower bound; the current basis
    /// stays primal feasible.
    pub fn push_column(&mut self, col: &LpColumn, binary_bounds: bool) {
        let entries = col
            .entries
            .iter()
            .filter(|&&(_, a)| a != 0.0)
            .map(|&(i, a)| (i, a * self.row_scale[i]))
            .collect();
        self.cols.push(entries);
        self.obj.push(col.objective);
        self.lower.push(0.0);
        let ub = match col.upper {
            Some(u) => u,
            None if binary_bounds && col.binary => 1.0,
            None => f64::INFINITY,
        };
        let ub = if binary_bounds && col.binary { ub.min(1.0) } else { ub };
        self.upper.push(ub);
        self.state.push(VarState::AtLower);
    }

    fn column(&self, j: usize) -> ColumnRef<'_> {
        let m = self.m;
        if j < m {
            ColumnRef::Unit(j, 1.0)
        } else if j < 2 * m {
            ColumnRef::Unit(j - m, -1.0)
        } else {
            ColumnRef::Sparse(&self.cols[j - 2 * m])
        }
    }

    fn cost(&self, j: usize, phase: Phase) -> f64 {
        match phase {
            Phase::One => {
                if (self.m..2 * self.m).contains(&j) {
                    -1.0
                } else {
                    0.0
                }
            }
            Phase::Two => {
                if j >= 2 * self.m {
                    self.obj[j - 2 * self.m] * self.obj_scale
                } else {
                    0.0
                }
            }
        }
    }

    fn value(&self, j: usize) -> f64 {
        match self.state[j] {
            VarState::AtLower => self.lower[j],
            VarState::AtUpper => self.upper[j],
            VarState::Basic => {
                let r = self.basis.iter().position(|&b| b == j).expect("basic var in basis");
                self.xb[r]
            }
        }
    }

    /// Slack basis with artificials on rows whose rhs is negative.
    fn reset_basis(&mut self) {
        let m = self.m;
        for j in 0..self.var_count() {
            self.state[j] = VarState::AtLower;
        }
        for j in m..2 * m {
            self.upper[j] = 0.0;
        }
        let resid = self.residual_rhs();
        for i in 0..m {
            if resid[i] >= 0.0 {
                self.basis[i] = i;
                self.state[i] = VarState::Basic;
            } else {
                self.basis[i] = m + i;
                self.upper[m + i] = f64::INFINITY;
                self.state[m + i] = VarState::Basic;
            }
        }
        self.refactor().expect("initial basis is diagonal");
    }

    /// `b - N x_N`.
    fn residual_rhs(&self) -> Vec<f64> {
        let mut r = self.rhs.clone();
        for j in 0..self.var_count() {
            if self.state[j] == VarState::Basic {
                continue;
            }
            let v = self.value(j);
            if v != 0.0 {
                self.column(j).axpy(-v, &mut r);
            }
        }
        r
    }

    fn recompute_xb(&mut self) {
        let r = self.residual_rhs();
        self.xb = self.binv_times(&r);
    }

    fn binv_times(&self, v: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut out = vec![0.0; m];
        for (k, &vk) in v.iter().enumerate() {
            if vk == 0.0 {
                continue;
            }
            for i in 0..m {
                out[i] += self.binv[i * m + k] * vk;
            }
        }
        out
    }

    fn binv_column(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut out = vec![0.0; m];
        match self.column(j) {
            ColumnRef::Unit(k, s) => {
                for i in 0..m {
                    out[i] = s * self.binv[i * m + k];
                }
            }
            ColumnRef::Sparse(entries) => {
                for &(k, a) in entries {
                    for i in 0..m {
                        out[i] += self.binv[i * m + k] * a;
                    }
                }
            }
        }
        out
    }

    /// `y = c_B B^-1`.
    fn duals_for(&self, phase: Phase) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (i, &bj) in self.basis.iter().enumerate() {
            let c = self.cost(bj, phase);
            if c == 0.0 {
                continue;
            }
            let row = &self.binv[i * m..(i + 1) * m];
            for (yk, &b) in y.iter_mut().zip(row) {
                *yk += c * b;
            }
        }
        y
    }

    fn reduced_cost(&self, j: usize, y: &[f64], phase: Phase) -> f64 {
        self.cost(j, phase) - self.column(j).dot(y)
    }

    /// Rebuilds the explicit inverse by Gauss-Jordan elimination.
    fn refactor(&mut self) -> Result<(), ()> {
        let m = self.m;
        let mut b = vec![0.0; m * m];
        for (r, &j) in self.basis.iter().enumerate() {
            match self.column(j) {
                ColumnRef::Unit(k, s) => b[k * m + r] = s,
                ColumnRef::Sparse(entries) => {
                    for &(k, a) in entries {
                        b[k * m + r] = a;
                    }
                }
            }
        }
        let mut inv = identity(m);
        for c in 0..m {
            let mut p = c;
            let mut best = b[c * m + c].abs();
            for r in c + 1..m {
                let v = b[r * m + c].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best < 1e-13 {
                return Err(());
            }
            if p != c {
                for k in 0..m {
                    b.swap(c * m + k, p * m + k);
                    inv.swap(c * m + k, p * m + k);
                }
            }
            let piv = b[c * m + c];
            for k in 0..m {
                b[c * m + k] /= piv;
                inv[c * m + k] /= piv;
            }
            for r in 0..m {
                if r == c {
                    continue;
                }
                let f = b[r * m + c];
                if f == 0.0 {
                    continue;
                }
                for k in 0..m {
                    let bv = b[c * m + k];
                    if bv != 0.0 {
                        b[r * m + k] -= f * bv;
                    }
                    let iv = inv[c * m + k];
                    if iv != 0.0 {
                        inv[r * m + k] -= f * iv;
                    }
                }
            }
        }
        self.binv = inv;
        self.pivots_since_refactor = 0;
        self.recompute_xb();
        Ok(())
    }

    /// Replaces the basic variable of row `r` by `q`, given `alpha = B^-1 a_q`.
    fn pivot(&mut self, r: usize, q: usize, alpha: &[f64]) {
        let m = self.m;
        let piv = alpha[r];
        let (before, rest) = self.binv.split_at_mut(r * m);
        let (prow, after) = rest.split_at_mut(m);
        for v in prow.iter_mut() {
            *v /= piv;
        }
        for (i, &ai) in alpha.iter().enumerate() {
            if i == r || ai == 0.0 {
                continue;
            }
            let row = if i < r {
                &mut before[i * m..(i + 1) * m]
            } else {
                &mut after[(i - r - 1) * m..(i - r) * m]
            };
            for (x, &p) in row.iter_mut().zip(prow.iter()) {
                *x -= ai * p;
            }
        }
        self.basis[r] = q;
        self.state[q] = VarState::Basic;
        self.pivots_since_refactor += 1;
        if self.pivots_since_refactor >= REFACTOR_EVERY && self.refactor().is_err() {
            // Keep the product-form inverse; the next solve re-checks.
            self.pivots_since_refactor = 0;
        }
    }

    fn out_of_time(&self) -> bool {
        self.iterations >= self.max_iterations || self.deadline.is_some_and(|d| Instant::now() >= d)
    }

    fn update_obj_scale(&mut self) {
        let cmax = self.obj.iter().fold(0.0f64, |a, c| a.max(c.abs()));
        self.obj_scale = if cmax > 0.0 { 1.0 / cmax } else { 1.0 };
    }

    /// Primal simplex from the current basis; runs phase one first when
    /// artificials are still positive.
    pub fn solve(&mut self) -> LpStatus {
        self.update_obj_scale();
        if self.pivots_since_refactor > 0 && self.refactor().is_err() {
            self.reset_basis();
        }
        let needs_phase_one = (self.m..2 * self.m).any(|j| self.upper[j] > 0.0);
        if needs_phase_one {
            match self.primal(Phase::One) {
                LpStatus::Optimal => {}
                other => return other,
            }
            let infeas: f64 = (self.m..2 * self.m).map(|j| self.value(j)).sum();
            if infeas > FEAS_TOL * self.m.max(1) as f64 {
                return LpStatus::Infeasible;
            }
            for j in self.m..2 * self.m {
                self.upper[j] = 0.0;
                if self.state[j] != VarState::Basic {
                    self.state[j] = VarState::AtLower;
                }
            }
            self.recompute_xb();
        }
        if !self.primal_feasible() {
            // Drifted: restart from scratch.
            self.reset_basis();
            return self.solve_cold();
        }
        self.primal(Phase::Two)
    }

    fn solve_cold(&mut self) -> LpStatus {
        if (self.m..2 * self.m).any(|j| self.upper[j] > 0.0) {
            match self.primal(Phase::One) {
                LpStatus::Optimal => {}
                other => return other,
            }
            let infeas: f64 = (self.m..2 * self.m).map(|j| self.value(j)).sum();
            if infeas > FEAS_TOL * self.m.max(1) as f64 {
                return LpStatus::Infeasible;
            }
            for j in self.m..2 * self.m {
                self.upper[j] = 0.0;
            }
            self.recompute_xb();
        }
        self.primal(Phase::Two)
    }

    fn primal_feasible(&self) -> bool {
        self.basis.iter().zip(&self.xb).all(|(&j, &x)| {
            x >= self.lower[j] - 1e-7 && x <= self.upper[j] + 1e-7
        })
    }

    fn primal(&mut self, phase: Phase) -> LpStatus {
        let mut degenerate = 0usize;
        loop {
            if self.out_of_time() {
                return LpStatus::IterationLimit;
            }
            let y = self.duals_for(phase);
            let bland = degenerate > DEGENERATE_STREAK;
            let mut entering: Option<(usize, f64)> = None;
            for j in 0..self.var_count() {
                let st = self.state[j];
                if st == VarState::Basic || self.upper[j] - self.lower[j] <= 0.0 {
                    continue;
                }
                let d = self.reduced_cost(j, &y, phase);
                let eligible = (st == VarState::AtLower && d > OPT_TOL) || (st == VarState::AtUpper && d < -OPT_TOL);
                if !eligible {
                    continue;
                }
                if bland {
                    entering = Some((j, d));
                    break;
                }
                if entering.is_none_or(|(_, best)| d.abs() > best.abs()) {
                    entering = Some((j, d));
                }
            }
            let Some((q, d)) = entering else {
                return LpStatus::Optimal;
            };
            self.iterations += 1;
            let dir = if d > 0.0 { 1.0 } else { -1.0 };
            let alpha = self.binv_column(q);

            // Harris two-pass ratio test.
            let mut bound = f64::INFINITY;
            for (i, &a) in alpha.iter().enumerate() {
                let da = dir * a;
                let j = self.basis[i];
                if da > PIVOT_TOL {
                    bound = bound.min((self.xb[i] - self.lower[j] + FEAS_TOL) / da);
                } else if da < -PIVOT_TOL && self.upper[j].is_finite() {
                    bound = bound.min((self.upper[j] - self.xb[i] + FEAS_TOL) / -da);
                }
            }
            let flip = self.upper[q] - self.lower[q];
            if bound.is_infinite() && flip.is_infinite() {
                return LpStatus::Unbounded;
            }
            let mut leave: Option<(usize, f64, bool)> = None;
            let mut best_alpha = 0.0;
            for (i, &a) in alpha.iter().enumerate() {
                let da = dir * a;
                let j = self.basis[i];
                let (ratio, to_upper) = if da > PIVOT_TOL {
                    ((self.xb[i] - self.lower[j]) / da, false)
                } else if da < -PIVOT_TOL && self.upper[j].is_finite() {
                    ((self.upper[j] - self.xb[i]) / -da, true)
                } else {
                    continue;
                };
                if ratio > bound {
                    continue;
                }
                let better = if bland {
                    leave.is_none_or(|(r, _, _)| j < self.basis[r])
                } else {
                    da.abs() > best_alpha
                };
                if better {
                    best_alpha = da.abs();
                    leave = Some((i, ratio.max(0.0), to_upper));
                }
            }

            let flips = flip.is_finite() && leave.is_none_or(|(_, theta, _)| flip <= theta);
            if flips {
                for (x, &a) in self.xb.iter_mut().zip(&alpha) {
                    *x -= dir * a * flip;
                }
                self.state[q] = if dir > 0.0 { VarState::AtUpper } else { VarState::AtLower };
                degenerate = 0;
                continue;
            }
            let Some((r, theta, to_upper)) = leave else {
                return LpStatus::Unbounded;
            };
            let entering_value = self.value(q) + dir * theta;
            for (x, &a) in self.xb.iter_mut().zip(&alpha) {
                *x -= dir * a * theta;
            }
            let leaving = self.basis[r];
            self.state[leaving] = if to_upper { VarState::AtUpper } else { VarState::AtLower };
            self.xb[r] = entering_value;
            self.pivot(r, q, &alpha);
            if theta < 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
        }
    }

    /// Sets structural bounds, keeping nonbasic variables on a bound that
    /// preserves dual feasibility, and recomputes basic values.
    pub(crate) fn set_structural_bounds(&mut self, bounds: &[(f64, f64)]) {
        let y = self.duals_for(Phase::Two);
        let off = 2 * self.m;
        for (k, &(lo, hi)) in bounds.iter().enumerate() {
            let j = off + k;
            self.lower[j] = lo;
            self.upper[j] = hi;
            if self.state[j] == VarState::Basic {
                continue;
            }
            let d = self.reduced_cost(j, &y, Phase::Two);
            self.state[j] = if d > 0.0 && hi.is_finite() {
                VarState::AtUpper
            } else {
                VarState::AtLower
            };
        }
        self.recompute_xb();
    }

    fn structural_values(&self) -> Vec<f64> {
        let off = 2 * self.m;
        let mut x: Vec<f64> = (0..self.cols.len())
            .map(|k| match self.state[off + k] {
                VarState::AtLower => self.lower[off + k],
                VarState::AtUpper => self.upper[off + k],
                VarState::Basic => 0.0,
            })
            .collect();
        for (r, &j) in self.basis.iter().enumerate() {
            if j >= off {
                x[j - off] = self.xb[r];
            }
        }
        x
    }

    /// Current objective in original units, computed from basic values.
    pub(crate) fn current_objective(&self) -> f64 {
        let x = self.structural_values();
        self.obj.iter().zip(&x).map(|(c, v)| c * v).sum()
    }

    pub(crate) fn structural_solution(&self) -> Vec<f64> {
        self.structural_values()
    }

    /// Dual simplex from a dual-feasible basis. Stops early when the
    /// objective drops to `cutoff` or below.
    pub(crate) fn dual(&mut self, cutoff: Option<f64>) -> DualOutcome {
        self.update_obj_scale();
        loop {
            if self.out_of_time() {
                return DualOutcome::Stalled;
            }
            if let Some(c) = cutoff {
                if self.current_objective() <= c {
                    return DualOutcome::Cutoff;
                }
            }
            let mut leave: Option<(usize, f64)> = None;
            for (i, &j) in self.basis.iter().enumerate() {
                let x = self.xb[i];
                let viol = if x < self.lower[j] - FEAS_TOL {
                    self.lower[j] - x
                } else if x > self.upper[j] + FEAS_TOL {
                    x - self.upper[j]
                } else {
                    continue;
                };
                if leave.is_none_or(|(_, v)| viol > v) {
                    leave = Some((i, viol));
                }
            }
            let Some((r, _)) = leave else {
                return DualOutcome::Optimal;
            };
            self.iterations += 1;
            let lj = self.basis[r];
            let below = self.xb[r] < self.lower[lj];
            let target = if below { self.lower[lj] } else { self.upper[lj] };
            let m = self.m;
            let rho: Vec<f64> = self.binv[r * m..(r + 1) * m].to_vec();
            let y = self.duals_for(Phase::Two);

            let mut entering: Option<(usize, f64, f64)> = None;
            for j in 0..self.var_count() {
                let st = self.state[j];
                if st == VarState::Basic || self.upper[j] - self.lower[j] <= 0.0 {
                    continue;
                }
                let arj = self.column(j).dot(&rho);
                let ok = match (below, st) {
                    (true, VarState::AtLower) => arj < -PIVOT_TOL,
                    (true, VarState::AtUpper) => arj > PIVOT_TOL,
                    (false, VarState::AtLower) => arj > PIVOT_TOL,
                    (false, VarState::AtUpper) => arj < -PIVOT_TOL,
                    _ => false,
                };
                if !ok {
                    continue;
                }
                let d = self.reduced_cost(j, &y, Phase::Two);
                let ratio = d.abs() / arj.abs();
                let better = match entering {
                    None => true,
                    Some((_, best, best_a)) => {
                        ratio < best - 1e-12 || (ratio <= best + 1e-12 && arj.abs() > best_a)
                    }
                };
                if better {
                    entering = Some((j, ratio, arj.abs()));
                }
            }
            let Some((q, _, _)) = entering else {
                return DualOutcome::Infeasible;
            };
            let alpha = self.binv_column(q);
            let delta = (self.xb[r] - target) / alpha[r];
            let entering_value = self.value(q) + delta;
            for (x, &a) in self.xb.iter_mut().zip(&alpha) {
                *x -= a * delta;
            }
            self.state[lj] = if below { VarState::AtLower } else { VarState::AtUpper };
            self.xb[r] = entering_value;
            self.pivot(r, q, &alpha);
        }
    }

    /// Finishes with primal simplex after a dual run, cleaning up small
    /// reduced-cost violations.
    pub(crate) fn polish(&mut self) -> LpStatus {
        if !self.primal_feasible() {
            return LpStatus::Infeasible;
        }
        self.primal(Phase::Two)
    }

    pub fn solution(&mut self, lp: &LinearProgram, status: LpStatus) -> LpSolution {
        let n = self.cols.len();
        if status != LpStatus::Optimal {
            return LpSolution {
                status,
                x: vec![0.0; n],
                duals: vec![0.0; self.m],
                reduced_costs: vec![0.0; n],
                objective: 0.0,
                iterations: self.iterations,
            };
        }
        if self.m <= 300 && self.pivots_since_refactor > 0 {
            let _ = self.refactor();
        }
        let x = self.structural_values();
        let y = self.duals_for(Phase::Two);
        let duals: Vec<f64> = y
            .iter()
            .zip(&self.row_scale)
            .map(|(yi, s)| yi * s / self.obj_scale)
            .collect();
        let reduced_costs = (0..n)
            .map(|k| self.reduced_cost(2 * self.m + k, &y, Phase::Two) / self.obj_scale)
            .collect();
        LpSolution {
            status,
            objective: lp.objective_value(&x),
            x,
            duals,
            reduced_costs,
            iterations: self.iterations,
        }
    }
}

enum ColumnRef<'a> {
    Unit(usize, f64),
    Sparse(&'a [(usize, f64)]),
}

impl ColumnRef<'_> {
    fn dot(&self, y: &[f64]) -> f64 {
        match self {
            ColumnRef::Unit(k, s) => s * y[*k],
            ColumnRef::Sparse(e) => e.iter().map(|&(k, a)| a * y[k]).sum(),
        }
    }

    fn axpy(&self, f: f64, out: &mut [f64]) {
        match self {
            ColumnRef::Unit(k, s) => out[*k] += f * s,
            ColumnRef::Sparse(e) => {
                for &(k, a) in e.iter() {
                    out[k] += f * a;
                }
            }
        }
    }
}

fn identity(m: usize) -> Vec<f64> {
    let mut v = vec![0.0; m * m];
    for i in 0..m {
        v[i * m + i] = 1.0;
    }
    v
}
