//! Linear programming core used by column generation: a bounded-variable
//! revised simplex that reports exact dual values, and a branch-and-bound
//! solver for 0-1 column pools.
//!
//! Problems are stated as `max c.x  s.t.  A x <= b,  0 <= x <= u`.

mod bnb;
mod mps;
mod simplex;

use std::time::Duration;

pub use bnb::solve_ip_exact;
pub use mps::to_mps;
pub use simplex::Simplex;

/// Primal feasibility tolerance on original-unit row residuals.
pub const EPS_FEAS: f64 = 1e-7;
/// Relative strong-duality tolerance.
pub const EPS_GAP: f64 = 1e-6;
/// Complementary-slackness tolerance.
pub const EPS_CS: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct LpRow {
    pub label: String,
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpColumn {
    pub label: String,
    pub objective: f64,
    /// Sparse (row, coefficient) entries.
    pub entries: Vec<(usize, f64)>,
    /// Upper bound; `None` means unbounded above. A binary column does not
    /// get an implicit `x <= 1` in the relaxation.
    pub upper: Option<f64>,
    pub binary: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearProgram {
    pub rows: Vec<LpRow>,
    pub columns: Vec<LpColumn>,
}

impl LinearProgram {
    pub fn add_row(&mut self, label: impl Into<String>, rhs: f64) -> usize {
        self.rows.push(LpRow {
            label: label.into(),
            rhs,
        });
        self.rows.len() - 1
    }

    pub fn add_column(&mut self, column: LpColumn) -> usize {
        self.columns.push(column);
        self.columns.len() - 1
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_columns(&self) -> usize {
        self.columns.len()
    }

    /// Row activities `A x`.
    pub fn activities(&self, x: &[f64]) -> Vec<f64> {
        let mut act = vec![0.0; self.rows.len()];
        for (col, &xj) in self.columns.iter().zip(x) {
            if xj != 0.0 {
                for &(i, a) in &col.entries {
                    act[i] += a * xj;
                }
            }
        }
        act
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.columns.iter().zip(x).map(|(c, &v)| c.objective * v).sum()
    }

    /// Largest violation of rows and bounds by `x`, in original units.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self
            .activities(x)
            .iter()
            .zip(&self.rows)
            .map(|(a, r)| (a - r.rhs).max(0.0))
            .fold(0.0, f64::max);
        let bounds = self
            .columns
            .iter()
            .zip(x)
            .map(|(c, &v)| (-v).max(c.upper.map_or(0.0, |u| v - u)).max(0.0))
            .fold(0.0, f64::max);
        rows.max(bounds)
    }

    pub(crate) fn check(&self) -> Result<(), String> {
        for (i, r) in self.rows.iter().enumerate() {
            if !r.rhs.is_finite() {
                return Err(format!("row {i} has non-finite rhs"));
            }
        }
        for (j, c) in self.columns.iter().enumerate() {
            if !c.objective.is_finite() || c.upper.is_some_and(|u| !u.is_finite() || u < 0.0) {
                return Err(format!("column {j} has bad objective or bound"));
            }
            for &(i, a) in &c.entries {
                if i >= self.rows.len() || !a.is_finite() {
                    return Err(format!("column {j} has bad entry ({i}, {a})"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    /// One dual value per row; nonnegative at optimality.
    pub duals: Vec<f64>,
    /// `c_j - y.A_j` per column.
    pub reduced_costs: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

impl LpSolution {
    /// `b.y + sum_j u_j max(0, d_j)`; equals the primal objective at
    /// optimality. Without finite upper bounds it reduces to `b.y`.
    pub fn dual_objective(&self, lp: &LinearProgram) -> f64 {
        let rows: f64 = lp.rows.iter().zip(&self.duals).map(|(r, y)| r.rhs * y).sum();
        let bounds: f64 = lp
            .columns
            .iter()
            .zip(&self.reduced_costs)
            .filter_map(|(c, &d)| c.upper.map(|u| u * d.max(0.0)))
            .sum();
        rows + bounds
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IpStatus {
    Optimal,
    /// Stopped by the time or node limit; the incumbent is feasible.
    Limit,
    Infeasible,
}

#[derive(Clone, Debug)]
pub struct IpOptions {
    pub time_limit: Duration,
    pub node_limit: usize,
    /// A known feasible 0-1 assignment to start from.
    pub initial: Option<Vec<bool>>,
}

impl Default for IpOptions {
    fn default() -> Self {
        IpOptions {
            time_limit: Duration::from_secs(60),
            node_limit: 200_000,
            initial: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct IntegerSolveResult {
    pub status: IpStatus,
    pub incumbent: Vec<bool>,
    pub objective: f64,
    pub best_bound: f64,
    pub nodes: usize,
    /// Global bound sampled during the search; non-increasing.
    pub bound_trace: Vec<f64>,
}

/// Seam between the admission algorithm and an LP engine.
pub trait LpBackend {
    fn solve_lp(&mut self, lp: &LinearProgram) -> LpSolution;
    fn solve_ip(&mut self, lp: &LinearProgram, opts: &IpOptions) -> IntegerSolveResult;
}

/// The built-in simplex engine. When consecutive LPs only append columns to
/// the previous one, the last optimal basis is reused.
#[derive(Default)]
pub struct SimplexBackend {
    warm: Option<Simplex>,
    pub max_iterations: Option<usize>,
}

impl SimplexBackend {
    pub fn new() -> Self {
        Self::default()
    }
}

impl LpBackend for SimplexBackend {
    fn solve_lp(&mut self, lp: &LinearProgram) -> LpSolution {
        let reusable = self.warm.as_ref().is_some_and(|s| s.extends_to(lp));
        let mut simplex = match self.warm.take() {
            Some(mut s) if reusable => {
                for col in &lp.columns[s.num_structural()..] {
                    s.push_column(col, false);
                }
                s
            }
            _ => Simplex::from_lp(lp, false).expect("malformed linear program"),
        };
        if let Some(limit) = self.max_iterations {
            simplex.max_iterations = limit;
        }
        let status = simplex.solve();
        let sol = simplex.solution(lp, status);
        if status == LpStatus::Optimal {
            self.warm = Some(simplex);
        }
        sol
    }

    fn solve_ip(&mut self, lp: &LinearProgram, opts: &IpOptions) -> IntegerSolveResult {
        solve_ip_exact(lp, opts)
    }
}

/// Solves the relaxation from scratch.
pub fn solve_lp(lp: &LinearProgram) -> LpSolution {
    let mut s = Simplex::from_lp(lp, false).expect("malformed linear program");
    let status = s.solve();
    s.solution(lp, status)
}
