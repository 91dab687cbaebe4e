use std::collections::{BTreeMap, HashSet};

use log::warn;

use super::{Column, DualValues};
use crate::lp::{LinearProgram, LpColumn, LpSolution};
use crate::model::{FlowId, FlowSpec, Network};

/// The restricted master: routing rows, then arc rows, then node rows.
#[derive(Clone, Debug)]
pub struct Master {
    pub lp: LinearProgram,
    pub columns: Vec<Column>,
    flow_rows: BTreeMap<FlowId, usize>,
    arc_row0: usize,
    node_row0: usize,
    keys: HashSet<(FlowId, usize, Vec<usize>)>,
    binary: bool,
}

/// Builds the master LP over `flows` with the given columns. Duplicate
/// columns are dropped with a warning.
pub fn build_master(net: &Network, flows: &[FlowSpec], columns: &[Column]) -> Master {
    let mut lp = LinearProgram::default();
    let mut flow_rows = BTreeMap::new();
    for f in flows {
        flow_rows.insert(f.id, lp.add_row(format!("route[{}]", f.id), 1.0));
    }
    let arc_row0 = lp.num_rows();
    for a in 0..net.arc_count() {
        let arc = net.arc(a);
        lp.add_row(format!("arc[{}->{}]", arc.tail, arc.head), arc.capacity_bytes as f64);
    }
    let node_row0 = lp.num_rows();
    for v in 0..net.node_count() {
        let node = net.node(v);
        lp.add_row(format!("buffer[{}]", node.id), node.buffer_bytes as f64);
    }
    let mut master = Master {
        lp,
        columns: Vec::new(),
        flow_rows,
        arc_row0,
        node_row0,
        keys: HashSet::new(),
        binary: false,
    };
    for c in columns {
        if !master.push(c.clone()) {
            warn!("duplicate column for flow {} dropped", c.flow());
        }
    }
    master
}

impl Master {
    /// Appends a column; returns false for a duplicate or a flow without a
    /// routing row.
    pub fn push(&mut self, column: Column) -> bool {
        let Some(&route) = self.flow_rows.get(&column.flow()) else {
            return false;
        };
        if !self.keys.insert(column.key()) {
            return false;
        }
        let beta = column.beta() as f64;
        let mut entries = Vec::with_capacity(1 + column.path.arcs.len() + column.nodes.len());
        entries.push((route, 1.0));
        entries.extend(column.path.arcs.iter().map(|&a| (self.arc_row0 + a, beta)));
        entries.extend(column.nodes.iter().map(|&v| (self.node_row0 + v, beta)));
        self.lp.add_column(LpColumn {
            label: format!(
                "x[{},{:?},{}]",
                column.flow(),
                column.nodes,
                column.path.pattern
            ),
            objective: column.value,
            entries,
            upper: None,
            binary: self.binary,
        });
        self.columns.push(column);
        true
    }

    pub fn into_binary(mut self) -> Self {
        self.binary = true;
        for c in &mut self.lp.columns {
            c.binary = true;
        }
        self
    }

    pub fn flow_row(&self, flow: FlowId) -> Option<usize> {
        self.flow_rows.get(&flow).copied()
    }

    /// Splits LP duals by row family, clamping round-off below zero.
    pub fn duals(&self, sol: &LpSolution) -> DualValues {
        let y = |i: usize| sol.duals[i].max(0.0);
        DualValues {
            lambda: self.flow_rows.iter().map(|(&f, &i)| (f, y(i))).collect(),
            mu: (self.arc_row0..self.node_row0).map(y).collect(),
            omega: (self.node_row0..self.lp.num_rows()).map(y).collect(),
        }
    }
}
