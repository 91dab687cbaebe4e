//! Comparison sweeps: CGX against the OSPF baseline over a grid of
//! capacity levels, deadlines and flow counts.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::admission::{admit, CgOptions};
use crate::gen::{generate_flows, generate_topology, GenSpec};
use crate::io::{write_csv, IoError};
use crate::model::Network;
use crate::ospf::throughput_gap;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepManifest {
    /// Topology and demand parameters; the axes below override `level`,
    /// `deadline_us` and `flows`.
    pub generator: GenSpec,
    pub levels: Vec<u32>,
    pub deadlines_us: Vec<f64>,
    pub flow_counts: Vec<u32>,
    /// Admission budget per row.
    pub time_limit_s: f64,
    pub node_limit: usize,
    /// Run rows concurrently.
    pub parallel: bool,
}

impl Default for SweepManifest {
    fn default() -> Self {
        SweepManifest {
            generator: GenSpec::default(),
            levels: vec![10],
            deadlines_us: vec![100.0, 250.0, 500.0, 750.0, 1000.0],
            flow_counts: vec![50, 100, 200, 350, 500],
            time_limit_s: 300.0,
            node_limit: 20_000,
            parallel: true,
        }
    }
}

impl SweepManifest {
    pub fn check(&self) -> Result<(), String> {
        if self.levels.is_empty() || self.deadlines_us.is_empty() || self.flow_counts.is_empty() {
            return Err("every sweep axis needs at least one value".into());
        }
        if self.time_limit_s.is_nan() || self.time_limit_s <= 0.0 {
            return Err("time limit must be positive".into());
        }
        for &level in &self.levels {
            GenSpec {
                level,
                ..self.generator.clone()
            }
            .check()
            .map_err(|e| e.to_string())?;
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<SweepPoint> {
        let mut out = Vec::new();
        for &level in &self.levels {
            for &deadline_us in &self.deadlines_us {
                for &flows in &self.flow_counts {
                    out.push(SweepPoint {
                        level,
                        deadline_us,
                        flows,
                    });
                }
            }
        }
        out
    }

    fn options(&self) -> CgOptions {
        CgOptions {
            time_limit: Duration::from_secs_f64(self.time_limit_s),
            node_limit: self.node_limit,
            ..CgOptions::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepPoint {
    pub level: u32,
    pub deadline_us: f64,
    pub flows: u32,
}

/// One row of the results table. Empty metric cells mean the row failed or
/// the metric is undefined.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub level: u32,
    pub deadline_us: f64,
    pub flows: u32,
    pub accepted_cgx: Option<usize>,
    pub accepted_ospf: Option<usize>,
    pub th_cgx_bps: Option<u64>,
    pub th_ospf_bps: Option<u64>,
    pub ub_bps: Option<String>,
    /// `Th(CGX) / Th(OSPF) * 100`.
    pub gap_percent: Option<String>,
    /// `(UB - Z) / UB * 100`.
    pub opt_gap_percent: Option<String>,
    pub certified: Option<bool>,
    pub cg_iterations: Option<usize>,
    pub failures: u32,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimingRow {
    pub level: u32,
    pub deadline_us: f64,
    pub flows: u32,
    pub wall_ms: u64,
}

/// Numeric results of a row, kept alongside the formatted table.
#[derive(Clone, Debug, PartialEq)]
pub struct RowOutcome {
    pub th_cgx: u64,
    pub th_ospf: u64,
    pub ub: f64,
    pub z: f64,
    pub opt_gap: f64,
    pub gap: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub outcomes: Vec<Option<RowOutcome>>,
    pub timing: Vec<TimingRow>,
}

impl SweepResult {
    pub fn failures(&self) -> u32 {
        self.rows.iter().map(|r| r.failures).sum()
    }

    pub fn write(&self, results: &Path, timing: &Path) -> Result<(), IoError> {
        write_csv(
            results,
            &[
                "level",
                "deadline_us",
                "flows",
                "accepted_cgx",
                "accepted_ospf",
                "Th_cgx_bps",
                "Th_ospf_bps",
                "UB_bps",
                "gap_percent",
                "opt_gap_percent",
                "certified",
                "cg_iterations",
                "failures",
                "error",
            ],
            &self.rows,
        )?;
        write_csv(timing, &["level", "deadline_us", "flows", "wall_ms"], &self.timing)
    }
}

fn f3(x: f64) -> String {
    format!("{:.3}", x + 0.0)
}

fn run_point(m: &SweepManifest, p: SweepPoint) -> Result<(SweepRow, RowOutcome), String> {
    let spec = GenSpec {
        level: p.level,
        deadline_us: p.deadline_us,
        flows: p.flows,
        ..m.generator.clone()
    };
    let net = Network::new(generate_topology(&spec).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let flows = generate_flows(&spec, &net).map_err(|e| e.to_string())?;
    let res = admit(&net, &flows, &m.options());
    res.solution.verify(&net, &flows)?;
    res.baseline.verify(&net, &flows)?;
    let th_cgx = res.solution.throughput_bps(&flows);
    let th_ospf = res.baseline.throughput_bps(&flows);
    let gap = throughput_gap(th_cgx, th_ospf);
    let out = RowOutcome {
        th_cgx,
        th_ospf,
        ub: res.report.ub,
        z: res.report.z,
        opt_gap: res.report.gap_percent,
        gap,
    };
    let row = SweepRow {
        level: p.level,
        deadline_us: p.deadline_us,
        flows: p.flows,
        accepted_cgx: Some(res.solution.accepted_count()),
        accepted_ospf: Some(res.baseline.accepted_count()),
        th_cgx_bps: Some(th_cgx),
        th_ospf_bps: Some(th_ospf),
        ub_bps: Some(f3(out.ub)),
        gap_percent: gap.map(f3),
        opt_gap_percent: Some(f3(out.opt_gap)),
        certified: Some(res.report.certified),
        cg_iterations: Some(res.report.iterations),
        failures: 0,
        error: String::new(),
    };
    Ok((row, out))
}

fn failed_row(p: SweepPoint, error: String) -> SweepRow {
    SweepRow {
        level: p.level,
        deadline_us: p.deadline_us,
        flows: p.flows,
        accepted_cgx: None,
        accepted_ospf: None,
        th_cgx_bps: None,
        th_ospf_bps: None,
        ub_bps: None,
        gap_percent: None,
        opt_gap_percent: None,
        certified: None,
        cg_iterations: None,
        failures: 1,
        error,
    }
}

/// Runs every grid point. A failing point yields a row with a failure
/// count instead of aborting the sweep.
pub fn run_sweep(m: &SweepManifest) -> SweepResult {
    let one = |p: SweepPoint| {
        let start = Instant::now();
        let r = catch_unwind(AssertUnwindSafe(|| run_point(m, p))).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(msg)
        });
        let wall_ms = start.elapsed().as_millis() as u64;
        info!("level {} deadline {} us flows {}: {wall_ms} ms", p.level, p.deadline_us, p.flows);
        let timing = TimingRow {
            level: p.level,
            deadline_us: p.deadline_us,
            flows: p.flows,
            wall_ms,
        };
        match r {
            Ok((row, out)) => (row, Some(out), timing),
            Err(e) => (failed_row(p, e), None, timing),
        }
    };
    let points = m.points();
    let results: Vec<_> = if m.parallel {
        points.into_par_iter().map(one).collect()
    } else {
        points.into_iter().map(one).collect()
    };
    let mut out = SweepResult {
        rows: Vec::new(),
        outcomes: Vec::new(),
        timing: Vec::new(),
    };
    for (row, o, t) in results {
        out.rows.push(row);
        out.outcomes.push(o);
        out.timing.push(t);
    }
    out
}
