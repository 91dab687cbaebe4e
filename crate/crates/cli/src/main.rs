use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use dldn::admission::{admit, CgOptions, Termination};
use dldn::experiment::{run_sweep, SweepManifest};
use dldn::gen::{generate_flows, generate_topology, GenSpec};
use dldn::io::{
    flows_from_records, read_json, write_iterations, write_json, write_stats, write_trace, FlowsFile, InstanceFile,
    SolutionFile, TrafficFile,
};
use dldn::model::{us_to_ns, FlowSpec, Network};
use dldn::ospf::{ospf_admit, throughput_gap, OspfConfig};
use dldn::scenario;
use dldn::sim::{check_invariants, run_simulation, SimConfig, SimError, SimFlow, TrafficModel};

const EXIT_INPUT: u8 = 2;
const EXIT_NO_INCUMBENT: u8 = 3;
const EXIT_VIOLATION: u8 = 4;

#[derive(Parser)]
#[command(name = "dldn", version, about = "Damper-based deterministic networking: admission control and simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random topology and flow set.
    Generate(GenerateArgs),
    /// Decide which flows to admit and on which path and pattern.
    Admit(AdmitArgs),
    /// Run admitted flows through the data-plane simulator.
    Simulate(SimulateArgs),
    /// Sweep CGX against OSPF over a grid of instances.
    Compare(CompareArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// JSON generator spec; flags given alongside override its fields.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, required_unless_present = "spec")]
    nodes: Option<u32>,
    #[arg(long, required_unless_present = "spec")]
    links: Option<u32>,
    #[arg(long, required_unless_present = "spec")]
    level: Option<u32>,
    #[arg(long, required_unless_present = "spec")]
    flows: Option<u32>,
    #[arg(long, required_unless_present = "spec")]
    deadline_us: Option<f64>,
    #[arg(long)]
    max_prop_us: Option<f64>,
    #[arg(long)]
    burst_bytes: Option<u64>,
    #[arg(long)]
    throughput_min_mbps: Option<u64>,
    #[arg(long)]
    throughput_max_mbps: Option<u64>,
    #[arg(long)]
    queues: Option<u32>,
    #[arg(long, env = "DLDN_SEED")]
    seed: Option<u64>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Algorithm {
    Cgx,
    Ospf,
}

#[derive(Args)]
struct AdmitArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Flow file; defaults to the flows embedded in the instance file.
    #[arg(long)]
    flows: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "cgx")]
    algorithm: Algorithm,
    #[arg(long, default_value_t = 300.0)]
    time_limit_s: f64,
    #[arg(long, default_value_t = 20_000)]
    node_limit: usize,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Use a bundled scenario instead of input files.
    #[arg(long, value_parser = ["sec5a"], conflicts_with_all = ["instance", "solution"])]
    bundle: Option<String>,
    #[arg(long, required_unless_present = "bundle")]
    instance: Option<PathBuf>,
    #[arg(long)]
    flows: Option<PathBuf>,
    #[arg(long, required_unless_present = "bundle")]
    solution: Option<PathBuf>,
    #[arg(long)]
    traffic: Option<PathBuf>,
    #[arg(long)]
    horizon_us: Option<f64>,
    #[arg(long, env = "DLDN_SEED", default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    drift_ppm: f64,
    /// Skip writing the per-hop trace.
    #[arg(long)]
    no_trace: bool,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    /// JSON sweep manifest; flags given alongside override its fields.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<u32>>,
    #[arg(long, value_delimiter = ',')]
    deadlines_us: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    flow_counts: Option<Vec<u32>>,
    #[arg(long)]
    nodes: Option<u32>,
    #[arg(long)]
    links: Option<u32>,
    #[arg(long)]
    time_limit_s: Option<f64>,
    #[arg(long)]
    node_limit: Option<usize>,
    #[arg(long, env = "DLDN_SEED")]
    seed: Option<u64>,
    /// Run rows one after another.
    #[arg(long)]
    sequential: bool,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure {
            code: EXIT_INPUT,
            error: e.into(),
        }
    }
}

fn fail(code: u8, error: anyhow::Error) -> Failure {
    Failure { code, error }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("error")).init();
    let cli = Cli::parse();
    let r = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Admit(a) => admit_cmd(a),
        Command::Simulate(a) => simulate(a),
        Command::Compare(a) => compare(a),
    };
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn out_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(())
}

fn generate(a: GenerateArgs) -> Outcome {
    let mut spec: GenSpec = match &a.spec {
        Some(p) => read_json(p)?,
        None => GenSpec::default(),
    };
    macro_rules! set {
        ($($f:ident),*) => { $( if let Some(v) = a.$f { spec.$f = v; } )* };
    }
    set!(nodes, links, level, flows, deadline_us, max_prop_us, burst_bytes, throughput_min_mbps, throughput_max_mbps, queues, seed);
    let instance = generate_topology(&spec)?;
    let net = Network::new(instance.clone())?;
    let flows = generate_flows(&spec, &net)?;
    out_dir(&a.out_dir)?;
    let ip = a.out_dir.join("instance.json");
    let fp = a.out_dir.join("flows.json");
    write_json(&ip, &InstanceFile::new(&instance, &[]))?;
    write_json(&fp, &FlowsFile::new(&flows))?;
    println!(
        "{} nodes, {} arcs, {} flows -> {}, {}",
        instance.nodes.len(),
        instance.arcs.len(),
        flows.len(),
        ip.display(),
        fp.display()
    );
    Ok(())
}

fn load(instance: &Path, flows: Option<&Path>) -> Result<(Network, Vec<FlowSpec>), Failure> {
    let file: InstanceFile = read_json(instance)?;
    let net = Network::new(file.network()?)?;
    let records = match flows {
        Some(p) => read_json::<FlowsFile>(p)?.flows,
        None => file.flows,
    };
    let flows = flows_from_records(&net, &records)?;
    Ok((net, flows))
}

fn fmt_bps(x: f64) -> String {
    format!("{:.3} Gb/s", x / 1e9)
}

fn admit_cmd(a: AdmitArgs) -> Outcome {
    if a.time_limit_s.is_nan() || a.time_limit_s <= 0.0 {
        return Err(anyhow!("time limit must be positive").into());
    }
    let (net, flows) = load(&a.instance, a.flows.as_deref())?;
    out_dir(&a.out_dir)?;
    let sp = a.out_dir.join("solution.json");
    match a.algorithm {
        Algorithm::Ospf => {
            let sol = ospf_admit(&net, &flows, &OspfConfig::default());
            let th = sol.throughput_bps(&flows);
            write_json(&sp, &SolutionFile::new(&net, &flows, &sol, "ospf", None, None))?;
            println!("accepted {}/{} flows, Th {}", sol.accepted_count(), flows.len(), fmt_bps(th as f64));
        }
        Algorithm::Cgx => {
            let opts = CgOptions {
                time_limit: Duration::from_secs_f64(a.time_limit_s),
                node_limit: a.node_limit,
                ..CgOptions::default()
            };
            let res = admit(&net, &flows, &opts);
            let r = &res.report;
            let th = res.solution.throughput_bps(&flows);
            write_json(
                &sp,
                &SolutionFile::new(&net, &flows, &res.solution, "cgx", Some(r.ub), Some(r.gap_percent)),
            )?;
            write_iterations(&a.out_dir.join("iterations.csv"), &res.cg.log)?;
            let ospf = res.baseline.throughput_bps(&flows);
            println!(
                "accepted {}/{} flows, Th {}, UB {}, gap {:.3}%",
                res.solution.accepted_count(),
                flows.len(),
                fmt_bps(th as f64),
                fmt_bps(r.ub),
                r.gap_percent
            );
            match throughput_gap(th, ospf) {
                Some(g) => println!("OSPF Th {}, Th(CGX)/Th(OSPF) {:.3}%", fmt_bps(ospf as f64), g),
                None => println!("OSPF Th 0"),
            }
            println!(
                "{} CG iterations ({:?}), {} columns, {} B&B nodes",
                r.iterations, r.termination, r.pool_size, r.bnb_nodes
            );
            if r.termination == Termination::TimeLimit && th == 0 && !flows.is_empty() {
                return Err(fail(
                    EXIT_NO_INCUMBENT,
                    anyhow!("time limit reached without an admitting solution"),
                ));
            }
        }
    }
    Ok(())
}

fn simulate(a: SimulateArgs) -> Outcome {
    out_dir(&a.out_dir)?;
    let (net, flows, solution, traffic, horizon) = match &a.bundle {
        Some(_) => {
            let b = scenario::sec5a();
            let net = Network::new(b.instance.clone())?;
            write_json(&a.out_dir.join("instance.json"), &InstanceFile::new(&b.instance, &b.flows))?;
            write_json(
                &a.out_dir.join("solution.json"),
                &SolutionFile::new(&net, &b.flows, &b.solution, "bundle", None, None),
            )?;
            write_json(&a.out_dir.join("traffic.json"), &TrafficFile::new(&b.traffic))?;
            (net, b.flows, b.solution, b.traffic, b.horizon_ns)
        }
        None => {
            let (net, flows) = load(a.instance.as_deref().unwrap(), a.flows.as_deref())?;
            let file: SolutionFile = read_json(a.solution.as_deref().unwrap())?;
            let solution = file.solution(&net, &flows)?;
            let traffic = match &a.traffic {
                Some(p) => read_json::<TrafficFile>(p)?.traffic()?,
                None => TrafficModel::default(),
            };
            (net, flows, solution, traffic, scenario::HORIZON_NS)
        }
    };
    let horizon = match a.horizon_us {
        Some(us) => us_to_ns(us)?,
        None => horizon,
    };
    if horizon <= 0 {
        return Err(anyhow!("horizon must be positive").into());
    }
    let sim_flows = SimFlow::from_solution(&net, &flows, &solution)?;
    let cfg = SimConfig {
        drift_ppm: a.drift_ppm,
        ..SimConfig::new(horizon, a.seed)
    };
    let res = match run_simulation(&net, &sim_flows, &traffic, &cfg) {
        Ok(r) => r,
        Err(e @ SimError::QueuingBound { .. }) => return Err(fail(EXIT_VIOLATION, e.into())),
        Err(e) => return Err(e.into()),
    };
    for w in &res.warnings {
        eprintln!("warning: {w}");
    }
    if !a.no_trace {
        write_trace(&a.out_dir.join("trace.csv"), &res.trace)?;
    }
    write_stats(&a.out_dir.join("stats.csv"), &res.stats)?;
    let report = check_invariants(&net, &sim_flows, &res.trace);
    println!(
        "{} high-priority packets delivered of {}, {} best-effort delivered, {} dropped",
        res.hp_delivered, res.hp_generated, res.be_delivered, res.be_dropped
    );
    for s in &res.stats {
        println!(
            "flow {}: {} packets, e2e {}..{} ns, jitter {} ns (bound {} ns) {}",
            s.flow,
            s.packets,
            s.min_e2e_ns,
            s.max_e2e_ns,
            s.jitter_ns,
            s.bound_ns,
            if s.ok { "ok" } else { "FAIL" }
        );
    }
    println!(
        "{} damper pairs and {} same-cycle pairs checked, {} violations, {} faults",
        report.pairs_checked,
        report.gap_pairs_checked,
        report.violations.len(),
        res.faults.len()
    );
    for v in report.violations.iter().take(10) {
        eprintln!("violation: {v:?}");
    }
    if !report.is_clean() || !res.faults.is_empty() || res.stats.iter().any(|s| !s.ok) {
        return Err(fail(EXIT_VIOLATION, anyhow!("delay or jitter bound violated")));
    }
    Ok(())
}

fn compare(a: CompareArgs) -> Outcome {
    let mut m: SweepManifest = match &a.manifest {
        Some(p) => read_json(p)?,
        None => SweepManifest::default(),
    };
    if let Some(v) = a.levels {
        m.levels = v;
    }
    if let Some(v) = a.deadlines_us {
        m.deadlines_us = v;
    }
    if let Some(v) = a.flow_counts {
        m.flow_counts = v;
    }
    if let Some(v) = a.nodes {
        m.generator.nodes = v;
    }
    if let Some(v) = a.links {
        m.generator.links = v;
    }
    if let Some(v) = a.time_limit_s {
        m.time_limit_s = v;
    }
    if let Some(v) = a.node_limit {
        m.node_limit = v;
    }
    if let Some(v) = a.seed {
        m.generator.seed = v;
    }
    if a.sequential {
        m.parallel = false;
    }
    m.check().map_err(|e| anyhow!(e))?;
    out_dir(&a.out_dir)?;
    let r = run_sweep(&m);
    let rp = a.out_dir.join("results.csv");
    r.write(&rp, &a.out_dir.join("timing.csv"))?;
    println!("{} rows, {} failures -> {}", r.rows.len(), r.failures(), rp.display());
    Ok(())
}
