use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dldn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dldn"))
        .args(args)
        .env_remove("DLDN_SEED")
        .output()
        .unwrap()
}

fn text(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned() + &String::from_utf8_lossy(&o.stderr)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const TOY: &str = r#"{
  "format": "dldn-instance/1",
  "cycle": {"T_us": 10, "HC": 8, "N": 3},
  "nodes": [
    {"id": 1, "Q_us": 20, "P_us": 1, "buffer_bytes": 1000000},
    {"id": 2, "Q_us": 20, "P_us": 1, "buffer_bytes": 1000000},
    {"id": 3, "Q_us": 20, "P_us": 1, "buffer_bytes": 1000000},
    {"id": 4, "Q_us": 20, "P_us": 1, "buffer_bytes": 1000000}
  ],
  "arcs": [
    {"tail": 1, "head": 2, "prop_us": 5, "capacity_bytes_per_cycle": 3000},
    {"tail": 2, "head": 4, "prop_us": 5, "capacity_bytes_per_cycle": 3000},
    {"tail": 1, "head": 3, "prop_us": 8, "capacity_bytes_per_cycle": 3000},
    {"tail": 3, "head": 4, "prop_us": 8, "capacity_bytes_per_cycle": 3000}
  ],
  "flows": [
    {"id": 1, "src": 1, "dst": 4, "rate_bps": 1000000000, "burst_bytes": 1500, "throughput_bps": 1000000000, "deadline_us": 500},
    {"id": 2, "src": 1, "dst": 4, "rate_bps": 1000000000, "burst_bytes": 1500, "throughput_bps": 1000000000, "deadline_us": 500}
  ]
}"#;

fn solution_th(path: &Path) -> u64 {
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    v["Th_bps"].as_u64().unwrap()
}

#[test]
fn generate_writes_two_files_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = dldn(&[
            "generate", "--nodes", "50", "--links", "106", "--level", "10", "--flows", "500", "--deadline-us", "1000",
            "--seed", "7", "--out-dir", p(out),
        ]);
        assert!(o.status.success(), "{}", text(&o));
    }
    for f in ["instance.json", "flows.json"] {
        let x = fs::read(a.join(f)).unwrap();
        assert_eq!(x, fs::read(b.join(f)).unwrap());
        let v: serde_json::Value = serde_json::from_slice(&x).unwrap();
        assert!(v["format"].as_str().unwrap().starts_with("dldn-"));
    }
    let flows: serde_json::Value = serde_json::from_slice(&fs::read(a.join("flows.json")).unwrap()).unwrap();
    assert_eq!(flows["flows"].as_array().unwrap().len(), 500);
}

#[test]
fn generate_seed_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let base = ["generate", "--nodes", "10", "--links", "15", "--level", "1", "--flows", "5", "--deadline-us", "500"];
    let run = |out: &Path, seed: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_dldn"));
        c.args(base).args(["--out-dir", p(out)]).env_remove("DLDN_SEED");
        if let Some(s) = seed {
            c.env("DLDN_SEED", s);
        }
        assert!(c.output().unwrap().status.success());
        fs::read(out.join("instance.json")).unwrap()
    };
    let d = dir.path();
    assert_eq!(run(&d.join("1"), None), run(&d.join("2"), Some("1")));
    assert_ne!(run(&d.join("3"), None), run(&d.join("4"), Some("99")));
}

#[test]
fn usage_errors_exit_2() {
    let o = dldn(&["generate", "--nodes", "50"]);
    assert_eq!(o.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let o = dldn(&[
        "generate", "--nodes", "10", "--links", "3", "--level", "1", "--flows", "1", "--deadline-us", "100",
        "--out-dir", p(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", text(&o));
    assert!(text(&o).contains("links"));
}

#[test]
fn zero_flows_gives_empty_flow_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = dldn(&[
        "generate", "--nodes", "5", "--links", "6", "--level", "2", "--flows", "0", "--deadline-us", "100",
        "--out-dir", p(dir.path()),
    ]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("flows.json")).unwrap()).unwrap();
    assert_eq!(v["flows"].as_array().unwrap().len(), 0);
    let o = dldn(&[
        "admit", "--instance", p(&dir.path().join("instance.json")), "--flows", p(&dir.path().join("flows.json")),
        "--out-dir", p(dir.path()),
    ]);
    assert!(o.status.success(), "{}", text(&o));
}

#[test]
fn admit_toy_instance() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("toy.json");
    fs::write(&inst, TOY).unwrap();
    let cgx = dir.path().join("cgx");
    let o = dldn(&["admit", "--instance", p(&inst), "--out-dir", p(&cgx)]);
    assert!(o.status.success(), "{}", text(&o));
    assert!(text(&o).contains("gap 0.000%"), "{}", text(&o));
    let csv = fs::read_to_string(cgx.join("iterations.csv")).unwrap();
    assert!(csv.starts_with("iter,columns_added,lp_obj,wall_ms\n"));

    let ospf = dir.path().join("ospf");
    let o = dldn(&["admit", "--instance", p(&inst), "--algorithm", "ospf", "--out-dir", p(&ospf)]);
    assert!(o.status.success(), "{}", text(&o));
    let th_ospf = solution_th(&ospf.join("solution.json"));
    let th_cgx = solution_th(&cgx.join("solution.json"));
    assert_eq!(th_cgx, 2_000_000_000);
    assert_eq!(th_ospf, 1_000_000_000);
    let v: serde_json::Value = serde_json::from_slice(&fs::read(ospf.join("solution.json")).unwrap()).unwrap();
    assert_eq!(v["algorithm"], "ospf");
    assert!(v["UB_bps"].is_null());
}

#[test]
fn simulate_bundle_passes_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = dldn(&["simulate", "--bundle", "sec5a", "--out-dir", p(out)]);
        assert!(o.status.success(), "{}", text(&o));
    }
    for f in ["trace.csv", "stats.csv", "instance.json", "solution.json", "traffic.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let stats = fs::read_to_string(a.join("stats.csv")).unwrap();
    let mut lines = stats.lines();
    assert_eq!(
        lines.next(),
        Some("flow,packets,min_e2e_ns,max_e2e_ns,mean_e2e_ns,jitter_ns,bound_ns,ok")
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r.ends_with(",true")));

    // The exported files replay to the same statistics.
    let c = dir.path().join("c");
    let o = dldn(&[
        "simulate",
        "--instance",
        p(&a.join("instance.json")),
        "--solution",
        p(&a.join("solution.json")),
        "--traffic",
        p(&a.join("traffic.json")),
        "--no-trace",
        "--out-dir",
        p(&c),
    ]);
    assert!(o.status.success(), "{}", text(&o));
    assert_eq!(fs::read(a.join("stats.csv")).unwrap(), fs::read(c.join("stats.csv")).unwrap());
}

#[test]
fn simulate_rejects_corrupted_solution() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let o = dldn(&["simulate", "--bundle", "sec5a", "--horizon-us", "100", "--out-dir", p(&a)]);
    assert!(o.status.success(), "{}", text(&o));
    let sol = fs::read_to_string(a.join("solution.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&sol).unwrap();
    // 1 -> 3 has no link in the bundled topology.
    v["flows"][0]["path"] = serde_json::json!([1, 3, 4, 5, 6]);
    let bad = dir.path().join("bad.json");
    fs::write(&bad, serde_json::to_string(&v).unwrap()).unwrap();
    let o = dldn(&[
        "simulate", "--instance", p(&a.join("instance.json")), "--solution", p(&bad), "--out-dir", p(&a),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", text(&o));
}

#[test]
fn one_hypercycle_horizon_warns() {
    let dir = tempfile::tempdir().unwrap();
    let o = dldn(&["simulate", "--bundle", "sec5a", "--horizon-us", "20", "--out-dir", p(dir.path())]);
    assert!(o.status.success(), "{}", text(&o));
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning: horizon"));
}

#[test]
fn compare_small_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let run = |out: &Path| {
        let o = dldn(&[
            "compare",
            "--nodes",
            "20",
            "--links",
            "40",
            "--deadlines-us",
            "100,300,1000",
            "--flow-counts",
            "10,40,80",
            "--time-limit-s",
            "60",
            "--out-dir",
            p(out),
        ]);
        assert!(o.status.success(), "{}", text(&o));
        fs::read_to_string(out.join("results.csv")).unwrap()
    };
    let a = run(&dir.path().join("a"));
    assert_eq!(a, run(&dir.path().join("b")));
    let mut rdr = csv::Reader::from_reader(a.as_bytes());
    let h = rdr.headers().unwrap().clone();
    let col = |name: &str| h.iter().position(|c| c == name).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 9);
    for r in &rows {
        assert_eq!(&r[col("failures")], "0");
        let gap: f64 = r[col("gap_percent")].parse().unwrap();
        assert!(gap >= 100.0);
        let opt: f64 = r[col("opt_gap_percent")].parse().unwrap();
        assert!(opt >= 0.0);
    }
    let timing = fs::read_to_string(dir.path().join("a/timing.csv")).unwrap();
    assert!(timing.starts_with("level,deadline_us,flows,wall_ms\n"));
}
