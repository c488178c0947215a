use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use modtransit::cli::FileConfig;
use modtransit::manifest::RunManifest;
use modtransit::network::write_network;
use modtransit::synthetic::toy_instances;

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
    net: PathBuf,
    config: PathBuf,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    let inst = &toy_instances()[1];
    let net = root.join("net");
    write_network(&inst.net, &net).unwrap();
    let config = root.join("config.toml");
    let file = FileConfig {
        design: inst.config.clone(),
        ..Default::default()
    };
    std::fs::write(&config, toml::to_string(&file).unwrap()).unwrap();
    Fixture {
        _dir: dir,
        root,
        net,
        config,
    }
}

fn modtransit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_modtransit")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_clean_fixture() {
    let f = fixture();
    let out = modtransit(&["validate", s(&f.net), "--config", s(&f.config), "--samples", "20", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("failed subproblems: 0"));
}

#[test]
fn missing_demand_file_is_a_data_error() {
    let f = fixture();
    std::fs::remove_file(f.net.join("demand.csv")).unwrap();
    let out = modtransit(&["validate", s(&f.net)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("demand.csv"));
}

#[test]
fn usage_errors() {
    assert_eq!(modtransit(&["design"]).status.code(), Some(1));
    assert_eq!(modtransit(&["design", "x", "--method", "simplex"]).status.code(), Some(1));
    let v = modtransit(&["--version"]);
    assert_eq!(v.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&v.stdout).contains(env!("CARGO_PKG_VERSION")));
}

#[test]
fn design_converges_and_is_reproducible() {
    let f = fixture();
    let mut designs = Vec::new();
    for run in ["a", "b"] {
        let out_dir = f.root.join(run);
        let trace = f.root.join(format!("{run}.csv"));
        let out = modtransit(&[
            "design",
            s(&f.net),
            "--config",
            s(&f.config),
            "--method",
            "enhanced",
            "--cuts",
            "disagg,clique-cover",
            "--trace",
            s(&trace),
            "--out",
            s(&out_dir),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let mut rd = csv::Reader::from_path(&trace).unwrap();
        let rows: Vec<csv::StringRecord> = rd.records().map(|r| r.unwrap()).collect();
        let gap: f64 = rows.last().unwrap()[4].parse().unwrap();
        assert!(gap.abs() < 1e-4, "final gap {gap}");
        designs.push(std::fs::read(out_dir.join("design.csv")).unwrap());
        let m = RunManifest::read(&out_dir.join("manifest.json")).unwrap();
        assert_eq!(m.inputs.len(), 5);
        assert!(m.finished.is_some());
    }
    assert_eq!(designs[0], designs[1]);
    let a = RunManifest::read(&f.root.join("a/manifest.json")).unwrap();
    let b = RunManifest::read(&f.root.join("b/manifest.json")).unwrap();
    assert!(a.same_run(&b));

    // the optimized design evaluates to the reported cost
    let out = modtransit(&[
        "assign",
        s(&f.net),
        "--config",
        s(&f.config),
        "--design",
        s(&f.root.join("a/design.csv")),
        "--out",
        s(&f.root.join("assign")),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_reader(std::fs::File::open(f.root.join("a/summary.json")).unwrap()).unwrap();
    let assigned: serde_json::Value =
        serde_json::from_reader(std::fs::File::open(f.root.join("assign/summary.json")).unwrap()).unwrap();
    let ub = summary["upper_bound"].as_f64().unwrap();
    let obj = assigned["objective"].as_f64().unwrap();
    assert!((ub - obj).abs() <= 1e-6 * ub);
    assert!(f.root.join("assign/link_flows.csv").exists());
}

#[test]
fn classic_and_monolith_agree() {
    let f = fixture();
    let mut costs = Vec::new();
    for m in ["classic", "monolith"] {
        let dir = f.root.join(m);
        let out = modtransit(&["design", s(&f.net), "--config", s(&f.config), "--method", m, "--out", s(&dir)]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let v: serde_json::Value = serde_json::from_reader(std::fs::File::open(dir.join("summary.json")).unwrap()).unwrap();
        costs.push(v["upper_bound"].as_f64().unwrap());
    }
    assert!((costs[0] - costs[1]).abs() <= 1e-6 * costs[0]);
}

#[test]
fn time_limit_exits_three() {
    let f = fixture();
    let out = modtransit(&[
        "design",
        s(&f.net),
        "--config",
        s(&f.config),
        "--time-limit",
        "1e-9",
        "--out",
        s(&f.root.join("tl")),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(f.root.join("tl/design.csv").exists());
}

#[test]
fn compare_and_sweep_write_reports() {
    let f = fixture();
    let out = modtransit(&["compare", s(&f.net), "--config", s(&f.config), "--out", s(&f.root.join("cmp"))]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_reader(std::fs::File::open(f.root.join("cmp/comparison.json")).unwrap()).unwrap();
    for side in ["integrated", "baseline"] {
        let pct = report[side]["satisfied_pct"].as_f64().unwrap();
        assert!(pct <= 100.0 + 1e-9);
    }
    assert!(String::from_utf8_lossy(&out.stdout).contains("avg wait time"));

    let out = modtransit(&[
        "sweep",
        s(&f.net),
        "--config",
        s(&f.config),
        "--buses",
        "12,20",
        "--vehicles",
        "100,200",
        "--jobs",
        "2",
        "--out",
        s(&f.root.join("sweep")),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(f.root.join("sweep/grid.csv")).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.starts_with(
        "buses,vehicles,ivt_hr,road_wait_hr,transit_wait_hr,total_hr,share_mod,share_transit,share_multi,routes_located"
    ));

    let out = modtransit(&["baseline", s(&f.net), "--config", s(&f.config), "--out", s(&f.root.join("base"))]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(f.root.join("base/routes.csv").exists());
    assert!(f.root.join("base/manifest.json").exists());
}
