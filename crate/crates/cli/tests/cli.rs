use std::path::PathBuf;
use std::process::{Command, Output};

fn mdtk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mdtk"))
        .args(args)
        .env_remove("MDTK_DEFAULT_LANES")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn scratch_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("mdtk-cli-{name}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn column(csv: &str, name: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == name).unwrap_or_else(|| panic!("no column {name}"));
    lines.map(|l| l.split(',').nth(idx).unwrap().to_string()).collect()
}

#[test]
fn skew_tail_with_zero_gamma_equals_normal() {
    let skew = mdtk(&["tails", "--kind", "skew", "--x", "2", "--gamma", "0"]);
    let normal = mdtk(&["tails", "--kind", "normal", "--x", "2"]);
    assert!(skew.status.success() && normal.status.success());
    assert_eq!(column(&stdout(&skew), "tail"), column(&stdout(&normal), "tail"));
}

#[test]
fn tails_json_flag() {
    let out = mdtk(&["tails", "--kind", "poisson", "--x", "0", "--gamma", "1", "--json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let want = 1.0 - 2.0 * (-1.0f64).exp();
    assert!((v[0]["tail"].as_f64().unwrap() - want).abs() < 1e-12);
}

#[test]
fn subgraph_bounds_report_psi_and_range() {
    let out = mdtk(&["bounds", "--family", "subgraph", "--pattern", "triangle", "--N", "100", "--p", "0.5", "--C0", "1"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let psi: f64 = column(&text, "psi")[0].parse().unwrap();
    assert!((psi / 5000.0 - 1.0).abs() < 1e-12);
    let x_max: f64 = column(&text, "x_max")[0].parse().unwrap();
    // sqrt(N^6 (1/2)^{5/2} (1/2)^{15} / 5000^{5/2})
    let want = (1e12 * 0.5f64.powf(2.5) * 0.5f64.powi(15) / 5000.0f64.powf(2.5)).sqrt();
    assert!((x_max / want - 1.0).abs() < 1e-12);
}

#[test]
fn theorem1_bounds_iid_range() {
    let out = mdtk(&["bounds", "--family", "theorem1", "--n", "10000", "--s", "1", "--d", "1", "--delta", "0.01"]);
    let x_max: f64 = column(&stdout(&out), "x_max")[0].parse().unwrap();
    assert!((x_max - 10.0).abs() < 1e-12);
}

#[test]
fn oracle_check_exits_zero() {
    let out = mdtk(&["oracle-check"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["passed"], true);
}

#[test]
fn exit_codes() {
    assert_eq!(mdtk(&["tails", "--kind", "poisson", "--x", "1", "--gamma", "0"]).status.code(), Some(2));
    assert_eq!(mdtk(&["kruns", "--n", "5", "--k", "5", "--p", "0.5"]).status.code(), Some(2));
    assert_eq!(mdtk(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(mdtk(&["subgraph", "--N", "20", "--p", "0.3", "--pattern", "path:3"]).status.code(), Some(3));
    assert_eq!(
        mdtk(&["ustat", "--m", "6", "--s", "2", "--kernel", "product", "--base", "rademacher"]).status.code(),
        Some(2)
    );
}

#[test]
fn subgraph_exact_moments_and_manifest() {
    let dir = scratch_dir("subgraph");
    let path = dir.join("tri.csv");
    let out = mdtk(&[
        "--reps", "20000", "--lanes", "2", "--output", path.to_str().unwrap(),
        "subgraph", "--N", "5", "--p", "0.4", "--pattern", "triangle", "--exact-moments", "--x", "0,1",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("tri.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["subcommand"], "subgraph");
    assert_eq!(manifest["results"]["moments"]["method"], "exact-enumeration");
    assert_eq!(manifest["rng_id"], mdtk_core::mc::RNG_ID);
    assert!(manifest["wall_time_seconds"].as_f64().is_some());
    let csv = std::fs::read_to_string(&path).unwrap();
    // x = 0 row: R_N = p_right / 0.5 - 1
    let p_right: f64 = column(&csv, "p_right")[0].parse().unwrap();
    let r_n: f64 = column(&csv, "R_N")[0].parse().unwrap();
    assert_eq!(r_n, p_right / 0.5 - 1.0);
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn kruns_three_runs_reports_sigma_source() {
    let dir = scratch_dir("kruns");
    let path = dir.join("k3.json");
    let out = mdtk(&[
        "--reps", "2000", "--format", "json", "--output", path.to_str().unwrap(),
        "kruns", "--n", "1500", "--k", "3", "--p", "0.25",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("k3.json.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["results"]["sigma_source"]["method"], "exact-enumeration");
    let rows: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 3);

    let out = mdtk(&["--reps", "2000", "kruns", "--n", "300", "--k", "3", "--p", "0.25", "--sigma", "mc"]);
    assert!(out.status.success());
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn lanes_from_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_mdtk"))
        .args(["--reps", "1000", "kruns", "--n", "50", "--p", "0.3", "--x", "1"])
        .env("MDTK_DEFAULT_LANES", "3")
        .output()
        .unwrap();
    assert_eq!(column(&stdout(&out), "lanes"), vec!["3"]);
}

#[test]
fn moments_from_model_file() {
    let dir = scratch_dir("moments");
    let path = dir.join("model.json");
    let model = r#"{"m": 6, "n": 6, "base": [{"kind": "bernoulli", "p": 0.3}, {"kind": "bernoulli", "p": 0.3},
        {"kind": "bernoulli", "p": 0.3}, {"kind": "bernoulli", "p": 0.3}, {"kind": "bernoulli", "p": 0.3},
        {"kind": "bernoulli", "p": 0.3}],
        "index_sets": [[0,1],[1,2],[2,3],[3,4],[4,5],[5,0]], "summand": "builtin:kruns"}"#;
    std::fs::write(&path, model).unwrap();
    let out = mdtk(&["moments", "--model", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let sigma2: f64 = column(&text, "sigma2")[0].parse().unwrap();
    let p: f64 = 0.3;
    assert!((sigma2 - 6.0 * (p * p + 2.0 * p.powi(3) - 3.0 * p.powi(4))).abs() < 1e-12);
    assert_eq!(column(&text, "method"), vec!["exact-enumeration"]);
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn ustat_run() {
    let out = mdtk(&["--reps", "5000", "ustat", "--m", "20", "--s", "2", "--kernel", "product-linear", "--base", "bernoulli:0.4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(column(&stdout(&out), "x").len(), 3);
}

#[test]
fn csv_fields_round_trip() {
    let out = mdtk(&["--reps", "3000", "kruns", "--n", "60", "--p", "0.4", "--x", "0.5,1.5"]);
    for value in column(&stdout(&out), "R_skew") {
        let v: f64 = value.parse().unwrap();
        assert_eq!(format!("{v:.16e}"), value);
    }
}
