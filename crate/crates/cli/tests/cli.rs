use std::collections::HashMap;
use std::process::{Command, Output};
use std::time::Instant;

fn nodeiso(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nodeiso")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = nodeiso(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    nodeiso(args).status.code().unwrap()
}

fn record(args: &[&str]) -> HashMap<String, serde_json::Value> {
    let mut full = args.to_vec();
    full.extend(["--format", "json"]);
    serde_json::from_str(&ok(&full)).unwrap()
}

fn num(r: &HashMap<String, serde_json::Value>, key: &str) -> f64 {
    r[key].as_f64().unwrap_or_else(|| panic!("{key} is not a number: {:?}", r[key]))
}

fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers().unwrap().iter().map(str::to_string).collect();
    let rows = reader.records().map(|r| r.unwrap().iter().map(str::to_string).collect()).collect();
    (header, rows)
}

#[test]
fn eval_point_value() {
    let r = record(&[
        "eval", "--m", "2", "--alpha", "4", "--sigma", "0", "--k-db", "10", "--psi-db", "10", "--ptx", "1", "--w",
        "0.01", "--lambda", "1e-4",
    ]);
    assert!((num(&r, "er2_analytic") - 9.3998).abs() < 1e-4);
    assert!((num(&r, "p_i_analytic") - 0.99705).abs() < 1e-5);
    assert!((num(&r, "p_i_quadrature") - num(&r, "p_i_analytic")).abs() < 1e-12);
}

#[test]
fn eval_zero_density() {
    let r = record(&["eval", "--lambda", "0", "--sigma", "2"]);
    assert_eq!(num(&r, "p_i_analytic"), 1.0);
    assert_eq!(num(&r, "p_i_quadrature"), 1.0);
}

#[test]
fn single_branch_mrc_matches_no_diversity() {
    for format in ["text", "csv", "json"] {
        let mrc = ok(&["eval", "--m", "2", "--M", "1", "--scheme", "mrc", "--lambda", "1e-4", "--format", format]);
        let sc = ok(&["eval", "--m", "2", "--M", "1", "--scheme", "sc", "--lambda", "1e-4", "--format", format]);
        let none = ok(&["eval", "--m", "2", "--scheme", "none", "--lambda", "1e-4", "--format", format]);
        assert_eq!(mrc, none);
        assert_eq!(sc, none);
    }
}

#[test]
fn db_flags_match_linear() {
    assert_eq!(ok(&["eval", "--k-db", "10", "--lambda", "1e-3"]), ok(&["eval", "--k", "10", "--lambda", "1e-3"]));
    assert_eq!(ok(&["eval", "--psi-db", "10", "--lambda", "1e-3"]), ok(&["eval", "--psi", "10", "--lambda", "1e-3"]));
    let db = record(&["eval", "--sigma-db", "10", "--lambda", "1e-3"]);
    assert!((num(&db, "sigma") - std::f64::consts::LN_10).abs() < 1e-15);
}

#[test]
fn real_m_routes_through_quadrature() {
    let real = record(&["eval", "--m-real", "2", "--sigma", "1", "--lambda", "1e-4"]);
    let int = record(&["eval", "--m", "2", "--sigma", "1", "--lambda", "1e-4"]);
    assert!(real["er2_analytic"].is_null());
    assert!((num(&real, "er2_quadrature") / num(&int, "er2_analytic") - 1.0).abs() < 1e-8);
    let half = record(&["eval", "--m-real", "0.5", "--lambda", "1e-4"]);
    assert!(num(&half, "er2_quadrature") > 0.0);
    assert_eq!(code(&["eval", "--m-real", "2", "--lambda", "1e-4", "--outputs", "analytic"]), 2);
    assert_eq!(code(&["eval", "--m-real", "0.3", "--lambda", "1e-4"]), 2);
    assert_eq!(code(&["simulate", "--m-real", "2", "--lambda", "1e-2"]), 2);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&["eval", "--lambda", "1e-4", "--sigma", "-1"]), 2);
    assert_eq!(code(&["eval", "--lambda", "-1"]), 2);
    assert_eq!(code(&["eval", "--lambda", "1e-4", "--m", "0"]), 2);
    assert_eq!(code(&["eval", "--lambda", "1e-4", "--M", "2"]), 2);
    assert_eq!(code(&["eval", "--lambda", "1e-4", "--k", "10", "--k-db", "10"]), 2);
    assert_eq!(code(&["eval", "--lambda", "1e-4", "--bogus", "1"]), 2);
    assert_eq!(code(&["eval"]), 2);
    assert_eq!(code(&["invert", "--target-pi", "1.5"]), 2);
    assert_eq!(code(&["invert", "--target-pi", "0"]), 2);
    assert_eq!(code(&["sweep", "--figure", "9"]), 2);
    assert_eq!(code(&["sweep", "--figure", "2", "--m", "3"]), 2);
    assert_eq!(code(&["sweep", "--vary", "sigma", "--grid", "2,1"]), 2);
    assert_eq!(code(&["sweep", "--vary", "sigma", "--grid", "1,2", "--sigma", "1"]), 2);
    assert_eq!(code(&["simulate", "--lambda", "1e-2", "--runs", "0"]), 2);
}

#[test]
fn sc_cancellation_exits_3() {
    assert_eq!(
        code(&["eval", "--lambda", "1e-4", "--m", "20", "--scheme", "sc", "--M", "16", "--outputs", "analytic"]),
        3
    );
}

#[test]
fn invert_round_trip() {
    let r = record(&["invert", "--m", "4", "--target-pi", "0.01"]);
    assert!(num(&r, "lambda") > 0.0);
    assert!((num(&r, "p_i_roundtrip") - 0.01).abs() < 1e-12);
    // α = 2, Rayleigh: E[R²] = K·P_tx/(ψW) = 1/π
    let unit = record(&[
        "invert",
        "--alpha",
        "2",
        "--k",
        "1",
        "--ptx",
        "1",
        "--w",
        "1",
        "--psi",
        &std::f64::consts::PI.to_string(),
        "--target-pi",
        &(-1f64).exp().to_string(),
    ]);
    assert!((num(&unit, "er2") - 1.0 / std::f64::consts::PI).abs() < 1e-15);
    assert!((num(&unit, "lambda") - 1.0).abs() < 1e-12);
}

#[test]
fn simulate_reports_both_estimators() {
    let r = record(&["simulate", "--m", "2", "--lambda", "0.02", "--runs", "200", "--seed", "42"]);
    for key in ["p_isolated", "std_error", "ci_low", "ci_high", "p_any_isolated", "p_i_analytic", "z_score"] {
        assert!(r[key].is_number(), "{key}");
    }
    assert_eq!(r["runs_executed"], 200);
    assert_eq!(r["boundary"], "toroidal");
    assert_eq!(num(&r, "area"), 100.0);
    assert!(num(&r, "z_score").abs() < 4.0);
    assert!(num(&r, "p_any_isolated") >= num(&r, "p_isolated"));
}

#[test]
fn simulate_defaults_are_100m_square_1000_runs() {
    let r = record(&["simulate", "--lambda", "0.005", "--runs", "20"]);
    assert_eq!(num(&r, "area"), 100.0);
    let full = record(&["simulate", "--lambda", "0.001"]);
    assert_eq!(full["runs"], 1000);
}

#[test]
fn simulate_is_deterministic() {
    let args = [
        "simulate", "--m", "2", "--sigma", "1", "--scheme", "sc", "--M", "2", "--lambda", "0.01", "--runs", "100",
        "--seed", "42",
    ];
    let a = ok(&args);
    assert_eq!(a, ok(&args));
    let mut serial = args.to_vec();
    serial.push("--serial");
    assert_eq!(a, ok(&serial));
    let mut other = args.to_vec();
    let last = other.len() - 1;
    other[last] = "43";
    assert_ne!(a, ok(&other));
}

#[test]
fn degenerate_simulation_exits_3() {
    let out = nodeiso(&["simulate", "--lambda", "1e-6", "--runs", "10"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!out.stdout.is_empty());
}

#[test]
fn topology_export() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("topo.csv");
    ok(&[
        "simulate",
        "--lambda",
        "0.003",
        "--runs",
        "5",
        "--seed",
        "9",
        "--boundary",
        "bounded",
        "--topology",
        path.to_str().unwrap(),
        "--topology-run",
        "2",
    ]);
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "# area_side=100 boundary=bounded seed=9 run=2");
    let mut n = 0;
    for line in lines {
        let (x, y) = line.split_once(',').unwrap();
        let (x, y): (f64, f64) = (x.parse().unwrap(), y.parse().unwrap());
        assert!((0.0..100.0).contains(&x) && (0.0..100.0).contains(&y));
        n += 1;
    }
    assert!(n > 0);
    assert_eq!(
        code(&[
            "simulate",
            "--lambda",
            "0.003",
            "--runs",
            "5",
            "--topology",
            path.to_str().unwrap(),
            "--topology-run",
            "5"
        ]),
        2
    );
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# point\nm=2\nsigma=2\nlambda=1e-4\nformat=csv\n").unwrap();
    let from_file = ok(&["eval", "--config", cfg.to_str().unwrap()]);
    assert_eq!(from_file, ok(&["eval", "--m", "2", "--sigma", "2", "--lambda", "1e-4", "--format", "csv"]));
    let overridden = ok(&["eval", "--config", cfg.to_str().unwrap(), "--sigma-db", "3"]);
    assert_eq!(overridden, ok(&["eval", "--m", "2", "--sigma-db", "3", "--lambda", "1e-4", "--format", "csv"]));
    std::fs::write(&cfg, "nonsense=1\n").unwrap();
    assert_eq!(code(&["eval", "--lambda", "1", "--config", cfg.to_str().unwrap()]), 2);
    assert_eq!(code(&["eval", "--lambda", "1", "--config", "/nonexistent/file"]), 2);
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("o.csv");
    let stdout = ok(&["eval", "--lambda", "1e-3", "--format", "csv", "--out", path.to_str().unwrap()]);
    assert!(stdout.is_empty());
    assert_eq!(std::fs::read_to_string(&path).unwrap(), ok(&["eval", "--lambda", "1e-3", "--format", "csv"]));
}

const SWEEP_COLUMNS: [&str; 8] = [
    "p_i_analytic",
    "er2_analytic",
    "p_i_quadrature",
    "p_i_sim",
    "sim_stderr",
    "sim_ci_low",
    "sim_ci_high",
    "lambda_for_target",
];

#[test]
fn figure_presets_run_quickly() {
    for fig in 2..=7 {
        let fig = fig.to_string();
        let start = Instant::now();
        let text = ok(&["sweep", "--figure", &fig, "--format", "csv"]);
        assert!(start.elapsed().as_secs_f64() < 5.0, "figure {fig} took {:?}", start.elapsed());
        let (header, rows) = csv_rows(&text);
        assert_eq!(header[0], "curve");
        assert_eq!(&header[2..], &SWEEP_COLUMNS);
        assert!(!rows.is_empty());
        assert!(rows.iter().all(|r| !r[2].is_empty()), "figure {fig} has empty analytic cells");
    }
}

#[test]
fn figure_5_increases_with_alpha() {
    let (header, rows) = csv_rows(&ok(&["sweep", "--figure", "5", "--format", "csv"]));
    assert_eq!(header[1], "alpha");
    let alphas: Vec<f64> = rows.iter().filter(|r| r[0] == rows[0][0]).map(|r| r[1].parse().unwrap()).collect();
    assert_eq!(alphas.first(), Some(&2.0));
    assert_eq!(alphas.last(), Some(&6.0));
    let sparse: Vec<&Vec<String>> = rows.iter().filter(|r| r[0] == "sigma=0").collect();
    for w in sparse.windows(2) {
        assert!(w[1][2].parse::<f64>().unwrap() > w[0][2].parse::<f64>().unwrap());
    }
}

#[test]
fn figure_4_density_ratio() {
    let (_, rows) = csv_rows(&ok(&["sweep", "--figure", "4", "--format", "csv"]));
    let base: f64 = rows[0][9].parse().unwrap();
    assert_eq!(rows[0][1], "0");
    for r in &rows {
        let sigma: f64 = r[1].parse().unwrap();
        let lambda: f64 = r[9].parse().unwrap();
        let expected = (-2.0 * sigma * sigma / 16.0).exp();
        assert!((lambda / base / expected - 1.0).abs() < 1e-12, "σ={sigma}");
    }
}

#[test]
fn sc_order_sweep_has_diminishing_returns() {
    let (header, rows) = csv_rows(&ok(&[
        "sweep", "--vary", "M", "--grid", "1:6:6", "--scheme", "sc", "--m", "2", "--lambda", "0.02", "--format", "csv",
    ]));
    assert_eq!(header[1], "M");
    assert!(rows.iter().all(|r| r[0] == "sc"));
    let p: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    let d: Vec<f64> = p.windows(2).map(|w| w[0] - w[1]).collect();
    assert!(d.iter().all(|x| *x >= 0.0));
    assert!(d.windows(2).all(|w| w[1] < w[0]), "{d:?}");
}

#[test]
fn sweep_json_matches_csv_columns() {
    let args = [
        "sweep",
        "--vary",
        "sigma",
        "--grid",
        "0,1,2",
        "--m",
        "2",
        "--outputs",
        "analytic,quadrature",
        "--target-pi",
        "0.1",
    ];
    let (header, rows) = csv_rows(&ok(&[&args[..], &["--format", "csv"]].concat()));
    let json: Vec<serde_json::Map<String, serde_json::Value>> =
        serde_json::from_str(&ok(&[&args[..], &["--format", "json"]].concat())).unwrap();
    assert_eq!(json.len(), rows.len());
    for (obj, row) in json.iter().zip(&rows) {
        assert_eq!(obj.keys().cloned().collect::<Vec<_>>(), header);
        let pa = obj["p_i_analytic"].as_f64().unwrap();
        assert_eq!(pa, row[2].parse::<f64>().unwrap());
        assert!((obj["p_i_quadrature"].as_f64().unwrap() - pa).abs() < 1e-9);
        assert!(obj["p_i_sim"].is_null());
    }
}

#[test]
fn sweep_with_simulation() {
    let (_, rows) = csv_rows(&ok(&[
        "sweep",
        "--vary",
        "lambda",
        "--grid",
        "0.01,0.03",
        "--m",
        "2",
        "--outputs",
        "analytic,simulation",
        "--runs",
        "100",
        "--seed",
        "1",
        "--format",
        "csv",
    ]));
    for r in rows {
        let analytic: f64 = r[2].parse().unwrap();
        let sim: f64 = r[5].parse().unwrap();
        let se: f64 = r[6].parse().unwrap();
        assert!((sim - analytic).abs() < 5.0 * se, "{sim} vs {analytic} ± {se}");
        assert!(r[7].parse::<f64>().unwrap() <= sim && sim <= r[8].parse::<f64>().unwrap());
    }
}

#[test]
fn sweep_failures_become_empty_cells() {
    let out = nodeiso(&["sweep", "--vary", "M", "--grid", "8,16", "--scheme", "sc", "--m", "20", "--format", "csv"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    let (_, rows) = csv_rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(rows.len(), 2);
    assert!(!rows[0][2].is_empty());
    assert!(rows[1][2..].iter().all(String::is_empty));
    assert_eq!(code(&["sweep", "--vary", "M", "--grid", "12,16", "--scheme", "sc", "--m", "20"]), 3);
}
