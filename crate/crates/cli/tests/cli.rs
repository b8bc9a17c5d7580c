use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

use panel_outliers::pipeline::{load_ratios, RunConfig};
use panel_outliers::report::to_json;
use panel_outliers::run_detect;
use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_panel-outliers");

fn rice() -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/data/rice_farms_area.csv")
        .to_string_lossy()
        .into_owned()
}

fn rice_args() -> Vec<String> {
    ["--input", &rice(), "--id", "farm_id", "--t1", "size_4", "--t2", "size_5"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

fn run(sub: &str, extra: &[&str]) -> Output {
    Command::new(BIN)
        .arg(sub)
        .args(rice_args())
        .args(extra)
        .output()
        .unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn detect_hb_writes_report() {
    let out = run("detect", &["--method", "hb"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["schema"], "panel-outliers/1");
    assert_eq!(v["results"][0]["method"], "hb");
    assert_eq!(v["results"][0]["params"]["C"], 7.0);
    assert_eq!(v["results"].as_array().unwrap().len(), 1);
}

#[test]
fn dbscan_without_delta_is_a_config_error() {
    let out = run("detect", &["--method", "dbscan"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("curve"));
}

#[test]
fn seeded_runs_match_library_bytes() {
    let a = run("detect", &["--method", "iforest", "--seed", "42"]);
    let b = run("detect", &["--method", "iforest", "--seed", "42"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);

    let mut cfg = RunConfig::default();
    for (k, v) in [("input", rice().as_str()), ("id", "farm_id"), ("t1", "size_4"), ("t2", "size_5"), ("method", "iforest"), ("seed", "42")] {
        cfg.set(k, v).unwrap();
    }
    let report = run_detect(&cfg, &load_ratios(&cfg).unwrap()).unwrap();
    assert_eq!(a.stdout, to_json(&report));
}

#[test]
fn missing_seed_is_reported() {
    let out = run("detect", &["--method", "iforest", "--ntrees", "10"]);
    assert!(out.status.success());
    let notes = json(&out)["notes"].to_string();
    assert!(notes.contains("seed drawn from system entropy"));
}

#[test]
fn compare_emits_eight_by_eight() {
    let out = run("compare", &["--seed", "1", "--q", "171"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    let labels: Vec<&str> = v["labels"].as_array().unwrap().iter().map(|l| l.as_str().unwrap()).collect();
    assert_eq!(
        labels,
        ["|E|", "IF", "5-NN-dist", "10-NN-dist", "15-NN-dist", "5-NN-weight", "10-NN-weight", "15-NN-weight"]
    );
    let tau = v["tau"].as_array().unwrap();
    assert_eq!(tau.len(), 8);
    assert!((tau[0][1].as_f64().unwrap() - 0.8627).abs() < 0.02);

    let csv = run("compare", &["--seed", "1", "--format", "csv"]);
    assert_eq!(String::from_utf8_lossy(&csv.stdout).lines().count(), 9);
}

#[test]
fn curve_has_one_row_per_unit() {
    let out = run("curve", &["--g", "6"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("rank,knn_dist_5"));
    let d: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(d.len(), 171);
    assert!(d.windows(2).all(|w| w[0] <= w[1]));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ceiling(sqrt(m)) = 14"));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "C = 5.0\nA = 0.1\nmethod = \"hb\"\n").unwrap();
    let out = run("detect", &["--config", cfg.to_str().unwrap(), "--hb-c", "6"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let params = &json(&out)["results"][0]["params"];
    assert_eq!(params["C"], 6.0);
    assert_eq!(params["A"], 0.1);
}

#[test]
fn exit_codes_separate_config_and_data_errors() {
    let missing = Command::new(BIN)
        .args(["detect", "--input", "/nonexistent/panel.csv"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(2));

    let bad_param = run("detect", &["--hb-u", "2"]);
    assert_eq!(bad_param.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "id,y1,y2\na,1,2\nb,-1,3\n").unwrap();
    let data = Command::new(BIN)
        .args(["detect", "--input", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(data.status.code(), Some(3));
}

#[test]
fn thread_count_does_not_change_results() {
    let go = |n: &str| {
        Command::new(BIN)
            .env("PANEL_OUTLIERS_THREADS", n)
            .arg("detect")
            .args(rice_args())
            .args(["--method", "all", "--seed", "3", "--delta", "0.5"])
            .output()
            .unwrap()
            .stdout
    };
    assert_eq!(go("1"), go("4"));
}

#[test]
fn plot_dir_and_csv_output() {
    let dir = tempfile::tempdir().unwrap();
    let out_file = dir.path().join("report.csv");
    let plots = dir.path().join("plots");
    let out = run(
        "detect",
        &["--method", "sabp", "--format", "csv", "--out", out_file.to_str().unwrap(), "--plot-dir", plots.to_str().unwrap()],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(&out_file).unwrap();
    assert!(csv.starts_with("method,unit_id,"));
    assert!(plots.join("hist_E.csv").exists());
    assert!(plots.join("bounds.csv").exists());
}

fn http(addr: &str, request: &str) -> (u16, String) {
    let mut stream = TcpStream::connect(addr).unwrap();
    stream.write_all(request.as_bytes()).unwrap();
    let mut raw = String::new();
    stream.read_to_string(&mut raw).unwrap();
    let status = raw.split_whitespace().nth(1).unwrap().parse().unwrap();
    let body = raw.split_once("\r\n\r\n").map(|(_, b)| b.to_string()).unwrap_or_default();
    (status, body)
}

fn post_run(addr: &str, body: &str) -> (u16, String) {
    http(
        addr,
        &format!(
            "POST /run HTTP/1.1\r\nHost: x\r\nConnection: close\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{body}",
            body.len()
        ),
    )
}

#[test]
fn explore_api() {
    let mut child = Command::new(BIN)
        .arg("explore")
        .args(rice_args())
        .args(["--addr", "127.0.0.1:0", "--method", "hb"])
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stderr.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().trim_start_matches("listening on http://").to_string();

    let (status, body) = http(&addr, "GET / HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n");
    assert_eq!(status, 200);
    assert!(body.contains("/run"));

    let (status, wide) = post_run(&addr, r#"{"C": 9}"#);
    assert_eq!(status, 200);
    let (_, narrow) = post_run(&addr, r#"{"C": 3}"#);
    let upper = |b: &str| serde_json::from_str::<Value>(b).unwrap()["results"][0]["rule"]["upper"].as_f64().unwrap();
    assert!(upper(&wide) > upper(&narrow));

    let cli = run("detect", &["--method", "hb", "--hb-c", "3"]);
    assert_eq!(narrow.as_bytes(), cli.stdout.as_slice());

    let (status, hist) = http(&addr, "GET /plotdata/hist_E HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n");
    assert_eq!(status, 200);
    assert!(hist.starts_with("bin,lower,upper,count"));
    let (status, curve) = http(&addr, "GET /plotdata/curve HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n");
    assert_eq!(status, 200);
    assert!(curve.starts_with("rank,knn_dist_5"));

    let (status, _) = post_run(&addr, r#"{"U": 3}"#);
    assert_eq!(status, 400);
    let (status, _) = http(&addr, "GET /plotdata/nothing HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n");
    assert_eq!(status, 404);

    child.kill().unwrap();
    child.wait().unwrap();
}
