use singspline::mesh_ld::parse_dump;
use std::path::PathBuf;
use std::process::{Command, Output};

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_singspline")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn converge_from_config() {
    let cfg = configs().join("c01_rate_1d.json");
    let out = run(&["converge", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "N,n_nodes,sup_error,runtime_ms");
    assert_eq!(lines.len(), 6);
    assert!(lines[1].starts_with("8,41,"));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("PASS"));
}

#[test]
fn flags_override_config() {
    let cfg = configs().join("c01_rate_1d.json");
    let out = run(&["converge", "--config", cfg.to_str().unwrap(), "--n-grid", "8,16,32"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).lines().count(), 4);
}

#[test]
fn json_report_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let out = run(&[
        "converge",
        "--class",
        "barQ_u",
        "--r",
        "2",
        "--gamma",
        "1",
        "--n-grid",
        "8,16,32,64",
        "--format",
        "json",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["variant"], "ThmA_u1");
    assert_eq!(report["rows"].as_array().unwrap().len(), 4);
    assert_eq!(report["rows"][0]["N"], 8);
}

#[test]
fn failing_band_exits_one() {
    let out = run(&["converge", "--class", "barQ_u", "--r", "2", "--gamma", "1", "--n-grid", "8,16,32", "--band", "10,11"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("FAIL"));
}

#[test]
fn bad_input_exits_two() {
    assert_eq!(run(&["converge", "--r", "2", "--gamma", "1"]).status.code(), Some(2));
    let mismatch = run(&["converge", "--class", "Q_u", "--r", "1", "--gamma", "0.5", "--n-grid", "8,16", "--variant", "ThmA_u1"]);
    assert_eq!(mismatch.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&mismatch.stderr).contains("mesh"));
}

#[test]
fn reports_are_byte_stable() {
    let args = ["converge", "--class", "Q_u", "--r", "1", "--gamma", "0.5", "--n-grid", "8,16,32", "--jobs", "3"];
    assert_eq!(run(&args).stdout, run(&args).stdout);
}

#[test]
fn widths_small_grid() {
    let cfg = configs().join("c11_lower_bound.json");
    let out = run(&["widths", "--config", cfg.to_str().unwrap(), "--n-grid", "4,8,16"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert_eq!(text.lines().next().unwrap(), "N,bumps,epsilon,derivative_ratio,constraints_hold");
    assert!(text.lines().skip(1).all(|l| l.ends_with(",true")));
}

#[test]
fn membership_rows_per_order() {
    let out = run(&["check-membership", "--class", "barQ_u", "--r", "2", "--gamma", "1"]);
    assert!(out.status.success());
    // s = 3: orders 0..=3
    assert_eq!(stdout(&out).lines().count(), 5);
    let json = run(&["check-membership", "--class", "Q_u", "--r", "1", "--gamma", "0.5", "--l", "2", "--format", "json"]);
    let report: serde_json::Value = serde_json::from_slice(&json.stdout).unwrap();
    assert!(report["epsilon_star"].as_f64().unwrap() > 0.0);
}

#[test]
fn dump_partition_round_trips() {
    let out = run(&["dump-partition", "--class", "barQ_u", "--r", "3", "--gamma", "1", "--l", "2", "--n", "2", "--continuous"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let cells = parse_dump(&stdout(&out), 2).unwrap();
    let volume: f64 = cells.iter().map(|c| c.volume()).sum();
    assert!((volume - 4.0).abs() < 1e-12);
    let one_d = run(&["dump-partition", "--class", "Q_u", "--r", "1", "--gamma", "0.5", "--n", "4"]);
    assert!(one_d.status.success());
    assert_eq!(stdout(&one_d).lines().next().unwrap(), "a,b,side,layer,sub");
}
