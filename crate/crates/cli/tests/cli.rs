//! End-to-end tests of the command-line interface.

use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_torus-coulomb"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn derived_beta_star_is_reported() {
    let out = run(&["dg", "--n", "4", "--beta", "3", "--i", "1,0", "--j", "2,0", "--sweeps", "200", "--burn-in", "50", "--seed", "1"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stderr(&out).contains("beta-star=0.0833333"), "stderr: {}", stderr(&out));
}

#[test]
fn conflicting_temperatures_are_a_usage_error() {
    let out = run(&["dg", "--n", "4", "--beta", "3", "--beta-star", "0.1", "--i", "1,0", "--j", "2,0"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("mutually exclusive"));
}

#[test]
fn missing_temperature_is_a_usage_error() {
    let out = run(&["cg", "--n", "4", "--i", "0,0", "--j", "1,0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--beta"));
}

#[test]
fn greens_csv_table() {
    let out = run(&["greens", "--n", "4"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("dx,dy,g"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 16);
    let total: f64 = rows.iter().map(|r| r.split(',').nth(2).unwrap().parse::<f64>().unwrap()).sum();
    assert!(total.abs() < 1e-12);
}

#[test]
fn greens_json_schema() {
    let out = run(&["greens", "--n", "3", "--format", "json"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["config"]["subcommand"], "greens");
    assert_eq!(v["results"]["values"].as_array().unwrap().len(), 9);
    assert!(v["results"]["axis_gaps"][0]["gap"].as_f64().unwrap() > 0.0);
}

#[test]
fn exact_duality_report() {
    let out = run(&["exact", "duality", "--n", "2", "--beta", "1", "--kx", "6", "--km", "4", "--format", "json"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let gap = v["results"]["relative_gap"].as_f64().unwrap();
    assert!(gap < 1e-6, "gap {gap}");
    assert_eq!(v["config"]["beta_star"].as_f64().unwrap(), 0.25);
}

#[test]
fn exact_budget_guard_is_actionable() {
    let out = run(&["exact", "duality", "--n", "3", "--beta", "1", "--kx", "7", "--km", "7"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("budget"), "stderr: {}", stderr(&out));
}

#[test]
fn dg_csv_columns() {
    let out = run(&["dg", "--n", "4", "--beta", "1", "--i", "1,0", "--j", "2,0", "--sweeps", "500", "--burn-in", "100", "--seed", "7", "--k-max", "2"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("observable,estimate,stderr,sweeps,seed"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3); // mean_sq_diff + two tails
    assert!(rows[0].starts_with("mean_sq_diff,"));
    assert!(rows[1].starts_with("tail_ge_1,"));
}

#[test]
fn dg_json_embeds_resolved_config() {
    let out = run(&["dg", "--n", "4", "--beta-star", "0.0833333333333333", "--i", "1,0", "--j", "2,0", "--sweeps", "200", "--burn-in", "50", "--seed", "9", "--chains", "2", "--format", "json"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["config"]["seeds"], serde_json::json!([9, 10]));
    assert!((v["config"]["beta"].as_f64().unwrap() - 3.0).abs() < 1e-10);
    assert!(v["results"]["mean_sq_diff"]["estimate"].is_number());
}

#[test]
fn cg_reports_bounds_when_applicable() {
    let out = run(&["cg", "--n", "4", "--beta-star", "0.08", "--i", "0,0", "--j", "2,0", "--sweeps", "2000", "--burn-in", "200", "--seed", "3", "--format", "json"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["results"]["bounds_applicable"], true);
    assert!(v["results"]["upper_bound"].as_f64().unwrap() > 0.0);
}

#[test]
fn cg_warns_above_threshold() {
    let out = run(&["cg", "--n", "4", "--beta-star", "0.2", "--i", "0,0", "--j", "2,0", "--sweeps", "1000", "--burn-in", "100", "--seed", "3", "--format", "json"]);
    assert!(out.status.success());
    assert!(stderr(&out).contains("warning"));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["results"]["bounds_applicable"], false);
    assert!(v["results"]["upper_bound"].is_null());
}

#[test]
fn contours_extract_reports_kind() {
    let out = run(&["contours", "extract", "--n", "6", "--seed", "5", "--i", "1,1", "--j", "4,4", "--format", "json"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let kind = v["results"]["kind"].as_str().unwrap();
    assert!(kind == "single_loop" || kind == "winding_pair");
    assert!(v["results"]["total_length"].as_u64().unwrap() >= 4);
}

#[test]
fn contours_enumerate_csv() {
    let out = run(&["contours", "enumerate", "--n", "4", "--i", "0,0", "--j", "1,0", "--max-len", "6"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.starts_with("length,count,bound\n"));
    // Two separating plaquettes at length 4.
    assert!(text.lines().any(|l| l.starts_with("4,2,")), "{text}");
}

#[test]
fn contours_enumerate_budget_guard() {
    let out = run(&["contours", "enumerate", "--n", "6", "--i", "0,0", "--j", "1,0", "--max-len", "40"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("budget"));
}

#[test]
fn contours_verify_passes() {
    let out = run(&["contours", "verify", "--n", "4", "--samples", "200", "--beta", "3", "--format", "json"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["results"]["passed"], true);
    let phi = v["results"]["bounds"]["contour_sum_bound"].as_f64().unwrap();
    assert!((phi - 0.2388869762974008).abs() < 1e-12);
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = std::env::temp_dir().join(format!("tc-cli-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, "n=4\nbeta=1\ni=1,0\nj=2,0\nsweeps=300\nburn-in=50\nseed=4\n").unwrap();
    let out = run(&["dg", "--config", cfg.to_str().unwrap(), "--format", "json"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["config"]["n"], 4);
    assert_eq!(v["config"]["sweeps"], 300);
    // Flag overrides the file.
    let out2 = run(&["dg", "--config", cfg.to_str().unwrap(), "--sweeps", "400", "--format", "json"]);
    let v2: serde_json::Value = serde_json::from_str(&stdout(&out2)).unwrap();
    assert_eq!(v2["config"]["sweeps"], 400);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn unknown_config_key_rejected() {
    let dir = std::env::temp_dir().join(format!("tc-cli-badcfg-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("bad.cfg");
    std::fs::write(&cfg, "temperture=3\n").unwrap();
    let out = run(&["dg", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("unknown key"));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn out_flag_writes_file() {
    let dir = std::env::temp_dir().join(format!("tc-cli-out-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("table.csv");
    let out = run(&["greens", "--n", "2", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("dx,dy,g\n"));
    assert_eq!(text.lines().count(), 5);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn verify_quick_passes() {
    let out = run(&["verify", "--quick"]);
    assert!(out.status.success(), "stdout: {}\nstderr: {}", stdout(&out), stderr(&out));
    let text = stdout(&out);
    assert_eq!(text.matches("[PASS]").count(), 3, "{text}");
    assert!(text.contains("all criteria passed"));
}

#[test]
fn unknown_flag_exits_2() {
    let out = run(&["greens", "--n", "4", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn thread_env_caps_workers() {
    let out = bin()
        .env("TORUS_COULOMB_THREADS", "1")
        .args(["dg", "--n", "4", "--beta", "1", "--i", "1,0", "--j", "2,0", "--sweeps", "200", "--burn-in", "50", "--seed", "2", "--chains", "3", "--format", "json"])
        .output()
        .expect("binary runs");
    assert!(out.status.success(), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["config"]["workers"], 1);
    assert_eq!(v["config"]["seeds"].as_array().unwrap().len(), 3);
}
