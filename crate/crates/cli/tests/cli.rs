use std::path::Path;
use std::process::{Command, Output};

fn gvfnav(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gvfnav"))
        .args(args)
        .current_dir(dir)
        .env("RUST_BACKTRACE", "0")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], dir: &Path) -> String {
    let out = gvfnav(args, dir);
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn scene_gen_reports_both_densities() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(
        &["scene", "gen", "--style", "pillars-2d", "--density", "0.3", "--seed", "7", "--out", "s.json"],
        dir.path(),
    );
    let summary: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    let full = summary["density_full"].as_f64().unwrap();
    assert!((full - 0.3).abs() <= 0.03, "{full}");
    assert!(summary["density_band"].as_f64().unwrap() >= full);
    let scene = json(&dir.path().join("s.json"));
    assert_eq!(scene["bounds"]["max"], serde_json::json!([30.0, 10.0, 3.0]));
    assert!(!scene["obstacles"].as_array().unwrap().is_empty());
}

#[test]
fn run_then_slice_the_flown_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("open.json"),
        r#"{"bounds": {"min": [0, 0, 0], "max": [8, 4, 2]}, "resolution": 0.1, "obstacles": []}"#,
    )
    .unwrap();
    ok(
        &["run", "--scene", "open.json", "--start", "1,2,1", "--goal", "6,2,1", "--seed", "3", "--out-dir", "out"],
        dir.path(),
    );
    let report = json(&dir.path().join("out/report.json"));
    assert_eq!(report["success"], true);
    let log = std::fs::read_to_string(dir.path().join("out/trial_3.csv")).unwrap();
    assert!(log.starts_with("t,x,y,z,vx,vy,vz,d_to_path,event_active\n"));
    let rows = log.lines().count() - 1;
    let duration = report["travel_time"].as_f64().unwrap();
    assert!((rows as f64 - duration / 0.01).abs() <= 1.0, "{rows} rows for {duration} s");
    assert!(!json(&dir.path().join("out/timing.json")).as_array().unwrap().is_empty());

    ok(
        &["field", "slice", "--scene", "open.json", "--traj", "out/trial_3.csv", "--z", "1", "--spacing", "0.25", "--out", "slice.csv"],
        dir.path(),
    );
    let slice = std::fs::read_to_string(dir.path().join("slice.csv")).unwrap();
    // 8 / 0.25 + 1 columns by 4 / 0.25 + 1 rows, plus the header.
    assert_eq!(slice.lines().count(), 33 * 17 + 1);
    assert!(slice.starts_with("x,y,chi_x,chi_y,d\n"));
}

#[test]
fn bench_writes_reports_and_logs() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("cfg.json"), r#"{"cruise_speed": 2.0, "K1": 1.5}"#).unwrap();
    ok(
        &[
            "--config", "cfg.json", "bench", "--density", "0.1", "--extent", "12,6,3", "--trials", "2",
            "--disturbance", "wind", "--seed", "5", "--logs", "--out", "b",
        ],
        dir.path(),
    );
    let report = json(&dir.path().join("b/bench_report.json"));
    assert_eq!(report["aggregates"]["trials"], 2);
    assert_eq!(report["disturbance"], "wind");
    assert!(report["records"][0]["density_band"].is_number());
    assert!(json(&dir.path().join("b/bench_timing.json"))["planning_ms"]["mean"].is_number());
    for seed in [5, 6] {
        assert!(dir.path().join(format!("b/trial_{seed}.csv")).exists());
    }
}

#[test]
fn bench_json_is_reproducible_across_execution_modes() {
    let dir = tempfile::tempdir().unwrap();
    let common = ["bench", "--density", "0.1", "--extent", "12,6,3", "--trials", "2", "--disturbance", "drag"];
    ok(&[&common[..], &["--out", "a"]].concat(), dir.path());
    ok(&[&common[..], &["--sequential", "--out", "b"]].concat(), dir.path());
    let a = std::fs::read(dir.path().join("a/bench_report.json")).unwrap();
    let b = std::fs::read(dir.path().join("b/bench_report.json")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn bad_inputs_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("cfg.json"), r#"{"K3": 1.0}"#).unwrap();
    let out = gvfnav(&["--config", "cfg.json", "scene", "gen", "--out", "s.json"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("K3"));

    let out = gvfnav(&["scene", "gen", "--style", "cubes", "--out", "s.json"], dir.path());
    assert!(!out.status.success());

    let out = gvfnav(&["run", "--scene", "missing.json", "--start", "1,1,1", "--goal", "2,2,1", "--out-dir", "o"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.json"));

    let out = gvfnav(&["scene", "gen", "--density", "0.7", "--out", "s.json"], dir.path());
    assert!(!out.status.success());
}
