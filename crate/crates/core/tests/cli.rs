use std::path::Path;
use std::process::{Command, Output};

fn escvs(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_escvs"))
        .args(args)
        .env("ESCVS_OUT_DIR", out)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_variant(dir: &Path, preset: &str, from: &str, to: &str) -> String {
    let text = escvs::scenario::preset_source(preset).unwrap().replace(from, to);
    assert!(text.contains(to));
    let path = dir.join("variant.toml");
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

#[test]
fn presets_list_and_show() {
    let dir = tempfile::tempdir().unwrap();
    let o = escvs(&["presets", "list"], dir.path());
    assert!(o.status.success());
    let listed = String::from_utf8(o.stdout).unwrap();
    assert_eq!(listed.lines().collect::<Vec<_>>(), ["satellite-table1", "quadcopter-table2", "unicycle-table3"]);

    let o = escvs(&["presets", "show", "unicycle-table3"], dir.path());
    assert!(o.status.success());
    assert!(String::from_utf8(o.stdout).unwrap().contains("omega_rad_per_s = 20.0"));
}

#[test]
fn run_writes_trajectory_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let o = escvs(&["run", "unicycle-table3", "--t-final", "0.5", "--decimate", "5"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("unicycle-table3.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "time_s,omega,v,x,y,heading,u_hat,h,J,u_1,u_2");
    assert_eq!(lines.next().unwrap().split(',').count(), 11);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("unicycle-table3.summary.json")).unwrap()).unwrap();
    assert_eq!(summary["initial_j"], 2.0);
    assert!(summary["final_window_j"].as_f64().unwrap() >= 0.0);
}

#[test]
fn out_flag_beats_environment() {
    let dir = tempfile::tempdir().unwrap();
    let explicit = dir.path().join("explicit");
    let o = escvs(
        &["run", "quadcopter-table2", "--t-final", "0.2", "--out", explicit.to_str().unwrap()],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(explicit.join("quadcopter-table2.csv").exists());
    assert!(!dir.path().join("quadcopter-table2.csv").exists());
}

#[test]
fn validation_failure_exits_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_variant(dir.path(), "unicycle-table3", "omega_rad_per_s = 20.0", "omega_rad_per_s = 0.0");
    let o = escvs(&["run", &path], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("omega"));
}

#[test]
fn singularity_exits_with_code_3_and_time() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_variant(
        dir.path(),
        "quadcopter-table2",
        "euler0_rad = [0.1745, 0.2618, 0.2094]",
        "euler0_rad = [0.0, 1.56, 0.0]",
    );
    let o = escvs(&["run", &path], dir.path());
    assert_eq!(o.status.code(), Some(3));
    let err = stderr(&o);
    assert!(err.contains("t = "), "{err}");
}

#[test]
fn missing_file_exits_with_code_4() {
    let dir = tempfile::tempdir().unwrap();
    let o = escvs(&["run", "/nonexistent/scenario.toml"], dir.path());
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let o = escvs(
        &["run", "unicycle-table3", "--t-final", "0.1", "--out", blocker.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn empty_sweep_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = escvs(&["sweep", "unicycle-table3", "--param", "k", "--values"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_reports_every_row() {
    let dir = tempfile::tempdir().unwrap();
    let o = escvs(
        &["sweep", "unicycle-table3", "--param", "k", "--values", "2.5,5,10", "--t-final", "1"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let rows: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("unicycle-table3.sweep.json")).unwrap()).unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r["report"]["final_window_j"].is_number()));
}

#[test]
fn compare_averaged_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = || {
        let o = escvs(&["compare-averaged", "unicycle-table3", "--t-final", "0.5"], dir.path());
        assert!(o.status.success(), "{}", stderr(&o));
        std::fs::read_to_string(dir.path().join("unicycle-table3.closeness.json")).unwrap()
    };
    let first = run();
    assert_eq!(first, run());
    let report: serde_json::Value = serde_json::from_str(&first).unwrap();
    assert_eq!(report["omegas"], serde_json::json!([20.0, 40.0, 80.0]));
    assert!(dir.path().join("unicycle-table3.omega40.averaged.csv").exists());
}
