use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
name = "tiny"

[grid]
n_cells = 200
dx = 50.0e-6
dt = 1.08e-8
end_time = 3.5e-6

[matrix]
rho = 2400.0
c_p = 4000.0

[[layers]]
x_start = 0.004
x_end = 0.006
rho = 2600.0
c_p = 4500.0

[excitation]
center_frequency = 2.0e6
n_cycles = 2

[[variations]]
name = "position"
kind = "layer_position"
delta_cells = 1

[[variations]]
name = "density"
kind = "density_const_cp"
delta = 1.0

[recording]
snapshot_times_us = [2.0]

[analysis]
window_us = [0.0, 3.5]
interaction_windows_us = []
"#;

fn structinfo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_structinfo")).args(args).output().unwrap()
}

fn config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn cbit_report_writes_manifest_and_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = structinfo(&["cbit-report", &cfg, "--out", out.to_str().unwrap(), "--threads", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("total reflection"));
    assert!(out.join("manifest.json").is_file());
    assert!(out.join("cbit_report.csv").is_file());
}

#[test]
fn relative_normalization_and_stride_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = structinfo(&[
        "cbit-report",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--normalization",
        "relative",
        "--stride",
        "100",
        "--quiet",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    let csv = fs::read_to_string(out.join("cbit_report.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",relative")));
    assert!(out.join("base_v_1.0854us.csv").is_file());
}

#[test]
fn simulate_writes_base_outputs_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = structinfo(&["simulate", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(out.join("base_sensors.csv").is_file());
    assert!(!out.join("position_diff_sensors.csv").exists());
}

#[test]
fn configuration_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.toml");
    assert_eq!(structinfo(&["simulate", missing.to_str().unwrap()]).status.code(), Some(2));

    let cfg = config(dir.path(), &SMALL.replace("c_p = 4500.0", "c_p = 6000.0"));
    let o = structinfo(&["simulate", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("CFL") || String::from_utf8_lossy(&o.stderr).contains("layer"));

    let cfg = config(dir.path(), &SMALL.replace("[matrix]", "[matrix]\ncolour = 1"));
    assert_eq!(structinfo(&["diff", &cfg]).status.code(), Some(2));
    assert_eq!(structinfo(&["verify", "fig7"]).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), SMALL);
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = blocker.join("sub");
    let o = structinfo(&["simulate", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn verify_homogeneous_passes() {
    let o = structinfo(&["verify", "homogeneous"]);
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert_eq!(o.status.code(), Some(0), "{stdout}");
    assert!(stdout.lines().any(|l| l.starts_with("PASS")));
    assert!(stdout.ends_with("verify homogeneous: PASS\n"));
}
