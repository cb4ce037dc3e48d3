//! Written outputs: determinism, manifest completeness and CSV layout.

mod common;

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use structinfo::cbit::{cbit_integral, Normalization};
use structinfo::output::{run_stage, Manifest, Stage, MANIFEST_FILE};
use structinfo::pipeline::Study;
use structinfo::presets::preset;

fn listing(dir: &Path) -> BTreeSet<String> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect()
}

#[test]
fn repeated_runs_are_byte_identical_and_fully_listed() {
    let study = Study::new(&common::small(4.0)).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ma = run_stage(&study, Stage::Cbit, Normalization::Absolute, a.path()).unwrap().manifest;
    let mb = run_stage(&study, Stage::Cbit, Normalization::Absolute, b.path()).unwrap().manifest;
    assert_eq!(ma, mb);

    let files = listing(a.path());
    assert_eq!(files, listing(b.path()));
    for f in &files {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let listed: BTreeSet<String> = ma.files.iter().map(|f| f.path.clone()).collect();
    let mut expected = files.clone();
    expected.remove(MANIFEST_FILE);
    assert_eq!(listed, expected);

    let loaded = Manifest::load(a.path()).unwrap();
    assert_eq!(loaded, ma);
    assert!(loaded.check(a.path()).unwrap().is_empty());
    let csv = String::from_utf8(loaded.read(a.path(), "cbit_report.csv").unwrap()).unwrap();
    assert!(csv.starts_with(
        "example,boundary,peak_cbits_per_m,integral_cbits_per_m,percent,window_start_us,window_end_us,normalization_mode\n"
    ));
    assert_eq!(csv.lines().count(), 1 + 2 * study.config.variations.len());
    assert!(!csv.contains('\r'));
}

#[test]
fn stages_write_only_their_outputs() {
    let study = Study::new(&common::small(3.5)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let m = run_stage(&study, Stage::Simulate, Normalization::Absolute, dir.path()).unwrap().manifest;
    assert!(m.files.iter().all(|f| f.path.starts_with("base_") || f.path == "config_resolved.toml"));
    assert!(m.entry("base_v_2.0034us.csv").is_some(), "{:?}", m.files.iter().map(|f| &f.path).collect::<Vec<_>>());

    let dir = tempfile::tempdir().unwrap();
    let m = run_stage(&study, Stage::Balance, Normalization::Absolute, dir.path()).unwrap().manifest;
    assert!(m.entry("balance_summary.csv").is_some());
    assert!(m.entry("position_balance.csv").is_some());
    assert!(m.entry("cbit_report.csv").is_none());
}

#[test]
fn csv_columns_and_number_format() {
    let study = Study::new(&common::small(3.5)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    run_stage(&study, Stage::Balance, Normalization::Absolute, dir.path()).unwrap();
    let text = fs::read_to_string(dir.path().join("base_sensors.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("time_us,v_left,v_right"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "0.0054");
    let mantissa = row[1].split('e').next().unwrap().trim_start_matches('-');
    assert_eq!(mantissa.len(), 10, "9 significant digits in {}", row[1]);
    assert_eq!(text.lines().count(), 1 + study.grid().n_steps);

    let balance = fs::read_to_string(dir.path().join("position_balance.csv")).unwrap();
    assert!(balance.starts_with(
        "time_us,i_kin,i_pot,i_total,source_total,q_f,q_v0,q_v,q_t0,q_t,source_left,cumulative_left,source_right,cumulative_right\n"
    ));
}

#[test]
fn two_layer_position_transmits_information() {
    let study = Study::new(&preset("fig3").unwrap()).unwrap();
    let a = study.analyze().unwrap();
    let va = a.variation("position").unwrap();
    let ex = study.example_series(va, Normalization::Absolute).unwrap();
    let window = study.config.analysis.window();
    let left = cbit_integral(&ex.left, window).unwrap();
    let right = cbit_integral(&ex.right, window).unwrap();
    assert!(right > 0.0 && left > 0.0);
    assert!(right > 1e-3 * left, "transmitted {right} vs reflected {left}");
}
