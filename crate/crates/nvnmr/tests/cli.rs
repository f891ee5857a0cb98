// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn nvnmr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nvnmr")).args(args).output().expect("spawn nvnmr")
}

fn demo_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("demo/nn_pair.toml")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let headers = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (headers, rows)
}

fn column(headers: &[String], name: &str) -> usize {
    headers.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

#[test]
fn lattice_table_nearest_neighbours() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("table.csv");
    ok(&nvnmr(&["lattice-table", "--shells", "1", "--field-axis", "1,1,1", "--out", s(&out)]));
    let (h, rows) = read_csv(&out);
    let (freq, mult) = (column(&h, "omega_d_hz"), column(&h, "multiplicity"));
    let mut got: Vec<(f64, usize)> =
        rows.iter().map(|r| (r[freq].parse::<f64>().unwrap().abs(), r[mult].parse().unwrap())).collect();
    got.sort_by(|a, b| b.0.total_cmp(&a.0));
    assert_eq!(got.len(), 2);
    assert!((got[0].0 - 3096.0).abs() / 3096.0 < 0.02 && got[0].1 == 1, "{got:?}");
    assert!((got[1].0 - 1032.0).abs() / 1032.0 < 0.02 && got[1].1 == 3, "{got:?}");

    let stdout = nvnmr(&["lattice-table", "--shells", "2"]);
    ok(&stdout);
    assert_eq!(String::from_utf8(stdout.stdout).unwrap().lines().count(), 5);
}

#[test]
fn missing_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = nvnmr(&["simulate", "fid", "--config", "/no/such/file.toml", "--out", s(&dir.path().join("x"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("config not found"));
}

#[test]
fn invalid_config_reports_violations() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    let text = fs::read_to_string(demo_config()).unwrap().replace("n1 = 256", "n1 = 0");
    fs::write(&cfg, text).unwrap();
    let out = nvnmr(&["simulate", "jspec2d", "--config", s(&cfg), "--out", s(&dir.path().join("x"))]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("invalid config") && err.contains("n1"), "{err}");
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(nvnmr(&[]).status.code(), Some(2));
    assert_eq!(nvnmr(&["transform", "--in", "a"]).status.code(), Some(2));
    assert_eq!(nvnmr(&["transform", "--in", "a", "--out", "b", "--window", "hann,cos"]).status.code(), Some(2));
    let help = nvnmr(&["simulate", "--help"]);
    assert_eq!(help.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&help.stdout).contains("T2n_indirect"));
}

#[test]
fn simulation_is_deterministic_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    let text = fs::read_to_string(demo_config()).unwrap().replace("n1 = 256", "n1 = 64").replace("n2 = 64", "n2 = 12");
    let text = text.replace("[config]", "[config]\nreadout_model = { stochastic = { seed = 11, shots = 500 } }");
    fs::write(&cfg, text).unwrap();
    let (a, b) = (dir.path().join("a.nvds"), dir.path().join("b.nvds"));
    ok(&nvnmr(&["simulate", "jspec2d", "--config", s(&cfg), "--out", s(&a), "--workers", "1"]));
    ok(&nvnmr(&["simulate", "jspec2d", "--config", s(&cfg), "--out", s(&b), "--workers", "4"]));
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let side = |p: &Path| fs::read(format!("{}.json", p.display())).unwrap();
    assert_eq!(side(&a), side(&b));
}

#[test]
fn export_and_localize() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("fid.toml");
    fs::write(
        &cfg,
        "[config]\nn1 = 32\n[[system.nuclei]]\ncouplings = { a_par = 6.0e4, a_perp = 1.0e5, phi = 0.0 }\n",
    )
    .unwrap();
    let grid = dir.path().join("g.nvds");
    let spec = dir.path().join("s.nvds");
    ok(&nvnmr(&["simulate", "fid", "--config", s(&cfg), "--out", s(&grid)]));
    ok(&nvnmr(&["transform", "--in", s(&grid), "--out", s(&spec), "--window", "none,none", "--zerofill", "2"]));

    let csv_grid = dir.path().join("g.csv");
    ok(&nvnmr(&["export", "--in", s(&grid), "--csv", s(&csv_grid)]));
    let (h, rows) = read_csv(&csv_grid);
    assert_eq!(h, ["t1_s", "t2_s", "re", "im"]);
    assert_eq!(rows.len(), 32);

    let csv_spec = dir.path().join("s.csv");
    ok(&nvnmr(&["export", "--in", s(&spec), "--csv", s(&csv_spec)]));
    let (h, rows) = read_csv(&csv_spec);
    assert_eq!(h, ["f1_hz", "f2_hz", "re", "im", "power"]);
    assert_eq!(rows.len(), 64);

    let wrong = nvnmr(&["transform", "--in", s(&spec), "--out", s(&dir.path().join("t.nvds"))]);
    assert_eq!(wrong.status.code(), Some(1));

    let peaks = dir.path().join("peaks.csv");
    fs::write(&peaks, "f1_hz,f2_hz\n1969000.0,3000.0\n1965000.0,0.0\n").unwrap();
    let out = dir.path().join("loc.csv");
    ok(&nvnmr(&["localize", "--peaks", s(&peaks), "--out", s(&out)]));
    let (h, rows) = read_csv(&out);
    assert_eq!(rows.len(), 2);
    let r = column(&h, "r_m");
    let r0: f64 = rows[0][r].parse().unwrap();
    assert!(r0 > 0.5e-10 && r0 < 1e-8, "{r0}");
}

#[test]
fn demo_pipeline_assigns_nearest_neighbour_pair() {
    let dir = tempfile::tempdir().unwrap();
    let (grid, spec, reports) = (dir.path().join("p.nvds"), dir.path().join("s.nvds"), dir.path().join("reports"));
    ok(&nvnmr(&["simulate", "jspec2d", "--config", s(&demo_config()), "--out", s(&grid)]));
    ok(&nvnmr(&["transform", "--in", s(&grid), "--out", s(&spec)]));
    ok(&nvnmr(&[
        "analyze",
        "--in",
        s(&spec),
        "--lattice-shells",
        "3",
        "--tolerance-hz",
        "50",
        "--out-dir",
        s(&reports),
    ]));
    for name in ["peaks.csv", "hyperfine.csv", "assignments.csv"] {
        assert!(reports.join(name).exists(), "{name}");
    }
    let (h, rows) = read_csv(&reports.join("assignments.csv"));
    let (status, label, peak) = (column(&h, "status"), column(&h, "shell"), column(&h, "peak_index"));
    let strongest: Vec<&Vec<String>> = rows.iter().filter(|r| r[peak] == "0" || r[peak] == "1").collect();
    assert!(!strongest.is_empty());
    for r in strongest {
        assert_eq!(r[status], "assigned");
        assert_eq!(r[label], "NN");
    }
}
