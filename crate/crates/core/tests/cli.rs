//! End-to-end tests of the `ntpjcm` binary.

use std::path::Path;
use std::process::{Command, Output};

fn ntpjcm(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ntpjcm"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn read(dir: &Path, file: &str) -> String {
    std::fs::read_to_string(dir.join(file)).unwrap_or_else(|e| panic!("{file}: {e}"))
}

#[test]
fn run_writes_requested_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = ntpjcm(
        &["run", "--nbar", "1", "--tmax", "2", "--samples", "5", "--observables", "Re,N1,F2", "--name", "a"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(dir.path(), "a.csv");
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "t,Re,N1,F2");
    assert_eq!(lines.len(), 6);
    assert!(lines[1].starts_with("0,1,1,"));
    assert!(lines[5].starts_with("2,"));
}

#[test]
fn invalid_parameters_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for bad in [
        &["run", "--kappa", "-0.1"][..],
        &["run", "--samples", "1"],
        &["run", "--observables", "Re,bogus"],
        &["run", "--cutoff", "1,1", "--nbar", "5"],
        &["preset", "fig99"],
    ] {
        let out = ntpjcm(bad, dir.path());
        assert_eq!(out.status.code(), Some(2), "{bad:?}");
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: "));
    }
    assert!(std::fs::read_dir(dir.path()).unwrap().next().is_none());
}

#[test]
fn oversized_oracle_request_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = ntpjcm(&["run", "--nbar", "30", "--oracle-check"], dir.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# comment\nnbar = 1\ntmax = 4\nsamples = 3\nobservables = N1\n").unwrap();
    let out = ntpjcm(
        &["run", "--config", cfg.to_str().unwrap(), "--tmax", "1", "--name", "c"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(dir.path(), "c.csv");
    let t: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(t, ["0", "0.5", "1"]);
}

#[test]
fn sweep_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = ntpjcm(
        &[
            "sweep", "--range", "kappa=0,0.01", "--range", "delta=0:2:2", "--nbar", "1", "--tmax", "1",
            "--samples", "3", "--observables", "Re",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = read(dir.path(), "manifest.tsv");
    let lines: Vec<&str> = manifest.lines().collect();
    assert_eq!(
        lines,
        [
            "run_0000.csv\tkappa=0;delta=0",
            "run_0001.csv\tkappa=0;delta=2",
            "run_0002.csv\tkappa=0.01;delta=0",
            "run_0003.csv\tkappa=0.01;delta=2",
        ]
    );
    for l in lines {
        let file = l.split('\t').next().unwrap();
        assert_eq!(read(dir.path(), file).lines().count(), 4);
    }
}

#[test]
fn preset_writes_one_file_per_curve() {
    let dir = tempfile::tempdir().unwrap();
    let out = ntpjcm(&["preset", "fig1", "--tmax", "1", "--samples", "3", "--svg"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for i in 1..=3 {
        assert!(read(dir.path(), &format!("fig1_curve{i}.csv")).starts_with("t,Re"));
    }
    assert!(read(dir.path(), "fig1.svg").contains("<svg"));

    let pinned = tempfile::tempdir().unwrap();
    let out = ntpjcm(&["preset", "fig1", "--kappa", "0.01", "--tmax", "1", "--samples", "3"], pinned.path());
    assert!(out.status.success());
    assert!(pinned.path().join("fig1_curve3.csv").exists());
    assert!(!pinned.path().join("fig1_curve1.csv").exists());
}

#[test]
fn presets_lists_every_figure() {
    let out = Command::new(env!("CARGO_BIN_EXE_ntpjcm")).arg("presets").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 16);
    assert!(text.lines().all(|l| l.starts_with("fig")));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let args = [
        "run", "--nbar1", "2", "--nbar2", "1.5", "--delta", "3", "--kappa", "0.02", "--tmax", "3", "--samples",
        "31", "--observables", "N1,N2,Re,Rg,G2_1,G2_2,S1,S2,F1,F2,sigma3",
    ];
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(ntpjcm(&args, a.path()).status.success());
    assert!(ntpjcm(&args, b.path()).status.success());
    assert_eq!(read(a.path(), "run.csv"), read(b.path(), "run.csv"));
}
