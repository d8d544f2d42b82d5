//! Behavior of the `novqe` binary: exit codes, output files, and
//! byte-for-byte reproducibility under a fixed seed.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> String {
    format!("{}/../../fixtures/{name}.fcidump", env!("CARGO_MANIFEST_DIR"))
}

fn novqe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_novqe"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("novqe-cli-test-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

#[test]
fn fci_subcommand_prints_the_sector_ground_energy() {
    let out = novqe(&["fci", &fixture("h4")]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let value: f64 = text.trim().parse().unwrap();
    assert!((value - -1.969512165218).abs() < 1e-9, "got {value}");
}

#[test]
fn info_subcommand_reports_fixture_facts() {
    let out = novqe(&["info", &fixture("hexatriene_90")]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("spatial orbitals: 6"));
    assert!(text.contains("electrons: 3 alpha, 3 beta"));
    assert!(text.contains("qubits: 12"));
}

#[test]
fn missing_fixture_field_exits_with_code_2() {
    let dir = temp_dir("missing-fixture");
    let out = novqe(&["grow", "--out", dir.to_str().unwrap(), "--seed", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("fixture"), "stderr: {stderr}");
}

#[test]
fn unknown_flag_exits_nonzero_with_usage() {
    let out = novqe(&["grow", "--frobnicate", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unreadable_fixture_is_a_runtime_error() {
    let dir = temp_dir("no-such-fixture");
    let out = novqe(&[
        "grow",
        "--fixture",
        "no/such/file.fcidump",
        "--out",
        dir.to_str().unwrap(),
        "--seed",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

fn grow_h2(dir: &Path, seed: &str) {
    let out = novqe(&[
        "grow",
        "--fixture",
        &fixture("h2"),
        "--out",
        dir.to_str().unwrap(),
        "--seed",
        seed,
        "--k",
        "1",
        "--m-max",
        "2",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn grow_writes_outputs_and_is_byte_reproducible() {
    let dir_a = temp_dir("grow-a");
    let dir_b = temp_dir("grow-b");
    grow_h2(&dir_a, "7");
    grow_h2(&dir_b, "7");

    for name in ["checkpoint.json", "summary.json"] {
        assert!(dir_a.join(name).exists(), "{name} missing");
    }
    // checkpoint identical byte for byte
    let cp_a = std::fs::read(dir_a.join("checkpoint.json")).unwrap();
    let cp_b = std::fs::read(dir_b.join("checkpoint.json")).unwrap();
    assert_eq!(cp_a, cp_b);
    // summary identical modulo the timestamp line
    let strip = |path: &Path| -> String {
        std::fs::read_to_string(path)
            .unwrap()
            .lines()
            .filter(|l| !l.contains("generated_at_unix"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(strip(&dir_a.join("summary.json")), strip(&dir_b.join("summary.json")));
    // the summary echoes defaulted config values
    let summary = std::fs::read_to_string(dir_a.join("summary.json")).unwrap();
    for key in ["init_sigma2", "fd_step", "max_calls", "cutoff", "n_boot", "batch"] {
        assert!(summary.contains(key), "summary missing {key}");
    }
}

#[test]
fn measure_consumes_a_checkpoint_and_writes_a_trajectory() {
    let grow_dir = temp_dir("measure-grow");
    grow_h2(&grow_dir, "9");
    let measure_dir = temp_dir("measure-run");
    let checkpoint = grow_dir.join("checkpoint.json");
    let run = |out_dir: &Path| {
        let out = novqe(&[
            "measure",
            "--fixture",
            &fixture("h2"),
            "--checkpoint",
            checkpoint.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
            "--seed",
            "3",
            "--mode",
            "adaptive",
            "--batch",
            "100000",
            "--budget",
            "2000000",
            "--n-boot",
            "60",
            "--mc-samples",
            "60",
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    };
    run(&measure_dir);
    let csv = std::fs::read_to_string(measure_dir.join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "step,total_shots,channel,i,j,estimate_energy,two_sigma,sigma_mc"
    );
    assert!(lines.count() >= 2, "trajectory should hold pilot and steps");
    assert!(measure_dir.join("summary.json").exists());

    // trajectory reproducibility
    let again = temp_dir("measure-run-b");
    run(&again);
    assert_eq!(
        std::fs::read(measure_dir.join("trajectory.csv")).unwrap(),
        std::fs::read(again.join("trajectory.csv")).unwrap()
    );
}

#[test]
fn measure_without_checkpoint_exits_with_code_2() {
    let dir = temp_dir("measure-nocp");
    let out = novqe(&[
        "measure",
        "--fixture",
        &fixture("h2"),
        "--out",
        dir.to_str().unwrap(),
        "--seed",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("checkpoint"), "stderr: {stderr}");
}
