//! Drives the built binary end to end: artifact layout, the committed
//! golden file, manifest semantics, determinism, and error records.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ribs-cli"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "command {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn manifest(dir: &Path) -> String {
    fs::read_to_string(dir.join("manifest.txt")).expect("manifest written")
}

#[test]
fn toy_run_matches_the_committed_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    run_ok(&["toy", "--out", out]);

    let got = fs::read(dir.path().join("comparison.csv")).unwrap();
    let golden =
        fs::read(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden/toy_comparison.csv")).unwrap();
    assert_eq!(got, golden, "toy CSV deviates from the committed golden bytes");

    let m = manifest(dir.path());
    assert!(m.contains("seed = 11"), "default seed missing from manifest:\n{m}");
    assert!(m.contains("tau = 0.000001"), "default threshold missing from manifest:\n{m}");
}

#[test]
fn identical_hydro_configs_produce_identical_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let base = [
        "hydro-recon", "--fine", "40", "--coarse", "20", "--method", "ibs-2", "--noise", "0.01",
        "--seed", "5", "--out",
    ];
    let mut args = base.to_vec();
    args.push(a.path().to_str().unwrap());
    run_ok(&args);
    let mut args = base.to_vec();
    args.push(b.path().to_str().unwrap());
    run_ok(&args);
    for name in ["sigma.csv", "S.csv", "trace_omega1.csv", "trace_omega2.csv", "results.txt"] {
        let x = fs::read(a.path().join(name)).unwrap();
        let y = fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name} differs between identical runs");
    }
}

#[test]
fn manifest_threshold_follows_the_noise_level() {
    let clean = tempfile::tempdir().unwrap();
    let noisy = tempfile::tempdir().unwrap();
    let base = ["schrodinger-recon", "--fine", "60", "--coarse", "20", "--method", "ibs-2"];

    let mut args = base.to_vec();
    args.extend(["--noise", "0", "--out", clean.path().to_str().unwrap()]);
    run_ok(&args);
    let mut args = base.to_vec();
    args.extend(["--noise", "0.05", "--out", noisy.path().to_str().unwrap()]);
    run_ok(&args);

    assert!(manifest(clean.path()).contains("tau = 0.01"));
    assert!(manifest(noisy.path()).contains("tau = 0.06"));
    for name in ["q_re.csv", "q_im.csv", "q_re.pgm", "trace.csv", "data_re.csv", "results.txt"] {
        assert!(clean.path().join(name).exists(), "{name} missing from artifact directory");
    }
}

#[test]
fn flags_override_config_file_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.txt");
    fs::write(&cfg, "experiment = schrodinger\nfine = 30\ncoarse = 10\nmethod = ibs-1\nseed = 5\n")
        .unwrap();
    let out = dir.path().join("run");
    run_ok(&[
        "schrodinger-recon",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "7",
        "--out",
        out.to_str().unwrap(),
    ]);
    let m = manifest(&out);
    assert!(m.contains("seed = 7"), "flag did not override the file:\n{m}");
    assert!(m.contains("fine = 30"), "file value dropped:\n{m}");
}

#[test]
fn a_manifest_reruns_the_experiment_it_records() {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    run_ok(&[
        "bounds-radius",
        "--fine",
        "40",
        "--eps-list",
        "0,0.1",
        "--out",
        first.path().to_str().unwrap(),
    ]);
    run_ok(&[
        "bounds-radius",
        "--config",
        first.path().join("manifest.txt").to_str().unwrap(),
        "--out",
        second.path().to_str().unwrap(),
    ]);
    let x = fs::read(first.path().join("radius.csv")).unwrap();
    let y = fs::read(second.path().join("radius.csv")).unwrap();
    assert_eq!(x, y, "rerun from manifest deviates");
}

#[test]
fn radius_column_is_monotone_in_the_margin() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&[
        "bounds-radius",
        "--fine",
        "40",
        "--eps-list",
        "0,0.05,0.1,0.15",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    let csv = fs::read_to_string(dir.path().join("radius.csv")).unwrap();
    let radii: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(radii.len(), 4);
    for w in radii.windows(2) {
        assert!(w[1] >= w[0], "radius decreased: {radii:?}");
    }
}

#[test]
fn config_errors_emit_a_machine_readable_record() {
    let bad_tau = run(&["schrodinger-recon", "--tau", "1.5", "--out", "/tmp/unused"]);
    assert_eq!(bad_tau.status.code(), Some(2));
    let record: serde_json::Value =
        serde_json::from_slice(&bad_tau.stderr).expect("stderr is one JSON record");
    assert_eq!(record["error"], "Config");
    assert!(record["message"].as_str().unwrap().contains("tau"));

    let bad_grids = run(&["hydro-recon", "--fine", "50", "--coarse", "20", "--out", "/tmp/unused"]);
    assert_eq!(bad_grids.status.code(), Some(2));
    let record: serde_json::Value = serde_json::from_slice(&bad_grids.stderr).unwrap();
    assert_eq!(record["error"], "Config");
}

#[test]
fn selfcheck_reports_every_suite() {
    let out = run_ok(&["selfcheck"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("selfcheck: 7 of 7 passed"), "unexpected output:\n{text}");
}
