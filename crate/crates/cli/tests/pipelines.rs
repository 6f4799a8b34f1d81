use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const SMALL: [&str; 4] = ["--set", "grid.points=256", "--set", "spectral.points=256"];

fn wki(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wki"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn column(path: impl AsRef<Path>, name: &str) -> Vec<f64> {
    let mut rd = csv::Reader::from_path(path).unwrap();
    let idx = rd
        .headers()
        .unwrap()
        .iter()
        .position(|h| h == name)
        .unwrap();
    rd.records()
        .map(|r| r.unwrap()[idx].parse().unwrap())
        .collect()
}

fn run_ok(dir: &Path, args: &[&str]) {
    let out = wki(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn zero_potential_has_zero_reflection() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["forward", "-o", "out", "--set", "potential.family=zero"];
    args.extend(SMALL);
    run_ok(dir.path(), &args);
    let out = dir.path().join("out");
    assert!(column(out.join("r.csv"), "r_re").iter().all(|v| *v == 0.0));
    assert!(column(out.join("r.csv"), "r_im").iter().all(|v| *v == 0.0));
    assert_eq!(json(out.join("manifest.json"))["status"], "ok");
}

#[test]
fn small_gaussian_forward_diagnostics_are_clean() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["forward", "-o", "out", "--lambda-dump", "--akns-dump"];
    args.extend(SMALL);
    run_ok(dir.path(), &args);
    let out = dir.path().join("out");
    let rep = json(out.join("scattering.json"));
    let d = &rep["scattering"];
    assert!(d["max_unitarity_defect"].as_f64().unwrap() < 1e-10);
    assert!(d["max_det_defect"].as_f64().unwrap() < 1e-10);
    assert!(d["max_abs_r"].as_f64().unwrap() < 0.05);
    assert_eq!(d["winding"], 0);
    assert_eq!(column(out.join("lambda.csv"), "lambda").len(), 401);
    let header = std::fs::read_to_string(out.join("akns.csv")).unwrap();
    assert!(header.starts_with("x,Q_re,Q_im,B_re,B_im,H,p\n"));
    let manifest = json(out.join("manifest.json"));
    for f in [
        "potential.csv",
        "r.csv",
        "lambda.csv",
        "akns.csv",
        "scattering.json",
    ] {
        assert!(
            manifest["outputs"]
                .as_array()
                .unwrap()
                .iter()
                .any(|v| v == f),
            "{f}"
        );
    }
}

#[test]
fn large_sech_is_refused_as_a_regime_outcome() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec![
        "forward",
        "-o",
        "out",
        "--set",
        "potential.family=sech",
        "--set",
        "potential.amplitude=4.0",
    ];
    args.extend(SMALL);
    let out = wki(dir.path(), &args);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().rev().find(|l| l.starts_with('{')).unwrap();
    let rec: Value = serde_json::from_str(line).unwrap();
    assert_eq!(rec["kind"], "possible-bound-state");
    let err = json(dir.path().join("out/error.json"));
    assert!(err["details"]["min_abs_a"].as_f64().unwrap() < 0.5);
    assert_eq!(
        json(dir.path().join("out/manifest.json"))["status"],
        "failed"
    );
}

#[test]
fn soliton_profile_is_refused_by_winding() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec![
        "forward",
        "-o",
        "out",
        "--set",
        "potential.family=soliton",
        "--set",
        "potential.xi=3.0",
        "--set",
        "potential.eta=1.0",
        "--set",
        "grid.half_width=30",
    ];
    args.extend(["--set", "grid.points=1024", "--set", "spectral.points=512"]);
    let out = wki(dir.path(), &args);
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let err = json(dir.path().join("out/error.json"));
    assert_eq!(err["kind"], "possible-bound-state");
    assert_eq!(err["details"]["winding"], 1);
}

#[test]
fn zero_roundtrip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["roundtrip", "-o", "out", "--set", "potential.family=zero"];
    args.extend(SMALL);
    run_ok(dir.path(), &args);
    let rep = json(dir.path().join("out/report.json"));
    assert_eq!(rep["sup_error"].as_f64().unwrap(), 0.0);
    assert_eq!(rep["l2_error"].as_f64().unwrap(), 0.0);
}

#[test]
fn roundtrip_reports_both_epsilon_routes() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["roundtrip", "-o", "out"];
    args.extend(SMALL);
    run_ok(dir.path(), &args);
    let out = dir.path().join("out");
    let rep = json(out.join("report.json"));
    assert!(rep["epsilon_route_gap"].as_f64().unwrap() < 1e-4);
    assert!(rep["epsilon_infinity_gap_m11"].as_f64().unwrap() < 1e-5);
    assert!(rep["epsilon_infinity_gap_e1"].as_f64().unwrap() < 1e-6);
    assert!(rep["sup_error"].as_f64().unwrap() < 5e-3);
    for f in ["q.csv", "hodograph.csv", "cells.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let header = std::fs::read_to_string(out.join("cells.csv")).unwrap();
    assert!(header.starts_with("x_h,t,kind,solver,iterations,residual,dmu_residual,abs_dx_m1_12\n"));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for o in ["a", "b"] {
        let mut args = vec!["roundtrip", "-o", o];
        args.extend(SMALL);
        run_ok(dir.path(), &args);
    }
    for f in [
        "r.csv",
        "q.csv",
        "hodograph.csv",
        "cells.csv",
        "report.json",
    ] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert!(a == b, "{f} differs");
    }
    let strip = |o: &str| {
        let mut m = json(dir.path().join(o).join("manifest.json"));
        m["config"]["output"] = Value::Null;
        m
    };
    assert_eq!(strip("a"), strip("b"));
}

#[test]
fn inverse_reads_forward_output() {
    let dir = tempfile::tempdir().unwrap();
    let mut fwd = vec!["forward", "-o", "fwd"];
    fwd.extend(SMALL);
    run_ok(dir.path(), &fwd);
    let mut inv = vec![
        "inverse",
        "-o",
        "inv",
        "--data",
        "fwd/r.csv",
        "--set",
        "time.times=[0.0, 0.1]",
    ];
    inv.extend(SMALL);
    run_ok(dir.path(), &inv);
    let inv_dir = dir.path().join("inv");
    let x = column(inv_dir.join("q_0.csv"), "x");
    let q = column(inv_dir.join("q_0.csv"), "q_re");
    let q0 = column(dir.path().join("fwd/potential.csv"), "re");
    assert_eq!(x.len(), 256);
    let err = q
        .iter()
        .zip(&q0)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(err < 5e-3, "{err}");
    assert!(inv_dir.join("q_1.csv").exists());
    assert_eq!(
        json(inv_dir.join("reconstruction.json"))["reconstructions"]
            .as_array()
            .unwrap()
            .len(),
        2
    );
}

#[test]
fn inverse_rejects_data_on_another_grid() {
    let dir = tempfile::tempdir().unwrap();
    let mut fwd = vec!["forward", "-o", "fwd"];
    fwd.extend(SMALL);
    run_ok(dir.path(), &fwd);
    let out = wki(
        dir.path(),
        &[
            "inverse",
            "-o",
            "inv",
            "--data",
            "fwd/r.csv",
            "--set",
            "grid.points=256",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bad_configs_exit_with_input_code() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "[grid]\npionts = 12\n").unwrap();
    assert_eq!(
        wki(dir.path(), &["forward", "--config", "bad.toml"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        wki(dir.path(), &["forward", "--set", "time.cfl=-1"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        wki(dir.path(), &["forward", "--set", "grid.points=7"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        wki(dir.path(), &["inverse", "-o", "x"]).status.code(),
        Some(1)
    );
}

#[test]
fn config_file_paths_resolve_next_to_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let sub = dir.path().join("cfg");
    std::fs::create_dir(&sub).unwrap();
    let mut text = String::from("x,re,im\n");
    for k in 0..64 {
        let x = -8.0 + k as f64 * 0.25;
        text.push_str(&format!("{x},{},0\n", 0.05 * (-x * x).exp()));
    }
    std::fs::write(sub.join("q.csv"), text).unwrap();
    std::fs::write(
        sub.join("run.toml"),
        "output = \"ignored\"\n[grid]\nhalf_width = 8.0\npoints = 64\n[spectral]\npoints = 64\n[potential]\nfile = \"q.csv\"\n",
    )
    .unwrap();
    run_ok(
        dir.path(),
        &["forward", "--config", "cfg/run.toml", "-o", "out"],
    );
    assert!(dir.path().join("out/r.csv").exists());
}

#[test]
fn evolve_and_compare_pde_agree_for_small_data() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["evolve", "-o", "ev", "--set", "time.times=[0.0, 0.1]"];
    args.extend(SMALL);
    run_ok(dir.path(), &args);
    let t = column(dir.path().join("ev/snapshots.csv"), "t");
    assert_eq!(t.len(), 512);
    let summary = json(dir.path().join("ev/summary.json"));
    assert!(summary["max_e1_drift"].as_f64().unwrap() < 1e-10);

    let mut args = vec!["compare-pde", "-o", "cmp", "--set", "time.times=[0.0, 0.1]"];
    args.extend(SMALL);
    run_ok(dir.path(), &args);
    let sup = column(dir.path().join("cmp/compare.csv"), "sup_diff");
    assert_eq!(sup.len(), 2);
    assert!(sup.iter().all(|v| *v < 5e-3), "{sup:?}");
    assert!(dir.path().join("cmp/compare_1.csv").exists());
}

#[test]
fn bursting_soliton_marks_singular_samples() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(
        dir.path(),
        &[
            "soliton",
            "-o",
            "sol",
            "--set",
            "soliton.xi=1.0",
            "--set",
            "soliton.eta=1.0",
            "--set",
            "grid.points=256",
        ],
    );
    let rep = json(dir.path().join("sol/soliton.json"));
    assert_eq!(rep["bursting"], true);
    assert!(rep["peak_closed_form"].is_null());
    let header = std::fs::read_to_string(dir.path().join("sol/soliton.csv")).unwrap();
    assert!(header.starts_with("x,q_abs,q_re,q_im\n"));
}

#[test]
fn blowup_is_reported_with_its_location() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec![
        "evolve",
        "-o",
        "ev",
        "--set",
        "time.times=[0.05]",
        "--set",
        "time.blowup_guard=0.01",
    ];
    args.extend(SMALL);
    let out = wki(dir.path(), &args);
    assert_eq!(out.status.code(), Some(2));
    let summary = json(dir.path().join("ev/summary.json"));
    let event = &summary["guard_events"][0];
    assert!(event["abs_q"].as_f64().unwrap() > 0.01);
    assert!(event["x"].as_f64().unwrap().abs() < 2.0);
    assert_eq!(
        json(dir.path().join("ev/error.json"))["kind"],
        "evolution-diverged"
    );
}

#[test]
fn roundtrip_error_shrinks_under_refinement() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["roundtrip", "-o", "out", "--convergence"];
    args.extend(SMALL);
    run_ok(dir.path(), &args);
    let rep = json(dir.path().join("out/report.json"));
    assert!(
        rep["convergence"]["sup_ratio"].as_f64().unwrap() >= 2.0,
        "{}",
        rep["convergence"]
    );
}
