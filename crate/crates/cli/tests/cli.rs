use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn latdyn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_latdyn")).args(args).output().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write(dir: &Path, name: &str, v: &Value) -> String {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_vec_pretty(v).unwrap()).unwrap();
    p.to_str().unwrap().to_string()
}

fn bump(amp: f64, center: f64, radius: f64) -> Value {
    json!({ "kind": "bump", "amplitude": [amp], "center": [center], "radius": radius })
}

fn simulate_config(rho: f64, integrator: &str, dt: f64) -> Value {
    json!({
        "lattice": {
            "basis": [[1.0]],
            "epsilon": 0.0625,
            "omega": { "lo": [0.0], "hi": [1.0] },
            "omega_tilde": { "lo": [-0.125], "hi": [1.125] }
        },
        "model": { "name": "harmonic_chain", "k": 1.0 },
        "delta": 0.0625,
        "physics": { "rho": rho, "nu": 1.0, "dt": dt, "t_end": 0.25, "integrator": integrator, "sample_every": 4 },
        "w0": bump(1.0, 0.5, 0.3),
        "w1": bump(0.5, 0.5, 0.3)
    })
}

#[test]
fn tensor_of_harmonic_chain_is_k() {
    let out = latdyn(&["tensor", "--model", "harmonic-chain", "--k", "2.5"]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert!((v["tensor"][0][0][0][0].as_f64().unwrap() - 2.5).abs() < 1e-12);
    assert_eq!(v["symmetric"], json!(true));
}

#[test]
fn tensor_of_two_dimensional_model_is_symmetric() {
    let out = latdyn(&["tensor", "--model", "cauchy-born-split", "--dim", "2", "--mu", "0.5", "--k", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout_json(&out)["max_skew_response"].as_f64().unwrap() < 1e-10);
}

#[test]
fn check_model_passes_for_shipped_models() {
    for args in [vec!["--model", "harmonic-chain"], vec!["--model", "cauchy-born-split", "--dim", "2"]] {
        let mut all = vec!["check-model", "--samples", "50"];
        all.extend(args);
        let out = latdyn(&all);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
        assert_eq!(stdout_json(&out)["all_passed"], json!(true));
    }
}

#[test]
fn simulate_then_audit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "sim.json", &simulate_config(1.0, "rk4", 0.005));
    let out_dir = dir.path().join("run");
    let out = latdyn(&["simulate", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("ledger.csv").exists());
    let summary: Value = serde_json::from_slice(&std::fs::read(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["all_passed"], json!(true));

    let traj = out_dir.join("trajectory.bin");
    let out = latdyn(&["audit", "--traj", traj.to_str().unwrap()]);
    assert!(out.status.success());
    let audit = stdout_json(&out);
    assert_eq!(audit["edie_relative_residual"], summary["edie_relative_residual"]);

    let out = latdyn(&["audit", "--traj", traj.to_str().unwrap(), "--tol", "0"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn viscous_simulation_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "rk4.json", &simulate_config(0.0, "rk4", 1e-4));
    let out = latdyn(&["simulate", "--config", &cfg, "--out", dir.path().join("rk4").to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));

    // The explicit Euler flow balances energy only to first order in dt.
    let mut euler = simulate_config(0.0, "viscous_explicit", 0.001);
    let out = latdyn(&["simulate", "--config", &write(dir.path(), "e1.json", &euler), "--out", dir.path().join("e1").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    euler["edie_relative"] = json!(0.2);
    let out = latdyn(&["simulate", "--config", &write(dir.path(), "e2.json", &euler), "--out", dir.path().join("e2").to_str().unwrap()]);
    assert!(out.status.success());
}

#[test]
fn step_above_stability_bound_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "sim.json", &simulate_config(1.0, "rk4", 0.2));
    let out = latdyn(&["simulate", "--config", &cfg, "--out", dir.path().join("run").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn recover_reports_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "rec.json",
        &json!({
            "fields": [bump(1.0, 0.5, 0.4)],
            "eps_seq": [0.125, 0.0625, 0.03125],
            "model": { "name": "harmonic_chain", "k": 1.0 }
        }),
    );
    let out = latdyn(&["recover", "--config", &cfg]);
    assert!(out.status.success());
    assert_eq!(stdout_json(&out)["tables"][0]["rows"].as_array().unwrap().len(), 3);
}

#[test]
fn converge_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "sweep.json",
        &json!({
            "eps_seq": [0.0625, 0.03125],
            "initial_data": { "w0": bump(1.0, 0.5, 0.4), "w1": bump(0.5, 0.5, 0.3) },
            "model": { "name": "harmonic_chain", "k": 1.0 },
            "physics": { "rho": 1.0, "nu": 1.0, "t_end": 0.25 },
            "sample_times": [0.125, 0.25]
        }),
    );
    let out_dir = dir.path().join("report");
    let out = latdyn(&["converge", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(out_dir.join("sweep_rows.csv").exists());
    assert!(out_dir.join("sweep_summary.json").exists());
}

#[test]
fn malformed_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", &json!({ "eps_seq": [0.1], "unknown": 1 }));
    let out = latdyn(&["converge", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}
