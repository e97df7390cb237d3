//! End-to-end tests of the `blowup` binary: exit codes, artifact layout,
//! and byte-identical reproduction.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_blowup"))
}

fn write_cfg(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("run.cfg");
    std::fs::write(&path, body).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

const TRANSFORM_CFG: &str = "sigma = x^2\nh = 1\nxi = 1\nx1 = 0\nx2 = inf\nt_max = 4\n";

#[test]
fn verdict_explodes_exit_zero_with_closed_form_tag() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), TRANSFORM_CFG);
    let out = run(&["verdict", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(doc["report"]["verdict"], "ExplodesFiniteTime");
    assert!(doc["report"]["closed_form"]
        .as_str()
        .unwrap()
        .contains("one-barrier"));
    assert!(doc["config_hash"].as_str().unwrap().len() == 64);
    assert!(doc["version"].as_str().unwrap().contains('.'));
}

#[test]
fn verdict_linear_drift_no_explosion() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "b = x\nxi = 1\n");
    let out = run(&["verdict", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success());
    let doc: serde_json::Value =
        serde_json::from_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(doc["report"]["verdict"], "NoExplosion");
}

#[test]
fn verdict_boundary_exponent_unknown_exit_two() {
    // a 1/b tail exponent just above 1 sits on the classifier boundary
    // (neither geometric decay nor a clearly shallow slope): without a hint
    // the verdict must stay Unknown (exit 2)
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "b = x^1.02\nxi = 1\n");
    let out = run(&["verdict", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));

    // and the hint flag resolves it to a decided verdict
    let out = run(&[
        "verdict",
        "--config",
        cfg.to_str().unwrap(),
        "--hint-tail-exponent",
        "1.02",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn usage_errors_exit_one() {
    // no config, no coefficients
    let out = run(&["verdict"]);
    assert_eq!(out.status.code(), Some(1));
    // bad flag
    let out = run(&["verdict", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(1));
    // missing config file
    let out = run(&["verdict", "--config", "/nonexistent/path.cfg"]);
    assert_eq!(out.status.code(), Some(1));
    // malformed config
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "not a key value line\n");
    let out = run(&["verdict", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn simulate_requires_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), TRANSFORM_CFG);
    let out_dir = dir.path().join("out");
    let out = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("seed"), "{msg}");
}

#[test]
fn simulate_writes_samples_and_metadata_with_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), &format!("{TRANSFORM_CFG}paths = 200\n"));
    let out_dir = dir.path().join("out");
    let out = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "11",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(out_dir.join("samples.csv")).unwrap();
    assert!(csv.starts_with("# version="));
    assert!(csv.lines().nth(1).unwrap().starts_with("# config_hash="));
    assert_eq!(csv.lines().nth(2).unwrap(), "time,censored");
    assert_eq!(csv.lines().count(), 203);
    let meta: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(out_dir.join("metadata.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(meta["sampler"]["seed"], 11);
    assert_eq!(meta["sampler"]["n_paths"], 200);
    // the resolved config rides along for reproduction
    let resolved = std::fs::read_to_string(out_dir.join("config.resolved")).unwrap();
    assert!(resolved.contains("seed=11"));
}

#[test]
fn identical_config_reproduces_byte_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), &format!("{TRANSFORM_CFG}paths = 500\nseed = 3\n"));
    let mut bodies = Vec::new();
    for name in ["a", "b"] {
        let out_dir = dir.path().join(name);
        let out = run(&[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert!(out.status.success());
        bodies.push((
            std::fs::read(out_dir.join("samples.csv")).unwrap(),
            std::fs::read(out_dir.join("metadata.json")).unwrap(),
        ));
    }
    assert_eq!(bodies[0], bodies[1]);
}

#[test]
fn cli_seed_overrides_file_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), &format!("{TRANSFORM_CFG}paths = 100\nseed = 1\n"));
    let d1 = dir.path().join("d1");
    let d2 = dir.path().join("d2");
    let args_base = ["simulate", "--config", cfg.to_str().unwrap()];
    let out = bin()
        .args(args_base)
        .args(["--out", d1.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success());
    let out = bin()
        .args(args_base)
        .args(["--out", d2.to_str().unwrap(), "--seed", "2"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let s1 = std::fs::read_to_string(d1.join("samples.csv")).unwrap();
    let s2 = std::fs::read_to_string(d2.join("samples.csv")).unwrap();
    assert_ne!(s1, s2, "seed override must change the draw");
    // and the hash commits to the override
    assert_ne!(s1.lines().nth(1), s2.lines().nth(1));
}

#[test]
fn dist_all_writes_curves_and_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "sigma = x^2\nh = 1\nxi = 1\nx1 = 0\nx2 = inf\nt_max = 4\npaths = 2000\nseed = 5\n\
         x_lo = 0.0588\nx_hi = 1.6e6\ngrid = log\nnx = 400\nnt = 400\n",
    );
    let out_dir = dir.path().join("out");
    let out = run(&[
        "dist",
        "--config",
        cfg.to_str().unwrap(),
        "--method",
        "all",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["dist_analytic.csv", "dist_mc.csv", "dist_pde.csv", "samples.csv"] {
        assert!(out_dir.join(f).exists(), "{f} missing");
    }
    let cmp: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(out_dir.join("comparison.json")).unwrap(),
    )
    .unwrap();
    let ap: f64 = cmp["pairwise_sup_gaps"]["analytic_vs_pde"]
        .as_str()
        .unwrap()
        .parse()
        .unwrap();
    assert!(ap < 5e-3, "analytic vs pde gap {ap}");
    let am: f64 = cmp["pairwise_sup_gaps"]["analytic_vs_mc"]
        .as_str()
        .unwrap()
        .parse()
        .unwrap();
    // 2000 paths: 3 binomial SE ~ 3.4e-2
    assert!(am < 5e-2, "analytic vs mc gap {am}");
}

#[test]
fn dist_no_finite_barrier_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    // sigma = 1: both barriers infinite, no explosion, no distribution
    let cfg = write_cfg(dir.path(), "sigma = 1\nh = 1\nxi = 0\nt_max = 1\n");
    let out_dir = dir.path().join("out");
    let out = run(&[
        "dist",
        "--config",
        cfg.to_str().unwrap(),
        "--method",
        "analytic",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("no finite barrier"), "{msg}");
}

#[test]
fn laplace_triangle_and_monotonicity() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "sigma = x^2\nh = 1\nxi = 1\nx1 = 0\nx2 = inf\nt_max = 60\nt_points = 6000\n\
         lambda = 0.1,1,10\nres_c = 1\nres_x_lo = -20\nres_x_hi = 1\nres_nx = 2101\nres_eval = 0\n",
    );
    let out = run(&["laplace", "--config", cfg.to_str().unwrap(), "--method", "analytic"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value =
        serde_json::from_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    let vals: Vec<f64> = doc["results"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["laplace_from_cdf"].as_str().unwrap().parse().unwrap())
        .collect();
    assert!(vals[0] > vals[1] && vals[1] > vals[2], "not decreasing: {vals:?}");
    for r in doc["results"].as_array().unwrap() {
        let gap: f64 = r["gap"].as_str().unwrap().parse().unwrap();
        assert!(gap < 1e-3, "resolvent gap {gap}");
    }
}

#[test]
fn h4check_fast_path_and_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "f = t\n");
    let out = run(&["h4check", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success());
    let doc: serde_json::Value =
        serde_json::from_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(doc["report"]["verdict"], "Holds");

    let cfg = write_cfg(dir.path(), "f = exp(exp(t))\n");
    let out = run(&["h4check", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success());
    let doc: serde_json::Value =
        serde_json::from_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(doc["report"]["verdict"], "Fails");
}

#[test]
fn odetime_exact_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "b = x^2\na = 1\nxi = 1\n");
    let out = run(&["odetime", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success());
    let doc: serde_json::Value =
        serde_json::from_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    let t: f64 = doc["explosion_time"].as_str().unwrap().parse().unwrap();
    assert!((t - 1.0).abs() < 1e-8, "{t}");

    let cfg = write_cfg(dir.path(), "b = x\na = 1\nxi = 1\n");
    let out = run(&["odetime", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success());
    let doc: serde_json::Value =
        serde_json::from_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(doc["explosion_time"], "inf");
}

#[test]
fn odetime_bounded_noise_bracket() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "b = x^2\na = 1\nxi = 1\nr = 0.25\nl = 0\nnoise = bounded\nnoise_inf = -0.5\nnoise_sup = 0.5\n",
    );
    let out = run(&["odetime", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value =
        serde_json::from_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    let b = doc["bracket"].as_array().unwrap();
    let lo: f64 = b[0].as_str().unwrap().parse().unwrap();
    let hi: f64 = b[1].as_str().unwrap().parse().unwrap();
    // deterministic time 1 sits inside [T(xi + sup), T(xi + inf)]
    assert!(lo < 1.0 && 1.0 < hi, "bracket [{lo}, {hi}]");
}
