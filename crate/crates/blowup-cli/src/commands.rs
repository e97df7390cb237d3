//! Subcommand implementations. Each returns an [`Outcome`] (decided vs
//! undecided) or a [`CliError`] that the caller maps onto exit codes.

use std::path::{Path, PathBuf};

use blowup::analytic::{TailHints, TransformProblem};
use blowup::curve::DistCurve;
use blowup::ext_real::ExtReal;
use blowup::osgood::{
    bounded_noise_bracket, ode_explosion_time, osgood_verdict, NoiseDescriptor, OsgoodProblem,
};
use blowup::pde::{
    extract_cdf, laplace_from_cdf, log_uniform_grid, solve_forward, solve_resolvent_ode, BcCase,
    PdeProblem, ResolventProblem,
};
use blowup::sim::{
    check_h4, check_h4_scan, empirical_cdf, simulate_exit_transformed, simulate_sde_euler,
    NoiseSpec, SamplePool,
};
use blowup::verdict::Verdict;
use blowup::FunctionExpr;
use serde_json::{json, Value};

use crate::config::Config;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Decided,
    Undecided,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numerical(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<crate::config::ConfigError> for CliError {
    fn from(e: crate::config::ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

fn usage(msg: impl std::fmt::Display) -> CliError {
    CliError::Usage(msg.to_string())
}

fn numerical(msg: impl std::fmt::Display) -> CliError {
    CliError::Numerical(msg.to_string())
}

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Headline scalars are printed with 17 significant digits, byte-stable.
fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn provenance(cfg: &Config) -> (String, String) {
    (VERSION.to_string(), cfg.hash())
}

/// CSV payloads carry provenance as leading comment lines.
fn csv_with_provenance(cfg: &Config, body: &str) -> String {
    let (version, hash) = provenance(cfg);
    format!("# version={version}\n# config_hash={hash}\n{body}")
}

fn write_file(dir: &Path, name: &str, content: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| usage(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, content)
        .map_err(|e| usage(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

fn emit(report: &Value, out: Option<&Path>, cfg: &Config, name: &str) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(report).expect("report serialization cannot fail");
    println!("{text}");
    if let Some(dir) = out {
        write_file(dir, name, &text)?;
        log::info!("wrote {}", dir.join(name).display());
        // a canonical copy of the effective configuration rides along so a
        // run can be reproduced from its output directory alone
        write_file(dir, "config.resolved", &cfg.canonical())?;
    }
    Ok(())
}

/// Which library route a config describes.
enum ProblemKind {
    Transform,
    Osgood,
}

fn problem_kind(cfg: &Config) -> Result<ProblemKind, CliError> {
    match cfg.get("problem") {
        Some("transform") => Ok(ProblemKind::Transform),
        Some("osgood") => Ok(ProblemKind::Osgood),
        Some(other) => Err(usage(format!(
            "problem={other:?} is not transform or osgood"
        ))),
        None => match (cfg.contains("sigma"), cfg.contains("b")) {
            (true, false) => Ok(ProblemKind::Transform),
            (false, true) => Ok(ProblemKind::Osgood),
            (true, true) => Err(usage(
                "both sigma and b present; set problem=transform or problem=osgood",
            )),
            (false, false) => Err(usage(
                "no problem coefficients: set sigma (transform route) or b (drift route)",
            )),
        },
    }
}

fn build_transform(cfg: &Config) -> Result<TransformProblem, CliError> {
    let sigma = cfg.require_expr("sigma", "x")?;
    let h = cfg.expr_or("h", "t", "1")?;
    let xi = cfg.require_f64("xi")?;
    let x1 = cfg.ext_or("x1", ExtReal::NegInf)?;
    let x2 = cfg.ext_or("x2", ExtReal::PosInf)?;
    let fallback = cfg.get_f64("hint_tail_exponent")?;
    let hints = TailHints {
        left: cfg.get_f64("hint_left")?.or(fallback),
        right: cfg.get_f64("hint_right")?.or(fallback),
        h_square: cfg.get_f64("hint_h_square")?,
    };
    TransformProblem::new(sigma, h, xi, x1, x2, hints).map_err(usage)
}

fn build_osgood(cfg: &Config) -> Result<OsgoodProblem, CliError> {
    let a = cfg.expr_or("a", "t", "1")?;
    let b = cfg.require_expr("b", "x")?;
    let xi = cfg.require_f64("xi")?;
    let r = cfg.f64_or("r", xi)?;
    let l = cfg.ext_or("l", ExtReal::NegInf)?;
    let noise = match cfg.get_or("noise", "none").as_str() {
        "none" => NoiseDescriptor::None,
        "bounded" => NoiseDescriptor::Bounded {
            inf: cfg.require_f64("noise_inf")?,
            sup: cfg.require_f64("noise_sup")?,
        },
        other => {
            return Err(usage(format!(
                "noise={other:?} is not none or bounded (path noise enters via the library API)"
            )))
        }
    };
    let mut p = OsgoodProblem::new(a, b, r, l, xi, noise).map_err(usage)?;
    p.b_tail_hint = cfg
        .get_f64("hint_b")?
        .or(cfg.get_f64("hint_tail_exponent")?);
    p.a_tail_hint = cfg.get_f64("hint_a")?;
    Ok(p)
}

/// Time grid: explicit `t_grid` list, else `t_points` points uniform on
/// `(0, t_max]`.
fn time_grid(cfg: &Config) -> Result<Vec<f64>, CliError> {
    if let Some(grid) = cfg.get_f64_list("t_grid")? {
        if grid.is_empty() || grid.windows(2).any(|w| w[1] <= w[0]) || grid[0] <= 0.0 {
            return Err(usage("t_grid must be positive and strictly increasing"));
        }
        return Ok(grid);
    }
    let t_max = cfg.require_f64("t_max")?;
    let n = cfg.usize_or("t_points", 20)?;
    if t_max <= 0.0 || n == 0 {
        return Err(usage("t_max must be positive and t_points nonzero"));
    }
    Ok((1..=n).map(|i| t_max * i as f64 / n as f64).collect())
}

fn require_seed(cfg: &Config) -> Result<u64, CliError> {
    cfg.get_u64("seed")?
        .ok_or_else(|| usage("stochastic subcommands require a seed (key seed or --seed)"))
}

// ---------------------------------------------------------------------------
// verdict

pub fn cmd_verdict(cfg: &Config, out: Option<&Path>) -> Result<Outcome, CliError> {
    let verdict = match problem_kind(cfg)? {
        ProblemKind::Transform => build_transform(cfg)?.explosion_verdict(),
        ProblemKind::Osgood => osgood_verdict(&build_osgood(cfg)?),
    };
    let (version, hash) = provenance(cfg);
    let report = json!({
        "command": "verdict",
        "version": version,
        "config_hash": hash,
        "report": verdict,
    });
    emit(&report, out, cfg, "verdict.json")?;
    Ok(match verdict.verdict {
        Verdict::Unknown => Outcome::Undecided,
        _ => Outcome::Decided,
    })
}

// ---------------------------------------------------------------------------
// dist

fn analytic_curve(cfg: &Config, grid: &[f64]) -> Result<DistCurve, CliError> {
    match problem_kind(cfg)? {
        ProblemKind::Transform => build_transform(cfg)?
            .analytic_cdf(grid)
            .map_err(numerical),
        ProblemKind::Osgood => Err(usage(
            "method=analytic needs the transform route (sigma/h); the drift route has no closed-form distribution",
        )),
    }
}

fn mc_curve(cfg: &Config, grid: &[f64]) -> Result<(DistCurve, SamplePool), CliError> {
    let seed = require_seed(cfg)?;
    let paths = cfg.usize_or("paths", 10_000)?;
    let t_max = cfg.f64_or("t_max", *grid.last().unwrap())?;
    let pool = match problem_kind(cfg)? {
        ProblemKind::Transform => {
            let p = build_transform(cfg)?;
            simulate_exit_transformed(&p, seed, paths, t_max).map_err(numerical)?
        }
        ProblemKind::Osgood => {
            let p = build_osgood(cfg)?;
            let f = cfg.expr_or("f", "t", "0")?;
            let threshold = cfg.f64_or("threshold", 1e8)?;
            simulate_sde_euler(&p, &NoiseSpec::new(f), seed, paths, t_max, threshold)
                .map_err(numerical)?
        }
    };
    let curve = empirical_cdf(&pool, grid).map_err(numerical)?;
    Ok((curve, pool))
}

fn bc_from_config(cfg: &Config) -> Result<BcCase, CliError> {
    match cfg.get_or("bc", "both1").as_str() {
        "both1" => Ok(BcCase::Both1),
        "right" => Ok(BcCase::RightOnly),
        "left" => Ok(BcCase::LeftOnly),
        other => Err(usage(format!("bc={other:?} is not both1, right, or left"))),
    }
}

fn pde_curve(cfg: &Config, grid: &[f64]) -> Result<DistCurve, CliError> {
    // The forward solver is time-homogeneous: for transform problems it
    // requires h identically 1 and derives the drift (1/2) sigma sigma'
    // unless an explicit `drift` key overrides it.
    let xi = cfg.require_f64("xi")?;
    let sigma = cfg.require_expr("sigma", "x")?;
    let drift = match cfg.get("drift") {
        Some(_) => cfg.require_expr("drift", "x")?,
        None => {
            if cfg.get_or("h", "1") != "1" {
                return Err(usage(
                    "method=pde needs h identically 1 (time-homogeneous coefficients) or an explicit drift key",
                ));
            }
            let ds = sigma.diff();
            let src = format!("0.5*({})*({})", sigma.source_text(), ds.source_text());
            FunctionExpr::parse(&src, "x")
                .map_err(|e| numerical(format!("derived drift {src:?} failed to parse: {e}")))?
        }
    };
    let x_lo = cfg.require_f64("x_lo")?;
    let x_hi = cfg.require_f64("x_hi")?;
    let nx = cfg.usize_or("nx", 400)?;
    let nt = cfg.usize_or("nt", 400)?;
    let t_final = cfg.f64_or("t_final", *grid.last().unwrap())?;
    let xs = match cfg.get_or("grid", "uniform").as_str() {
        "uniform" => (0..nx)
            .map(|i| x_lo + (x_hi - x_lo) * i as f64 / (nx - 1) as f64)
            .collect(),
        "log" => log_uniform_grid(x_lo, x_hi, nx).map_err(usage)?,
        other => return Err(usage(format!("grid={other:?} is not uniform or log"))),
    };
    let p = PdeProblem::new(drift, sigma, bc_from_config(cfg)?, xs, t_final, nt)
        .map_err(usage)?;
    let u = solve_forward(&p).map_err(numerical)?;
    let full = extract_cdf(&u, xi).map_err(numerical)?;
    // resample onto the requested grid
    let cdf: Vec<f64> = grid.iter().map(|&t| full.interp(t)).collect();
    DistCurve::new(grid.to_vec(), cdf, Some("pde forward solve".to_string()))
        .map_err(numerical)
}

pub fn cmd_dist(cfg: &Config, out: Option<&Path>, method: &str) -> Result<Outcome, CliError> {
    let grid = time_grid(cfg)?;
    let out_dir = out.ok_or_else(|| usage("dist writes files; --out DIR is required"))?;

    let mut curves: Vec<(String, DistCurve)> = Vec::new();
    let want = |m: &str| method == m || method == "all";
    if want("analytic") {
        curves.push(("analytic".to_string(), analytic_curve(cfg, &grid)?));
    }
    if want("mc") {
        let (curve, pool) = mc_curve(cfg, &grid)?;
        write_file(
            out_dir,
            "samples.csv",
            &csv_with_provenance(cfg, &pool.to_csv()),
        )?;
        curves.push(("mc".to_string(), curve));
    }
    if want("pde") {
        curves.push(("pde".to_string(), pde_curve(cfg, &grid)?));
    }
    if curves.is_empty() {
        return Err(usage(format!(
            "method={method:?} is not analytic, mc, pde, or all"
        )));
    }

    for (name, curve) in &curves {
        write_file(
            out_dir,
            &format!("dist_{name}.csv"),
            &csv_with_provenance(cfg, &curve.to_csv()),
        )?;
    }

    let mut gaps = serde_json::Map::new();
    for i in 0..curves.len() {
        for j in i + 1..curves.len() {
            let gap = curves[i].1.sup_gap_on(&curves[j].1, &grid);
            gaps.insert(
                format!("{}_vs_{}", curves[i].0, curves[j].0),
                Value::String(fmt17(gap)),
            );
        }
    }
    let (version, hash) = provenance(cfg);
    let report = json!({
        "command": "dist",
        "version": version,
        "config_hash": hash,
        "methods": curves.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>(),
        "pairwise_sup_gaps": gaps,
    });
    emit(&report, out, cfg, "comparison.json")?;
    Ok(Outcome::Decided)
}

// ---------------------------------------------------------------------------
// laplace

pub fn cmd_laplace(cfg: &Config, out: Option<&Path>, method: &str) -> Result<Outcome, CliError> {
    let lambdas = cfg
        .get_f64_list("lambda")?
        .ok_or_else(|| usage("laplace requires a lambda key (comma-separated values)"))?;
    if lambdas.iter().any(|&l| l <= 0.0) {
        return Err(usage("all lambda values must be positive"));
    }

    // CDF source per --method (analytic by default)
    let grid = time_grid(cfg)?;
    let curve = match method {
        "analytic" | "all" => analytic_curve(cfg, &grid)?,
        "pde" => pde_curve(cfg, &grid)?,
        "mc" => mc_curve(cfg, &grid)?.0,
        other => {
            return Err(usage(format!(
                "method={other:?} is not analytic, mc, pde, or all"
            )))
        }
    };

    // resolvent route, when the config describes one
    let resolvent = if cfg.contains("res_c") {
        let g = cfg.expr_or("res_g", "x", "0")?;
        let a = cfg.f64_or("res_a", 0.0)?;
        let bshift = cfg.f64_or("res_bshift", 0.0)?;
        let c = cfg.require_f64("res_c")?;
        let x_lo = cfg.require_f64("res_x_lo")?;
        let x_hi = cfg.require_f64("res_x_hi")?;
        let nx = cfg.usize_or("res_nx", 2001)?;
        // the resolvent lives in the (possibly transformed) coordinate of
        // its own ODE; res_eval names the evaluation point there and only
        // defaults to xi when the coordinates coincide
        let eval_at = match cfg.get_f64("res_eval")? {
            Some(v) => v,
            None => cfg.require_f64("xi")?,
        };
        Some((g, a, bshift, c, x_lo, x_hi, nx, eval_at))
    } else {
        None
    };

    let mut rows = Vec::new();
    for &lambda in &lambdas {
        let from_cdf = laplace_from_cdf(&curve, lambda).map_err(numerical)?;
        let mut row = serde_json::Map::new();
        row.insert("lambda".to_string(), Value::String(fmt17(lambda)));
        row.insert("laplace_from_cdf".to_string(), Value::String(fmt17(from_cdf)));
        if let Some((g, a, bshift, c, x_lo, x_hi, nx, xi)) = &resolvent {
            let xs: Vec<f64> = (0..*nx)
                .map(|i| x_lo + (x_hi - x_lo) * i as f64 / (*nx - 1) as f64)
                .collect();
            let p = ResolventProblem::new(g.clone(), *a, *bshift, *c, lambda, xs.clone())
                .map_err(usage)?;
            let w = solve_resolvent_ode(&p).map_err(numerical)?;
            let i = xs.partition_point(|&v| v <= *xi).clamp(1, xs.len() - 1);
            let wx = w[i - 1]
                + (w[i] - w[i - 1]) * (xi - xs[i - 1]) / (xs[i] - xs[i - 1]);
            row.insert("resolvent_w".to_string(), Value::String(fmt17(wx)));
            row.insert(
                "gap".to_string(),
                Value::String(fmt17((from_cdf - wx).abs())),
            );
        }
        rows.push(Value::Object(row));
    }

    let (version, hash) = provenance(cfg);
    let report = json!({
        "command": "laplace",
        "version": version,
        "config_hash": hash,
        "cdf_source": if method == "all" { "analytic" } else { method },
        "results": rows,
    });
    emit(&report, out, cfg, "laplace.json")?;
    Ok(Outcome::Decided)
}

// ---------------------------------------------------------------------------
// simulate

pub fn cmd_simulate(cfg: &Config, out: Option<&Path>) -> Result<Outcome, CliError> {
    let out_dir = out.ok_or_else(|| usage("simulate writes files; --out DIR is required"))?;
    let seed = require_seed(cfg)?;
    let paths = cfg.usize_or("paths", 10_000)?;
    let t_max = cfg.require_f64("t_max")?;
    let pool = match problem_kind(cfg)? {
        ProblemKind::Transform => {
            let p = build_transform(cfg)?;
            simulate_exit_transformed(&p, seed, paths, t_max).map_err(numerical)?
        }
        ProblemKind::Osgood => {
            let p = build_osgood(cfg)?;
            let f = cfg.expr_or("f", "t", "0")?;
            let threshold = cfg.f64_or("threshold", 1e8)?;
            simulate_sde_euler(&p, &NoiseSpec::new(f), seed, paths, t_max, threshold)
                .map_err(numerical)?
        }
    };
    write_file(
        out_dir,
        "samples.csv",
        &csv_with_provenance(cfg, &pool.to_csv()),
    )?;
    let sidecar: Value = serde_json::from_str(&pool.metadata_json())
        .expect("library sidecar is valid JSON");
    let (version, hash) = provenance(cfg);
    let report = json!({
        "command": "simulate",
        "version": version,
        "config_hash": hash,
        "censored_fraction": fmt17(pool.censored_fraction()),
        "sampler": sidecar,
    });
    emit(&report, out, cfg, "metadata.json")?;
    Ok(Outcome::Decided)
}

// ---------------------------------------------------------------------------
// h4check

pub fn cmd_h4check(cfg: &Config, out: Option<&Path>) -> Result<Outcome, CliError> {
    let f = cfg.require_expr("f", "t")?;
    let n_max = cfg.usize_or("n_max", 10_000)?;
    let report = match (cfg.get_f64("h4_m")?, cfg.get_f64("h4_p")?) {
        (Some(m), Some(p)) => check_h4(&f, m, p, n_max),
        (None, None) => check_h4_scan(&f, n_max),
        _ => return Err(usage("h4_m and h4_p must be given together or not at all")),
    };
    let undecided = matches!(report.verdict, blowup::H4Verdict::Unknown);
    let (version, hash) = provenance(cfg);
    let doc = json!({
        "command": "h4check",
        "version": version,
        "config_hash": hash,
        "report": report,
    });
    emit(&doc, out, cfg, "h4check.json")?;
    Ok(if undecided {
        Outcome::Undecided
    } else {
        Outcome::Decided
    })
}

// ---------------------------------------------------------------------------
// odetime

pub fn cmd_odetime(cfg: &Config, out: Option<&Path>) -> Result<Outcome, CliError> {
    let p = build_osgood(cfg)?;
    let t0 = cfg.f64_or("t0", 0.0)?;
    let (version, hash) = provenance(cfg);

    let mut doc = serde_json::Map::new();
    doc.insert("command".to_string(), Value::String("odetime".to_string()));
    doc.insert("version".to_string(), Value::String(version));
    doc.insert("config_hash".to_string(), Value::String(hash));

    let outcome = match &p.noise {
        NoiseDescriptor::None => match ode_explosion_time(&p, t0, p.xi) {
            Ok(ExtReal::Finite(t)) => {
                doc.insert("explosion_time".to_string(), Value::String(fmt17(t)));
                Outcome::Decided
            }
            Ok(_) => {
                doc.insert(
                    "explosion_time".to_string(),
                    Value::String("inf".to_string()),
                );
                Outcome::Decided
            }
            Err(e) => {
                let msg = e.to_string();
                if msg.contains("inconclusive") || msg.contains("Unknown") {
                    doc.insert("note".to_string(), Value::String(msg));
                    Outcome::Undecided
                } else {
                    return Err(numerical(msg));
                }
            }
        },
        NoiseDescriptor::Bounded { .. } => match bounded_noise_bracket(&p) {
            Ok((lo, hi)) => {
                doc.insert(
                    "bracket".to_string(),
                    json!([fmt17(lo), fmt17(hi)]),
                );
                Outcome::Decided
            }
            Err(e) => return Err(numerical(e.to_string())),
        },
        NoiseDescriptor::Path(_) => {
            return Err(usage("odetime supports noise none or bounded"))
        }
    };
    let doc = Value::Object(doc);
    emit(&doc, out, cfg, "odetime.json")?;
    Ok(outcome)
}
