//! Deterministic Osgood calculus: the `A` and `B` integrals, exact ODE
//! solutions and explosion times, the heuristic hypothesis checks, the
//! explosion verdict for noise-driven integral equations, and the
//! bounded-noise explosion-time bracket.
//!
//! The governing integral equation is
//! `X(t) = xi + g(t) + int_0^t a(s) b(X(s)) ds` with `a > 0`, `b >= 0`
//! non-decreasing beyond a threshold `r`. Explosion in finite time is
//! equivalent (under the hypotheses below) to convergence of the Osgood
//! integral `int_r^inf ds / b(s)`.

use serde::Serialize;

use crate::expr::{EvalError, FunctionExpr};
use crate::ext_real::ExtReal;
use crate::improper::{classify_improper_fn, ImproperKind, ImproperVerdict};
use crate::quad::{integrate, QuadError};
use crate::roots::{self, RootError};
use crate::verdict::{CheckResult, Evidence, ExplosionVerdict, HypothesisReport, Verdict};

#[derive(Debug, Clone, thiserror::Error)]
pub enum OsgoodError {
    #[error("invalid problem: {0}")]
    InvalidInput(String),
    #[error("b vanishes or is negative near x = {0}")]
    BadB(f64),
    #[error("t = {0} lies at or beyond the explosion time")]
    BeyondExplosion(f64),
    #[error("improper-integral classifier inconclusive: {0}")]
    Inconclusive(String),
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("quadrature failure: {0}")]
    Quad(#[from] QuadError),
    #[error("root finding failure: {0}")]
    Root(#[from] RootError),
}

/// The additive noise term `g` of the integral equation.
#[derive(Debug, Clone, Serialize)]
pub enum NoiseDescriptor {
    /// No noise: the equation is a deterministic ODE.
    None,
    /// Noise known only through bounds `inf <= g(t) <= sup`.
    Bounded { inf: f64, sup: f64 },
    /// A sampled path `(t_i, g(t_i))`, strictly increasing in `t`.
    Path(Vec<(f64, f64)>),
}

/// Drift-and-noise problem data: `a` in `t`, `b` in `x`, thresholds `r`
/// (monotonicity of `b`) and `l` (positivity of `b`), start `xi`, noise `g`.
#[derive(Debug, Clone)]
pub struct OsgoodProblem {
    pub a: FunctionExpr,
    pub b: FunctionExpr,
    pub r: f64,
    pub l: ExtReal,
    pub xi: f64,
    pub noise: NoiseDescriptor,
    /// Tail exponent hint for `1/b`, forwarded to the improper classifier.
    pub b_tail_hint: Option<f64>,
    /// Tail exponent hint for `a`, for the `A_t(inf)` classification.
    pub a_tail_hint: Option<f64>,
}

impl OsgoodProblem {
    pub fn new(
        a: FunctionExpr,
        b: FunctionExpr,
        r: f64,
        l: ExtReal,
        xi: f64,
        noise: NoiseDescriptor,
    ) -> Result<Self, OsgoodError> {
        if ExtReal::Finite(xi) <= l {
            return Err(OsgoodError::InvalidInput(format!(
                "xi = {xi} must exceed the positivity threshold l = {l}"
            )));
        }
        if let NoiseDescriptor::Bounded { inf, sup } = noise {
            if inf > sup {
                return Err(OsgoodError::InvalidInput(format!(
                    "noise bounds inverted: inf = {inf} > sup = {sup}"
                )));
            }
        }
        if let NoiseDescriptor::Path(p) = &noise {
            if p.len() < 2 || p.windows(2).any(|w| w[1].0 <= w[0].0) {
                return Err(OsgoodError::InvalidInput(
                    "noise path needs at least two samples with increasing times".into(),
                ));
            }
        }
        Ok(OsgoodProblem {
            a,
            b,
            r,
            l,
            xi,
            noise,
            b_tail_hint: None,
            a_tail_hint: None,
        })
    }

    pub fn with_b_tail_hint(mut self, p: f64) -> Self {
        self.b_tail_hint = Some(p);
        self
    }

    pub fn with_a_tail_hint(mut self, p: f64) -> Self {
        self.a_tail_hint = Some(p);
        self
    }

    /// Sampled structural checks on `a` and `b` (heuristic evidence).
    ///
    /// Violations are reported, not rejected: the verdict degrades to
    /// Unknown when a check fails.
    pub fn structure_checks(&self) -> Vec<CheckResult> {
        let mut out = Vec::new();

        // a(t) > 0 on a dense grid over (0, 100]; t = 0 is excluded since a
        // single boundary zero (e.g. a = sqrt t) does not affect the integrals
        let mut bad_a = None;
        for i in 1..=400 {
            let t = i as f64 * 0.25;
            match self.a.eval(t) {
                Ok(v) if v > 0.0 => {}
                Ok(v) => {
                    bad_a = Some((t, v));
                    break;
                }
                Err(_) => {}
            }
        }
        out.push(match bad_a {
            None => CheckResult::pass("a-positive", "a(t) > 0 on the sampled grid [0, 100]"),
            Some((t, v)) => {
                CheckResult::fail("a-positive", format!("a({t}) = {v} is not positive"))
            }
        });

        // b >= 0 everywhere sampled, non-decreasing on [r, inf)
        let mut bad_sign = None;
        let mut bad_mono = None;
        let mut prev: Option<f64> = None;
        for k in 0..=60 {
            let x = self.r + 0.01 * 1.5f64.powi(k);
            match self.b.eval(x) {
                Ok(v) => {
                    if v < 0.0 && bad_sign.is_none() {
                        bad_sign = Some((x, v));
                    }
                    if let Some(p) = prev {
                        if v < p * (1.0 - 1e-12) && bad_mono.is_none() {
                            bad_mono = Some((x, v, p));
                        }
                    }
                    prev = Some(v);
                }
                Err(_) => break,
            }
        }
        out.push(match bad_sign {
            None => CheckResult::pass("b-nonnegative", "b >= 0 on the sampled grid"),
            Some((x, v)) => {
                CheckResult::fail("b-nonnegative", format!("b({x}) = {v} is negative"))
            }
        });
        out.push(match bad_mono {
            None => CheckResult::pass(
                "b-monotone",
                format!("b non-decreasing on the geometric grid from r = {}", self.r),
            ),
            Some((x, v, p)) => CheckResult::fail(
                "b-monotone",
                format!("b({x}) = {v} drops below the previous sample {p}"),
            ),
        });
        out
    }

    /// The Osgood integral `int_{max(r, xi)}^inf ds / b(s)`, classified.
    pub fn osgood_integral(&self) -> ImproperVerdict {
        let b = self.b.clone();
        classify_improper_fn(
            &move |s: f64| b.eval(s).map(|v| 1.0 / v),
            self.r.max(self.xi),
            self.b_tail_hint,
        )
    }
}

/// `A_t0(x) = int_t0^x a(z) dz`, adaptive quadrature at abs tol 1e-10.
pub fn integral_a(a: &FunctionExpr, t0: f64, x: f64) -> Result<f64, OsgoodError> {
    if t0 > x {
        return Err(OsgoodError::InvalidInput(format!(
            "integral_a needs t0 <= x, got t0 = {t0}, x = {x}"
        )));
    }
    Ok(integrate(|z| a.eval(z), t0, x, 1e-10)?)
}

/// `B_xi(x) = int_xi^x dz / b(z)`, adaptive quadrature at abs tol 1e-10.
pub fn integral_b(b: &FunctionExpr, xi: f64, x: f64) -> Result<f64, OsgoodError> {
    integrate(|z| b.eval(z).map(|v| 1.0 / v), xi, x, 1e-10).map_err(|e| match e {
        QuadError::NonFinite { x } => OsgoodError::BadB(x),
        other => OsgoodError::Quad(other),
    })
}

/// Exact ODE solution `y(t) = B_x0^{-1}(A_t0(t))` for
/// `y' = a(t) b(y), y(t0) = x0`.
pub fn ode_solve(
    p: &OsgoodProblem,
    t0: f64,
    x0: f64,
    t: f64,
) -> Result<f64, OsgoodError> {
    if ExtReal::Finite(x0) <= p.l {
        return Err(OsgoodError::InvalidInput(format!(
            "x0 = {x0} must exceed l = {}",
            p.l
        )));
    }
    let target = integral_a(&p.a, t0, t)?;
    if target == 0.0 {
        return Ok(x0);
    }
    let b = &p.b;
    let g = |x: f64| {
        integral_b(b, x0, x).map_err(|e| EvalError::Other(e.to_string()))
    };
    roots::invert_increasing(g, target, x0, 1e15, 1e-10 * (1.0 + x0.abs())).map_err(|e| {
        match e {
            RootError::TargetUnreachable { .. } => OsgoodError::BeyondExplosion(t),
            other => OsgoodError::Root(other),
        }
    })
}

/// Explosion time of `y' = a(t) b(y), y(t0) = x0`: infinite when
/// `B_x0(inf) >= A_t0(inf)`, else the root of `A_t0(T) = B_x0(inf)`.
pub fn ode_explosion_time(
    p: &OsgoodProblem,
    t0: f64,
    x0: f64,
) -> Result<ExtReal, OsgoodError> {
    if ExtReal::Finite(x0) <= p.l {
        return Err(OsgoodError::InvalidInput(format!(
            "x0 = {x0} must exceed l = {}",
            p.l
        )));
    }
    let b = p.b.clone();
    let b_total = classify_improper_fn(
        &move |s: f64| b.eval(s).map(|v| 1.0 / v),
        x0,
        p.b_tail_hint,
    );
    let b_inf = match b_total.kind {
        ImproperKind::Divergent => return Ok(ExtReal::PosInf),
        ImproperKind::Convergent(v) => v,
        ImproperKind::Unknown => return Err(OsgoodError::Inconclusive(b_total.note)),
    };

    let a = p.a.clone();
    let a_total = classify_improper_fn(&move |s: f64| a.eval(s), t0, p.a_tail_hint);
    match a_total.kind {
        ImproperKind::Divergent => {}
        ImproperKind::Convergent(v) if v <= b_inf => return Ok(ExtReal::PosInf),
        ImproperKind::Convergent(_) => {}
        ImproperKind::Unknown => return Err(OsgoodError::Inconclusive(a_total.note)),
    }

    let a = &p.a;
    let g = |t: f64| {
        integral_a(a, t0, t).map_err(|e| EvalError::Other(e.to_string()))
    };
    let root = roots::invert_increasing(g, b_inf, t0, 1e12, 1e-9)?;
    Ok(ExtReal::Finite(root))
}

/// Explosion verdict for the noisy integral equation, from the Osgood
/// integral plus the hypothesis checks appropriate to the noise descriptor.
pub fn osgood_verdict(p: &OsgoodProblem) -> ExplosionVerdict {
    let mut checks = Vec::new();
    checks.push(check_h1(&p.a, 1.0));
    checks.extend(p.structure_checks());
    match &p.noise {
        NoiseDescriptor::None => {
            checks.push(CheckResult::not_applicable(
                "H3",
                "no noise term; deterministic route",
            ));
        }
        NoiseDescriptor::Bounded { inf, .. } => {
            if p.xi + inf > p.r {
                checks.push(CheckResult::pass(
                    "bounded-noise-floor",
                    format!("xi + inf g = {} stays above r = {}", p.xi + inf, p.r),
                ));
            } else {
                checks.push(CheckResult::fail(
                    "bounded-noise-floor",
                    format!("xi + inf g = {} does not exceed r = {}", p.xi + inf, p.r),
                ));
            }
        }
        NoiseDescriptor::Path(path) => {
            checks.push(check_h3(path, 1.0, 10.0));
        }
    }
    let report = HypothesisReport { checks };
    let integral = p.osgood_integral();
    let hypotheses_ok = report.all_ok();

    let verdict = match (&integral.kind, hypotheses_ok) {
        (ImproperKind::Convergent(_), true) => Verdict::ExplodesFiniteTime,
        (ImproperKind::Divergent, true) => Verdict::NoExplosion,
        _ => Verdict::Unknown,
    };

    let explosion_time = match (&p.noise, verdict) {
        (NoiseDescriptor::None, Verdict::ExplodesFiniteTime | Verdict::NoExplosion) => {
            ode_explosion_time(p, 0.0, p.xi).ok()
        }
        _ => None,
    };
    let bracket = match (&p.noise, verdict) {
        (NoiseDescriptor::Bounded { .. }, Verdict::ExplodesFiniteTime) => {
            bounded_noise_bracket(p).ok()
        }
        _ => None,
    };

    ExplosionVerdict {
        verdict,
        evidence: Evidence::Osgood {
            osgood_integral: integral,
            hypothesis_report: report,
        },
        explosion_time,
        bracket,
        explosion_probability: None,
        closed_form: None,
    }
}

/// Explosion-time bracket for bounded noise:
/// `(A_0^{-1}(B_{xi + sup g}(inf)), A_0^{-1}(B_{xi + inf g}(inf)))`.
pub fn bounded_noise_bracket(p: &OsgoodProblem) -> Result<(f64, f64), OsgoodError> {
    let (inf, sup) = match p.noise {
        NoiseDescriptor::Bounded { inf, sup } => (inf, sup),
        _ => {
            return Err(OsgoodError::InvalidInput(
                "bounded_noise_bracket needs a Bounded noise descriptor".into(),
            ))
        }
    };
    if p.xi + inf <= p.r {
        return Err(OsgoodError::HypothesisViolated(format!(
            "xi + inf g = {} must exceed r = {}",
            p.xi + inf,
            p.r
        )));
    }
    let low = ode_explosion_time(p, 0.0, p.xi + sup)?;
    let high = ode_explosion_time(p, 0.0, p.xi + inf)?;
    match (low, high) {
        (ExtReal::Finite(lo), ExtReal::Finite(hi)) => Ok((lo, hi)),
        _ => Err(OsgoodError::HypothesisViolated(
            "bracket endpoints not finite; Osgood integral must be convergent".into(),
        )),
    }
}

/// Heuristic check of the drift-mass hypothesis:
/// `lim_{t -> inf} int_t^{t+eta} a(s) ds > 0`.
///
/// Evaluates the window integral at `t = 10, 10^2, ..., 10^6` and requires
/// the minimum to exceed 1e-6. Evidence, not proof.
pub fn check_h1(a: &FunctionExpr, eta: f64) -> CheckResult {
    let mut vals = Vec::with_capacity(6);
    for k in 1..=6 {
        let t = 10f64.powi(k);
        match integrate(|s| a.eval(s), t, t + eta, 1e-12) {
            Ok(v) => vals.push((t, v)),
            Err(e) => {
                return CheckResult::fail(
                    "H1",
                    format!("window integral at t = {t:e} failed: {e}"),
                )
            }
        }
    }
    let (min_at, min_val) = vals
        .iter()
        .cloned()
        .fold((0.0, f64::INFINITY), |acc, (t, v)| {
            if v < acc.1 {
                (t, v)
            } else {
                acc
            }
        });
    if min_val <= 1e-6 {
        return CheckResult::fail(
            "H1",
            format!("window integral {min_val:.3e} at t = {min_at:e} is below 1e-6"),
        );
    }
    // values still positive but collapsing decade over decade extrapolate to
    // a zero limit even before crossing the hard threshold
    let decaying = vals.windows(2).all(|w| w[1].1 < w[0].1);
    let last = vals.last().unwrap().1;
    let first = vals[0].1;
    if decaying && last < 0.1 * first {
        return CheckResult::fail(
            "H1",
            format!(
                "window integrals decay monotonically from {first:.3e} to {last:.3e}; \
                 limit extrapolates to zero"
            ),
        );
    }
    CheckResult::pass(
        "H1",
        format!("window integrals over t in [1e1, 1e6] stay above {min_val:.3e}"),
    )
}

/// Heuristic check of the noise-growth hypothesis:
/// `limsup_{t -> inf} inf_{0 <= h <= eta_tilde} g(t + h) = inf`.
///
/// Computes windowed infima of the sampled path with a monotone deque, then
/// the running maximum; passes when the running max exceeds `threshold` at
/// the end of the observation window and is still increasing over its last
/// decade. Evidence, not proof.
pub fn check_h3(path: &[(f64, f64)], eta_tilde: f64, threshold: f64) -> CheckResult {
    if path.len() < 2 {
        return CheckResult::fail("H3", "path too short to evaluate");
    }
    let t_end = path.last().unwrap().0;

    // windowed infimum at each left endpoint, sliding monotone deque
    let mut deque: std::collections::VecDeque<usize> = std::collections::VecDeque::new();
    let mut window_infs: Vec<(f64, f64)> = Vec::with_capacity(path.len());
    let mut j = 0usize;
    for i in 0..path.len() {
        let (t, _) = path[i];
        if t + eta_tilde > t_end {
            break;
        }
        while j < path.len() && path[j].0 <= t + eta_tilde {
            while let Some(&k) = deque.back() {
                if path[k].1 >= path[j].1 {
                    deque.pop_back();
                } else {
                    break;
                }
            }
            deque.push_back(j);
            j += 1;
        }
        while let Some(&k) = deque.front() {
            if path[k].0 < t {
                deque.pop_front();
            } else {
                break;
            }
        }
        if let Some(&k) = deque.front() {
            window_infs.push((t, path[k].1));
        }
    }
    if window_infs.is_empty() {
        return CheckResult::fail("H3", "observation window shorter than eta_tilde");
    }

    let mut running_max = f64::NEG_INFINITY;
    let mut running: Vec<(f64, f64)> = Vec::with_capacity(window_infs.len());
    for &(t, v) in &window_infs {
        running_max = running_max.max(v);
        running.push((t, running_max));
    }
    let final_max = running.last().unwrap().1;
    let decade_start = running.last().unwrap().0 / 10.0;
    let max_at_decade = running
        .iter()
        .take_while(|&&(t, _)| t <= decade_start)
        .last()
        .map(|&(_, v)| v)
        .unwrap_or(f64::NEG_INFINITY);

    let above = final_max > threshold;
    let still_growing = final_max > max_at_decade;
    if above && still_growing {
        CheckResult::pass(
            "H3",
            format!(
                "running max of windowed infima reaches {final_max:.3} (> {threshold}) and \
                 grew over the last decade"
            ),
        )
    } else {
        CheckResult::fail(
            "H3",
            format!(
                "running max {final_max:.3} (threshold {threshold}), growth over last decade: \
                 {still_growing}"
            ),
        )
    }
}
