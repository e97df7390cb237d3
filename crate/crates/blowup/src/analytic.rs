//! Exact explosion-time law for the transformable SDE class: the scale-like
//! map `Psi`, the intrinsic clock `H`, barrier computation, and the one- and
//! two-barrier first-exit distributions.
//!
//! The state equation with diffusion `sigma(x) h(t)` and drift
//! `sigma sigma' h^2 / 2` conjugates, through `Psi_xi(x) = int_xi^x dz/sigma`,
//! to a Brownian motion run in the clock `H(t) = int_0^t h^2`. Explosion is
//! then exit of that Brownian motion from the barrier interval
//! `(l_xi, r_xi)`, the images of the state-space endpoints under `Psi`.

use serde::Serialize;
use statrs::function::erf::erfc;

use crate::curve::{CurveError, DistCurve};
use crate::expr::{EvalError, FunctionExpr};
use crate::ext_real::ExtReal;
use crate::improper::{classify_improper_fn, ImproperKind, ImproperVerdict};
use crate::quad::{integrate, QuadError};
use crate::roots::{self, RootError};
use crate::verdict::{Evidence, ExplosionVerdict, Verdict};

#[derive(Debug, Clone, thiserror::Error)]
pub enum AnalyticError {
    #[error("invalid problem: {0}")]
    InvalidInput(String),
    #[error("sigma vanishes or changes sign on the domain near x = {0}")]
    SigmaVanishes(f64),
    #[error("point {0} outside the open domain")]
    OutsideDomain(f64),
    #[error("value {0} outside the barrier interval")]
    OutsideBarriers(f64),
    #[error("clock saturates below the requested value {0}")]
    ClockUnreachable(f64),
    #[error("improper-integral classifier inconclusive at the {side} endpoint: {note}")]
    Inconclusive { side: &'static str, note: String },
    #[error("quadrature failure: {0}")]
    Quad(#[from] QuadError),
    #[error("root finding failure: {0}")]
    Root(#[from] RootError),
    #[error("curve assembly failure: {0}")]
    Curve(#[from] CurveError),
    #[error("evaluation failure: {0}")]
    Eval(#[from] EvalError),
}

/// Optional tail-exponent hints for the improper limits of `Psi`.
///
/// An exponent `p` means `|1/sigma(z)| ~ c |z|^-p` toward an infinite
/// endpoint, or `|1/sigma(z)| ~ c |z - x_end|^-p` toward a finite one.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct TailHints {
    pub left: Option<f64>,
    pub right: Option<f64>,
    /// Tail exponent of `h^2(t)` as `t -> inf`, for the clock classifier.
    pub h_square: Option<f64>,
}

/// Barriers in `Psi`-coordinates: images of the state-space endpoints.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BarrierPair {
    pub l: ExtReal,
    pub r: ExtReal,
}

impl BarrierPair {
    pub fn new(a: ExtReal, b: ExtReal) -> Result<Self, AnalyticError> {
        let l = a.min(b);
        let r = a.max(b);
        let l_ok = match l {
            ExtReal::NegInf => true,
            ExtReal::Finite(v) => v < 0.0,
            ExtReal::PosInf => false,
        };
        let r_ok = match r {
            ExtReal::PosInf => true,
            ExtReal::Finite(v) => v > 0.0,
            ExtReal::NegInf => false,
        };
        if !(l_ok && r_ok) {
            return Err(AnalyticError::InvalidInput(format!(
                "degenerate barriers ({l}, {r}): the start point must lie strictly inside"
            )));
        }
        Ok(BarrierPair { l, r })
    }

    pub fn finite_count(&self) -> usize {
        self.l.is_finite() as usize + self.r.is_finite() as usize
    }
}

/// The transformable problem: diffusion shape `sigma` on an open interval
/// where it never vanishes, time factor `h`, start point `xi`.
#[derive(Debug, Clone)]
pub struct TransformProblem {
    sigma: FunctionExpr,
    h: FunctionExpr,
    xi: f64,
    x1: ExtReal,
    x2: ExtReal,
    sigma_sign: f64,
    hints: TailHints,
}

impl TransformProblem {
    pub fn new(
        sigma: FunctionExpr,
        h: FunctionExpr,
        xi: f64,
        x1: ExtReal,
        x2: ExtReal,
        hints: TailHints,
    ) -> Result<Self, AnalyticError> {
        if x1 >= x2 {
            return Err(AnalyticError::InvalidInput("empty domain".into()));
        }
        if ExtReal::Finite(xi) <= x1 || ExtReal::Finite(xi) >= x2 {
            return Err(AnalyticError::InvalidInput(format!(
                "xi = {xi} outside the open domain ({x1}, {x2})"
            )));
        }
        // Sample sigma across the domain: nonzero, constant sign.
        let mut sign = 0.0;
        for x in domain_samples(xi, x1, x2) {
            match sigma.eval(x) {
                Ok(v) => {
                    // exact zero at extreme samples is float underflow, not a
                    // zero of sigma; genuine zeros show up as a sign change
                    if v == 0.0 {
                        continue;
                    }
                    if sign == 0.0 {
                        sign = v.signum();
                    } else if v.signum() != sign {
                        return Err(AnalyticError::SigmaVanishes(x));
                    }
                }
                // endpoint-hugging samples may leave the evaluable range
                Err(_) => continue,
            }
        }
        if sign == 0.0 {
            return Err(AnalyticError::InvalidInput(
                "sigma not evaluable anywhere on the domain".into(),
            ));
        }
        Ok(TransformProblem {
            sigma,
            h,
            xi,
            x1,
            x2,
            sigma_sign: sign,
            hints,
        })
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn h(&self) -> &FunctionExpr {
        &self.h
    }

    pub fn sigma(&self) -> &FunctionExpr {
        &self.sigma
    }

    pub fn domain(&self) -> (ExtReal, ExtReal) {
        (self.x1, self.x2)
    }

    pub fn sigma_sign(&self) -> f64 {
        self.sigma_sign
    }

    /// The intrinsic clock `H(t) = int_0^t h^2(s) ds`.
    pub fn accumulate_h(&self, t: f64) -> Result<f64, AnalyticError> {
        accumulate_h(&self.h, t)
    }

    /// Inverts the clock: the physical time at which `H` reaches `v`.
    pub fn invert_h(&self, v: f64) -> Result<f64, AnalyticError> {
        invert_h(&self.h, v)
    }

    /// `Psi_xi(x) = int_xi^x dz / sigma(z)`.
    pub fn psi(&self, x: f64) -> Result<f64, AnalyticError> {
        if ExtReal::Finite(x) <= self.x1 || ExtReal::Finite(x) >= self.x2 {
            return Err(AnalyticError::OutsideDomain(x));
        }
        let sigma = &self.sigma;
        Ok(integrate(|z| sigma.eval(z).map(|s| 1.0 / s), self.xi, x, 1e-10)?)
    }

    /// Improper limits of `Psi` at both endpoints, as a barrier pair.
    pub fn psi_limits(&self) -> Result<BarrierPair, AnalyticError> {
        let left = self.endpoint_limit(false)?;
        let right = self.endpoint_limit(true)?;
        BarrierPair::new(left, right)
    }

    fn endpoint_limit(&self, toward_right: bool) -> Result<ExtReal, AnalyticError> {
        let side = if toward_right { "right" } else { "left" };
        let hint = if toward_right {
            self.hints.right
        } else {
            self.hints.left
        };
        let sigma = self.sigma.clone();
        let abs_inv = move |z: f64| sigma.eval(z).map(|s| (1.0 / s).abs());
        let endpoint = if toward_right { self.x2 } else { self.x1 };

        let verdict: ImproperVerdict = match endpoint {
            ExtReal::PosInf => classify_improper_fn(&abs_inv, self.xi, hint),
            ExtReal::NegInf => {
                classify_improper_fn(&move |u: f64| abs_inv(-u), -self.xi, hint)
            }
            ExtReal::Finite(c) => {
                // substitute z = c -/+ 1/u so the endpoint maps to u = inf;
                // a state-space exponent p becomes 2 - p after substitution
                let u0 = 1.0 / (c - self.xi).abs();
                let toward = if toward_right { -1.0 } else { 1.0 };
                let sub_hint = hint.map(|p| 2.0 - p);
                classify_improper_fn(
                    &move |u: f64| abs_inv(c + toward / u).map(|v| v / (u * u)),
                    u0,
                    sub_hint,
                )
            }
        };

        let magnitude = match verdict.kind {
            ImproperKind::Convergent(v) => ExtReal::Finite(v),
            ImproperKind::Divergent => ExtReal::PosInf,
            ImproperKind::Unknown => {
                return Err(AnalyticError::Inconclusive {
                    side,
                    note: verdict.note,
                })
            }
        };
        // Psi toward the right endpoint carries the sign of sigma; toward
        // the left endpoint the opposite sign.
        let sign = if toward_right {
            self.sigma_sign
        } else {
            -self.sigma_sign
        };
        Ok(if sign > 0.0 { magnitude } else { magnitude.neg() })
    }

    /// Inverts `Psi`: the state point whose image is `y`.
    pub fn psi_inverse(&self, y: f64) -> Result<f64, AnalyticError> {
        if y == 0.0 {
            return Ok(self.xi);
        }
        let increasing = self.sigma_sign > 0.0;
        let go_right = (y > 0.0) == increasing;
        let tol = 1e-11;
        let map_err = |e: RootError| match e {
            RootError::TargetUnreachable { target } => AnalyticError::OutsideBarriers(target),
            other => AnalyticError::Root(other),
        };
        if go_right {
            // g(x) = s * Psi(x) is increasing toward x2; target s*y
            let s = if increasing { 1.0 } else { -1.0 };
            let g = |x: f64| {
                self.psi(x)
                    .map(|v| s * v)
                    .map_err(|e| EvalError::Other(e.to_string()))
            };
            match self.x2 {
                ExtReal::PosInf => {
                    roots::invert_increasing(g, s * y, self.xi, 1e15, tol).map_err(map_err)
                }
                ExtReal::Finite(c) => {
                    roots::invert_increasing_to_endpoint(g, s * y, self.xi, c, tol)
                        .map_err(map_err)
                }
                ExtReal::NegInf => unreachable!("x2 > xi"),
            }
        } else {
            // search left in the reflected variable w = -x
            let s = if increasing { -1.0 } else { 1.0 };
            let g = |w: f64| {
                self.psi(-w)
                    .map(|v| s * v)
                    .map_err(|e| EvalError::Other(e.to_string()))
            };
            let target = s * y;
            let res = match self.x1 {
                ExtReal::NegInf => {
                    roots::invert_increasing(g, target, -self.xi, 1e15, tol).map_err(map_err)
                }
                ExtReal::Finite(c) => {
                    roots::invert_increasing_to_endpoint(g, target, -self.xi, -c, tol)
                        .map_err(map_err)
                }
                ExtReal::PosInf => unreachable!("x1 < xi"),
            };
            res.map(|w| -w)
        }
    }

    /// Classifies `int_0^inf h^2`: explosion certainty needs an unbounded
    /// clock.
    pub fn h_square_tail(&self) -> ImproperVerdict {
        let h = self.h.clone();
        classify_improper_fn(&move |s: f64| h.eval(s).map(|v| v * v), 0.0, self.hints.h_square)
    }

    /// Full explosion verdict via barrier finiteness.
    pub fn explosion_verdict(&self) -> ExplosionVerdict {
        let h_tail = self.h_square_tail();
        let barriers = self.psi_limits();
        let (left, right, note) = match &barriers {
            Ok(bp) => (Some(bp.l), Some(bp.r), None),
            Err(e) => (None, None, Some(e.to_string())),
        };
        let evidence = Evidence::Transform {
            h_square_tail: h_tail.clone(),
            left_barrier: left,
            right_barrier: right,
            barrier_note: note,
        };
        let bp = match barriers {
            Ok(bp) => bp,
            Err(_) => {
                return ExplosionVerdict {
                    verdict: Verdict::Unknown,
                    evidence,
                    explosion_time: None,
                    bracket: None,
                    explosion_probability: None,
                    closed_form: None,
                }
            }
        };
        let closed_form = match bp.finite_count() {
            1 => Some("one-barrier: Phi(m / sqrt(H(t)))".to_string()),
            2 => Some("two-barrier alternating series".to_string()),
            _ => None,
        };
        match h_tail.kind {
            ImproperKind::Divergent => {
                // unbounded clock: explosion iff a barrier is finite
                let verdict = if bp.finite_count() > 0 {
                    Verdict::ExplodesFiniteTime
                } else {
                    Verdict::NoExplosion
                };
                ExplosionVerdict {
                    verdict,
                    evidence,
                    explosion_time: None,
                    bracket: None,
                    explosion_probability: None,
                    closed_form: if verdict == Verdict::ExplodesFiniteTime {
                        closed_form
                    } else {
                        None
                    },
                }
            }
            ImproperKind::Convergent(h_inf) => {
                if bp.finite_count() == 0 {
                    ExplosionVerdict {
                        verdict: Verdict::NoExplosion,
                        evidence,
                        explosion_time: None,
                        bracket: None,
                        explosion_probability: None,
                        closed_form: None,
                    }
                } else {
                    // saturating clock: explosion has probability < 1; report
                    // the probability, keep the headline Unknown
                    let prob = self.cdf_at_clock(&bp, h_inf, 1e-12).ok();
                    ExplosionVerdict {
                        verdict: Verdict::Unknown,
                        evidence,
                        explosion_time: None,
                        bracket: None,
                        explosion_probability: prob,
                        closed_form,
                    }
                }
            }
            ImproperKind::Unknown => ExplosionVerdict {
                verdict: Verdict::Unknown,
                evidence,
                explosion_time: None,
                bracket: None,
                explosion_probability: None,
                closed_form,
            },
        }
    }

    /// Explosion CDF value at clock value `hval` for barrier pair `bp`.
    pub fn cdf_at_clock(
        &self,
        bp: &BarrierPair,
        hval: f64,
        tol: f64,
    ) -> Result<f64, AnalyticError> {
        match (bp.l, bp.r) {
            (ExtReal::Finite(l), ExtReal::Finite(r)) => {
                if hval == 0.0 {
                    Ok(0.0)
                } else {
                    two_barrier_cdf(&BarrierPair::new(l.into(), r.into())?, hval, tol)
                }
            }
            (ExtReal::NegInf, ExtReal::Finite(r)) => one_barrier_cdf(r, hval),
            (ExtReal::Finite(l), ExtReal::PosInf) => one_barrier_cdf(-l, hval),
            _ => Err(AnalyticError::InvalidInput(
                "no finite barrier; no explosion distribution".into(),
            )),
        }
    }

    /// Analytic explosion-time CDF on a physical time grid.
    pub fn analytic_cdf(&self, times: &[f64]) -> Result<DistCurve, AnalyticError> {
        let bp = self.psi_limits()?;
        if bp.finite_count() == 0 {
            return Err(AnalyticError::InvalidInput(
                "no finite barrier; no explosion distribution".into(),
            ));
        }
        let mut cdf = Vec::with_capacity(times.len());
        for &t in times {
            let hval = self.accumulate_h(t)?;
            cdf.push(self.cdf_at_clock(&bp, hval, 1e-12)?);
        }
        let tag = if bp.finite_count() == 2 {
            "two-barrier alternating series"
        } else {
            "one-barrier: Phi(m / sqrt(H(t)))"
        };
        Ok(DistCurve::new(
            times.to_vec(),
            cdf,
            Some(tag.to_string()),
        )?)
    }
}

fn domain_samples(xi: f64, x1: ExtReal, x2: ExtReal) -> Vec<f64> {
    let mut pts = vec![xi];
    match x2 {
        ExtReal::PosInf => {
            for j in -6..=6 {
                pts.push(xi + 10f64.powi(j));
            }
        }
        ExtReal::Finite(c) => {
            for j in 1..=30 {
                pts.push(c - (c - xi) * 0.5f64.powi(j));
            }
        }
        ExtReal::NegInf => {}
    }
    match x1 {
        ExtReal::NegInf => {
            for j in -6..=6 {
                pts.push(xi - 10f64.powi(j));
            }
        }
        ExtReal::Finite(c) => {
            for j in 1..=30 {
                pts.push(c + (xi - c) * 0.5f64.powi(j));
            }
        }
        ExtReal::PosInf => {}
    }
    pts
}

/// `H(t) = int_0^t h^2(s) ds`, adaptive quadrature at absolute tolerance 1e-10.
pub fn accumulate_h(h: &FunctionExpr, t: f64) -> Result<f64, AnalyticError> {
    if t < 0.0 {
        return Err(AnalyticError::InvalidInput("negative time".into()));
    }
    Ok(integrate(|s| h.eval(s).map(|v| v * v), 0.0, t, 1e-10)?)
}

/// Inverts `H`; errors when the clock saturates below `v`.
pub fn invert_h(h: &FunctionExpr, v: f64) -> Result<f64, AnalyticError> {
    if v < 0.0 {
        return Err(AnalyticError::InvalidInput("negative clock value".into()));
    }
    if v == 0.0 {
        return Ok(0.0);
    }
    let g = |t: f64| {
        accumulate_h(h, t).map_err(|e| EvalError::Other(e.to_string()))
    };
    roots::invert_increasing(g, v, 0.0, 1e12, 1e-12 * (1.0 + v)).map_err(|e| match e {
        RootError::TargetUnreachable { .. } => AnalyticError::ClockUnreachable(v),
        other => AnalyticError::Root(other),
    })
}

/// The doubled Gaussian tail: `Phi(x) = 2/sqrt(2 pi) int_x^inf
/// e^(-z^2/2) dz = erfc(x / sqrt 2)` for `x >= 0`, extended by
/// `Phi(x) = 2 - Phi(-x)`; `Phi(0) = 1`.
pub fn phi_tail(x: f64) -> f64 {
    if x == f64::INFINITY {
        return 0.0;
    }
    if x == f64::NEG_INFINITY {
        return 2.0;
    }
    if x >= 0.0 {
        erfc(x / std::f64::consts::SQRT_2)
    } else {
        2.0 - phi_tail(-x)
    }
}

/// One-barrier hitting CDF in the clock: `Phi(m / sqrt(hval))` for barrier
/// distance `m > 0`.
pub fn one_barrier_cdf(m: f64, hval: f64) -> Result<f64, AnalyticError> {
    if m <= 0.0 {
        return Err(AnalyticError::InvalidInput(format!(
            "barrier distance m = {m} must be positive"
        )));
    }
    if hval < 0.0 {
        return Err(AnalyticError::InvalidInput("negative clock value".into()));
    }
    if hval == 0.0 {
        return Ok(0.0);
    }
    Ok(phi_tail(m / hval.sqrt()))
}

/// Two-barrier exit CDF in the clock.
///
/// For small `hval / width^2` the alternating image series applies: each
/// density term integrates in closed form to a `Phi` value, giving
/// `sum_k (-1)^k sign(m_k) Phi(|m_k| / sqrt(hval))` with `m_k = r + k (r - l)`,
/// summed in symmetric pairs. That series needs `~ sqrt(hval) / width` terms,
/// so past `hval = width^2` the dual eigenfunction series takes over:
/// survival `= sum_{n odd} (4/(n pi)) sin(n pi (-l) / width)
/// exp(-n^2 pi^2 hval / (2 width^2))`, whose terms then decay at least as
/// fast as `exp(-n^2 pi^2 / 2)`.
pub fn two_barrier_cdf(bp: &BarrierPair, hval: f64, tol: f64) -> Result<f64, AnalyticError> {
    let (l, r) = match (bp.l, bp.r) {
        (ExtReal::Finite(l), ExtReal::Finite(r)) => (l, r),
        _ => {
            return Err(AnalyticError::InvalidInput(
                "two_barrier_cdf requires both barriers finite".into(),
            ))
        }
    };
    if hval <= 0.0 {
        return Err(AnalyticError::InvalidInput(format!(
            "clock value {hval} must be positive"
        )));
    }
    let width = r - l;
    if hval > width * width {
        let rate = std::f64::consts::PI.powi(2) * hval / (2.0 * width * width);
        let mut survival = 0.0;
        let mut n = 1i64;
        loop {
            let term = 4.0 / (n as f64 * std::f64::consts::PI)
                * (n as f64 * std::f64::consts::PI * (-l) / width).sin()
                * (-(n * n) as f64 * rate).exp();
            survival += term;
            if term.abs() < tol || (n * n) as f64 * rate > 745.0 {
                break;
            }
            n += 2;
        }
        return Ok((1.0 - survival).clamp(0.0, 1.0));
    }
    let sqrt_h = hval.sqrt();
    let term = |k: i64| -> f64 {
        let m = r + k as f64 * width;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        if m == 0.0 {
            return 0.0;
        }
        sign * m.signum() * phi_tail(m.abs() / sqrt_h)
    };
    let mut total = term(0);
    let mut j = 0i64;
    loop {
        j += 1;
        let a = term(-j);
        let b = term(j);
        total += a + b;
        if a.abs().max(b.abs()) < tol && j >= 2 {
            break;
        }
        if j > 10_000 {
            return Err(AnalyticError::InvalidInput(
                "two-barrier series failed to truncate".into(),
            ));
        }
    }
    Ok(total.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::FunctionExpr;
    use crate::quad::integrate_infallible;

    fn fx(src: &str) -> FunctionExpr {
        FunctionExpr::parse(src, "x").unwrap()
    }

    fn ft(src: &str) -> FunctionExpr {
        FunctionExpr::parse(src, "t").unwrap()
    }

    fn example_2_1(alpha: f64, xi: f64) -> TransformProblem {
        // sigma = |x|^alpha on (0, inf)
        TransformProblem::new(
            fx(&format!("abs(x)^{alpha}")),
            FunctionExpr::constant(1.0),
            xi,
            ExtReal::Finite(0.0),
            ExtReal::PosInf,
            TailHints::default(),
        )
        .unwrap()
    }

    fn example_2_2(alpha: f64, xi: f64) -> TransformProblem {
        TransformProblem::new(
            fx(&format!("exp({alpha}*x)")),
            FunctionExpr::constant(1.0),
            xi,
            ExtReal::NegInf,
            ExtReal::PosInf,
            TailHints::default(),
        )
        .unwrap()
    }

    #[test]
    fn accumulate_h_basics() {
        assert!((accumulate_h(&FunctionExpr::constant(1.0), 4.0).unwrap() - 4.0).abs() < 1e-9);
        assert!((accumulate_h(&ft("t"), 1.0).unwrap() - 1.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn accumulate_h_integrable_singularity() {
        // h = s^(-1/4): H(1) = int_0^1 s^(-1/2) = 2; oracle at tol 1e-12
        let oracle = integrate_infallible(|s| s.powf(-0.5), 0.0, 1.0, 1e-12).unwrap();
        let v = accumulate_h(&ft("t^-0.25"), 1.0).unwrap();
        assert!((v - oracle).abs() < 1e-8, "{v} vs {oracle}");
        assert!((v - 2.0).abs() < 1e-8);
    }

    #[test]
    fn invert_h_cases() {
        assert!((invert_h(&FunctionExpr::constant(1.0), 2.5).unwrap() - 2.5).abs() < 1e-8);
        // h = t: H(t) = t^3/3; H(3) = 9
        assert!((invert_h(&ft("t"), 9.0).unwrap() - 3.0).abs() < 1e-7);
        // h = e^-t: H saturates at 1/2
        assert!(matches!(
            invert_h(&ft("exp(-t)"), 1.0),
            Err(AnalyticError::ClockUnreachable(_))
        ));
    }

    #[test]
    fn psi_example_2_1() {
        let p = example_2_1(2.0, 1.0);
        // Psi = (1/(1-alpha)) (|x|^(1-alpha) - |xi|^(1-alpha)) = 1 - 1/x
        assert!((p.psi(2.0).unwrap() - 0.5).abs() < 1e-9);
        assert!(p.psi(1.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn psi_example_2_2() {
        let p = example_2_2(1.0, 0.0);
        // Psi = 1 - e^-x
        assert!((p.psi(1.0).unwrap() - (1.0 - (-1.0f64).exp())).abs() < 1e-9);
    }

    #[test]
    fn limits_example_2_1() {
        let p = example_2_1(2.0, 1.0);
        let bp = p.psi_limits().unwrap();
        assert_eq!(bp.l, ExtReal::NegInf);
        let r = bp.r.finite().unwrap();
        assert!((r - 1.0).abs() < 1e-6, "r = {r}");
    }

    #[test]
    fn limits_example_2_2() {
        let p = example_2_2(1.0, 0.0);
        let bp = p.psi_limits().unwrap();
        assert_eq!(bp.l, ExtReal::NegInf);
        assert!((bp.r.finite().unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn limits_constant_sigma() {
        let p = TransformProblem::new(
            FunctionExpr::constant(1.0),
            FunctionExpr::constant(1.0),
            0.0,
            ExtReal::NegInf,
            ExtReal::PosInf,
            TailHints::default(),
        )
        .unwrap();
        let bp = p.psi_limits().unwrap();
        assert_eq!(bp.l, ExtReal::NegInf);
        assert_eq!(bp.r, ExtReal::PosInf);
    }

    #[test]
    fn psi_inverse_round_trip() {
        let p = example_2_1(2.0, 1.0);
        // closed form inverse: x = 1/(1-y)
        assert!((p.psi_inverse(0.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((p.psi_inverse(0.5).unwrap() - 2.0).abs() < 1e-8);
        let x = p.psi_inverse(0.999).unwrap();
        assert!((x - 1000.0).abs() / 1000.0 < 1e-6, "x = {x}");
        // left of xi
        let x = p.psi_inverse(-3.0).unwrap();
        assert!((p.psi(x).unwrap() + 3.0).abs() < 1e-8);
    }

    #[test]
    fn phi_tail_values() {
        assert!((phi_tail(0.0) - 1.0).abs() < 1e-15);
        assert_eq!(phi_tail(f64::INFINITY), 0.0);
        // high-precision Gaussian-tail quadrature oracle; the erfc
        // implementation is good to ~3e-11 absolute, ample for CDF work
        let oracle = 2.0 / (2.0 * std::f64::consts::PI).sqrt()
            * integrate_infallible(|z| (-z * z / 2.0).exp(), 1.0, 40.0, 1e-14).unwrap();
        assert!((phi_tail(1.0) - oracle).abs() < 1e-9);
    }

    #[test]
    fn one_barrier_basics() {
        assert!((one_barrier_cdf(1.0, 1.0).unwrap() - phi_tail(1.0)).abs() < 1e-15);
        assert!((one_barrier_cdf(1.0, 1e12).unwrap() - 1.0).abs() < 1e-5);
        assert_eq!(one_barrier_cdf(1.0, 0.0).unwrap(), 0.0);
        assert!(one_barrier_cdf(-1.0, 1.0).is_err());
    }

    #[test]
    fn two_barrier_limits() {
        let bp = BarrierPair::new(ExtReal::Finite(-1.0), ExtReal::Finite(1.0)).unwrap();
        assert!((two_barrier_cdf(&bp, 1e8, 1e-12).unwrap() - 1.0).abs() < 1e-9);
        // near-degenerate left barrier reduces to the one-barrier law
        let far = BarrierPair::new(ExtReal::Finite(-100.0), ExtReal::Finite(1.0)).unwrap();
        let two = two_barrier_cdf(&far, 1.0, 1e-14).unwrap();
        let one = one_barrier_cdf(1.0, 1.0).unwrap();
        assert!((two - one).abs() < 1e-10);
    }

    #[test]
    fn two_barrier_monotone_in_clock() {
        let bp = BarrierPair::new(ExtReal::Finite(-1.5), ExtReal::Finite(0.7)).unwrap();
        let mut prev = 0.0;
        for i in 1..60 {
            let h = 0.1 * i as f64;
            let v = two_barrier_cdf(&bp, h, 1e-12).unwrap();
            assert!(v >= prev - 1e-12, "not monotone at h = {h}");
            prev = v;
        }
    }

    #[test]
    fn image_and_spectral_series_agree_at_crossover() {
        let bp = BarrierPair::new(ExtReal::Finite(-1.3), ExtReal::Finite(0.9)).unwrap();
        let w2 = (0.9f64 - -1.3).powi(2);
        let below = two_barrier_cdf(&bp, w2 * 0.999, 1e-13).unwrap();
        let above = two_barrier_cdf(&bp, w2 * 1.001, 1e-13).unwrap();
        assert!(above > below);
        assert!((above - below).abs() < 1e-4, "{below} vs {above}");
    }

    #[test]
    fn series_truncation_self_consistency() {
        let bp = BarrierPair::new(ExtReal::Finite(-1.0), ExtReal::Finite(1.0)).unwrap();
        for h in [0.3, 1.0, 3.0] {
            let tight = two_barrier_cdf(&bp, h, 1e-12).unwrap();
            let loose = two_barrier_cdf(&bp, h, 1e-6).unwrap();
            assert!((tight - loose).abs() <= 1e-6);
        }
    }

    #[test]
    fn verdict_examples() {
        let v = example_2_1(2.0, 1.0).explosion_verdict();
        assert_eq!(v.verdict, Verdict::ExplodesFiniteTime);
        assert!(v.closed_form.is_some());

        let v = example_2_2(-1.0, 0.0).explosion_verdict();
        assert_eq!(v.verdict, Verdict::ExplodesFiniteTime);

        let p = TransformProblem::new(
            FunctionExpr::constant(1.0),
            FunctionExpr::constant(1.0),
            0.0,
            ExtReal::NegInf,
            ExtReal::PosInf,
            TailHints::default(),
        )
        .unwrap();
        assert_eq!(p.explosion_verdict().verdict, Verdict::NoExplosion);
    }

    #[test]
    fn saturating_clock_reports_probability() {
        // h = e^-t: H(inf) = 1/2; finite barrier at 1
        let p = TransformProblem::new(
            fx("abs(x)^2"),
            ft("exp(-t)"),
            1.0,
            ExtReal::Finite(0.0),
            ExtReal::PosInf,
            TailHints::default(),
        )
        .unwrap();
        let v = p.explosion_verdict();
        assert_eq!(v.verdict, Verdict::Unknown);
        let prob = v.explosion_probability.unwrap();
        let expected = phi_tail(1.0 / 0.5f64.sqrt());
        assert!((prob - expected).abs() < 1e-6, "{prob} vs {expected}");
    }

    #[test]
    fn degenerate_barrier_rejected() {
        assert!(BarrierPair::new(ExtReal::Finite(0.0), ExtReal::Finite(1.0)).is_err());
        assert!(BarrierPair::new(ExtReal::Finite(0.5), ExtReal::Finite(1.0)).is_err());
    }
}
