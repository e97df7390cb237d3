//! Numerical classification of improper integrals over `[lower, inf)`.
//!
//! Convergence of an improper integral is not numerically decidable, so the
//! classifier is a heuristic: it records partial integrals over doubling
//! windows and decides from the increment pattern, a fitted log-log tail
//! slope, and an optional user hint (a known tail exponent), which overrides
//! the heuristic with the analytic p-test. Every verdict carries its
//! evidence trace.

use serde::Serialize;

use crate::expr::{EvalError, FunctionExpr};
use crate::quad::{integrate_fn, QuadError};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ImproperKind {
    Convergent(f64),
    Divergent,
    Unknown,
}

#[derive(Debug, Clone, Serialize)]
pub struct PartialIntegral {
    pub upper: f64,
    pub increment: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ImproperVerdict {
    pub kind: ImproperKind,
    pub evidence: Vec<PartialIntegral>,
    pub note: String,
}

impl ImproperVerdict {
    pub fn is_convergent(&self) -> bool {
        matches!(self.kind, ImproperKind::Convergent(_))
    }

    pub fn is_divergent(&self) -> bool {
        self.kind == ImproperKind::Divergent
    }

    pub fn value(&self) -> Option<f64> {
        match self.kind {
            ImproperKind::Convergent(v) => Some(v),
            _ => None,
        }
    }
}

/// Number of doubling windows examined.
const DOUBLINGS: u32 = 40;
/// Consecutive negligible increments required to declare convergence.
const STABLE_DOUBLINGS: usize = 5;
/// Increment ratio below which a geometric tail estimate is trusted.
const RATIO_CAP: f64 = 0.97;
/// Margin on the fitted log-log slope (divergent when slope >= -1 + margin).
const SLOPE_MARGIN: f64 = 0.05;

/// Classifies the tail of a positive `FunctionExpr` on `[lower, inf)`.
pub fn classify_improper(
    f: &FunctionExpr,
    lower: f64,
    hint: Option<f64>,
) -> ImproperVerdict {
    classify_improper_fn(&|x| f.eval(x), lower, hint)
}

/// Closure form of [`classify_improper`]; the integrand must be positive and
/// evaluable on `[lower, inf)`.
pub fn classify_improper_fn(
    f: &dyn Fn(f64) -> Result<f64, EvalError>,
    lower: f64,
    hint: Option<f64>,
) -> ImproperVerdict {
    if let Some(p) = hint {
        return classify_with_hint(f, lower, p);
    }

    let mut evidence: Vec<PartialIntegral> = Vec::new();
    let mut total = 0.0_f64;
    let mut consecutive_small = 0usize;
    // (ln s, ln f(s)) samples at geometric window midpoints, for slope fit
    let mut samples: Vec<(f64, f64)> = Vec::new();

    // Doubling requires a positive base point.
    let base = if lower > 0.0 {
        lower
    } else {
        match integrate_fn(f, lower, 1.0, 1e-12) {
            Ok(v) => {
                total += v;
                evidence.push(PartialIntegral {
                    upper: 1.0,
                    increment: v,
                    total,
                });
            }
            Err(e) => return inconclusive(evidence, format!("initial window failed: {e}")),
        }
        1.0
    };

    let mut prev = if lower > 0.0 { lower } else { base };
    for k in 1..=DOUBLINGS {
        let hi = base * 2f64.powi(k as i32);
        let tol = 1e-12 * (1.0 + total.abs());
        let seg = match integrate_fn(f, prev, hi, tol) {
            Ok(v) => v,
            Err(QuadError::NonFinite { x }) => {
                // positive integrand overflowing: direct divergence evidence
                return ImproperVerdict {
                    kind: ImproperKind::Divergent,
                    evidence,
                    note: format!("integrand overflow near s = {x:e}"),
                };
            }
            Err(e) => return inconclusive(evidence, format!("window [{prev:e},{hi:e}]: {e}")),
        };
        if !seg.is_finite() || total + seg == f64::INFINITY {
            return ImproperVerdict {
                kind: ImproperKind::Divergent,
                evidence,
                note: "partial integrals overflow".to_string(),
            };
        }
        total += seg;
        evidence.push(PartialIntegral {
            upper: hi,
            increment: seg,
            total,
        });
        if let Ok(v) = f((prev * hi).sqrt()) {
            if v > 0.0 && v.is_finite() {
                samples.push(((prev * hi).sqrt().ln(), v.ln()));
            }
        }
        if seg.abs() < 1e-10 * (1.0 + total.abs()) {
            consecutive_small += 1;
            if consecutive_small >= STABLE_DOUBLINGS {
                return ImproperVerdict {
                    kind: ImproperKind::Convergent(total),
                    evidence,
                    note: format!("increments negligible for {STABLE_DOUBLINGS} doublings"),
                };
            }
        } else {
            consecutive_small = 0;
        }
        prev = hi;
    }

    decide_from_tail(evidence, total, &samples)
}

fn decide_from_tail(
    evidence: Vec<PartialIntegral>,
    total: f64,
    samples: &[(f64, f64)],
) -> ImproperVerdict {
    let incs: Vec<f64> = evidence.iter().map(|p| p.increment).collect();
    let n = incs.len();
    if n >= 7 {
        let tail = &incs[n - 7..];
        let ratios: Vec<f64> = tail.windows(2).map(|w| w[1] / w[0]).collect();

        // Strictly shrinking increments: trust a geometric tail estimate.
        if ratios.iter().all(|&r| r.is_finite() && r > 0.0 && r <= RATIO_CAP) {
            let rho = ratios[ratios.len() - 1].max(ratios[ratios.len() - 2]);
            let tail_estimate = incs[n - 1] * rho / (1.0 - rho);
            return ImproperVerdict {
                kind: ImproperKind::Convergent(total + tail_estimate),
                evidence,
                note: format!("geometric increment decay (ratio {rho:.4}); tail extrapolated"),
            };
        }

        // Increments bounded below / growing: the partial integrals cannot
        // settle.
        if ratios.iter().all(|&r| r >= 0.99) {
            return ImproperVerdict {
                kind: ImproperKind::Divergent,
                evidence,
                note: "increments non-decreasing across doublings".to_string(),
            };
        }
    }

    // Log-log slope of the integrand tail.
    if let Some((slope, max_resid)) = fit_line(samples) {
        if max_resid < 0.2 && slope >= -1.0 + SLOPE_MARGIN {
            return ImproperVerdict {
                kind: ImproperKind::Divergent,
                evidence,
                note: format!("fitted tail slope {slope:.3} >= -1 + {SLOPE_MARGIN}"),
            };
        }
    }

    inconclusive(
        evidence,
        "increment pattern and tail slope both inconclusive; supply a tail-exponent hint"
            .to_string(),
    )
}

fn classify_with_hint(
    f: &dyn Fn(f64) -> Result<f64, EvalError>,
    lower: f64,
    p: f64,
) -> ImproperVerdict {
    if p <= 1.0 {
        return ImproperVerdict {
            kind: ImproperKind::Divergent,
            evidence: vec![],
            note: format!("hinted tail exponent {p} <= 1 (p-test)"),
        };
    }
    // Integrate to a large but safely evaluable bound, then close with the
    // analytic power-law tail c*S^(1-p)/(p-1), c = f(S)*S^p.
    let base = lower.max(1.0);
    let s = base * 2f64.powi(30);
    let head = match integrate_fn(f, lower, s, 1e-12) {
        Ok(v) => v,
        Err(e) => {
            return inconclusive(vec![], format!("hinted integration failed: {e}"));
        }
    };
    let tail = match f(s) {
        Ok(fs) if fs.is_finite() && fs >= 0.0 => fs * s / (p - 1.0),
        _ => 0.0,
    };
    ImproperVerdict {
        kind: ImproperKind::Convergent(head + tail),
        evidence: vec![PartialIntegral {
            upper: s,
            increment: head,
            total: head,
        }],
        note: format!("hinted tail exponent {p} > 1; analytic tail appended"),
    }
}

fn inconclusive(evidence: Vec<PartialIntegral>, note: String) -> ImproperVerdict {
    ImproperVerdict {
        kind: ImproperKind::Unknown,
        evidence,
        note,
    }
}

/// Least-squares line through the last 10 samples; returns (slope, max residual).
fn fit_line(samples: &[(f64, f64)]) -> Option<(f64, f64)> {
    let tail: Vec<_> = samples.iter().rev().take(10).cloned().collect();
    if tail.len() < 4 {
        return None;
    }
    let n = tail.len() as f64;
    let sx: f64 = tail.iter().map(|p| p.0).sum();
    let sy: f64 = tail.iter().map(|p| p.1).sum();
    let sxx: f64 = tail.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = tail.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-12 {
        return None;
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    let max_resid = tail
        .iter()
        .map(|p| (p.1 - slope * p.0 - intercept).abs())
        .fold(0.0, f64::max);
    Some((slope, max_resid))
}
