//! Explosion verdicts and their supporting evidence.

use serde::Serialize;

use crate::ext_real::ExtReal;
use crate::improper::ImproperVerdict;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    ExplodesFiniteTime,
    NoExplosion,
    Unknown,
}

/// One hypothesis check: heuristic evidence, never a proof.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub applicable: bool,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    pub fn pass(name: &str, detail: impl Into<String>) -> Self {
        CheckResult {
            name: name.to_string(),
            applicable: true,
            passed: true,
            detail: detail.into(),
        }
    }

    pub fn fail(name: &str, detail: impl Into<String>) -> Self {
        CheckResult {
            name: name.to_string(),
            applicable: true,
            passed: false,
            detail: detail.into(),
        }
    }

    pub fn not_applicable(name: &str, detail: impl Into<String>) -> Self {
        CheckResult {
            name: name.to_string(),
            applicable: false,
            passed: true,
            detail: detail.into(),
        }
    }

    pub fn ok(&self) -> bool {
        !self.applicable || self.passed
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HypothesisReport {
    pub checks: Vec<CheckResult>,
}

impl HypothesisReport {
    pub fn all_ok(&self) -> bool {
        self.checks.iter().all(|c| c.ok())
    }

    pub fn find(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone, Serialize)]
pub enum Evidence {
    /// Transform route (barrier finiteness under the scale-like map).
    Transform {
        h_square_tail: ImproperVerdict,
        left_barrier: Option<ExtReal>,
        right_barrier: Option<ExtReal>,
        barrier_note: Option<String>,
    },
    /// Osgood route (tail integral of 1/b plus hypothesis checks).
    Osgood {
        osgood_integral: ImproperVerdict,
        hypothesis_report: HypothesisReport,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct ExplosionVerdict {
    pub verdict: Verdict,
    pub evidence: Evidence,
    /// Exact explosion time, when the deterministic route provides one.
    pub explosion_time: Option<ExtReal>,
    /// Explosion-time bracket from the bounded-noise route.
    pub bracket: Option<(f64, f64)>,
    /// When the intrinsic clock saturates, the probability of explosion by
    /// the saturation value; the headline verdict stays Unknown.
    pub explosion_probability: Option<f64>,
    /// Name of the closed-form distribution, when one applies.
    pub closed_form: Option<String>,
}
