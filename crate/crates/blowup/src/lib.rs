//! Finite-time blow-up analysis for ordinary and stochastic differential
//! equations: exact explosion-time distributions where a transform applies,
//! deterministic explosion times via the Osgood criterion, and Monte Carlo
//! and PDE cross-checks.

pub mod analytic;
pub mod curve;
pub mod expr;
pub mod ext_real;
pub mod improper;
pub mod osgood;
pub mod pde;
pub mod quad;
pub mod roots;
pub mod sim;
pub mod verdict;

pub use analytic::{BarrierPair, TailHints, TransformProblem};
pub use curve::DistCurve;
pub use expr::FunctionExpr;
pub use ext_real::ExtReal;
pub use improper::{ImproperKind, ImproperVerdict};
pub use osgood::{NoiseDescriptor, OsgoodProblem};
pub use sim::{H4Report, H4Verdict, NoiseSpec, Sample, SamplePool};
pub use verdict::{CheckResult, Evidence, ExplosionVerdict, HypothesisReport, Verdict};

/// Compiles and runs every code sample in the user guide (`book/`), so the
/// guide can never drift out of sync with the API.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/expressions.md")]
    mod expressions {}
    #[doc = include_str!("../../../book/src/transform.md")]
    mod transform {}
    #[doc = include_str!("../../../book/src/osgood.md")]
    mod osgood {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/pde.md")]
    mod pde {}
}
