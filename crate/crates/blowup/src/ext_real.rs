//! Extended real line: finite values plus the two infinities.
//!
//! Improper integrals and transform limits return values of this type.
//! Arithmetic follows the measure-theoretic conventions; the indeterminate
//! form `inf - inf` is a signaled error rather than a NaN.

use std::cmp::Ordering;
use std::fmt;

use serde::ser::{Serialize, Serializer};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtReal {
    NegInf,
    Finite(f64),
    PosInf,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum ExtRealError {
    #[error("indeterminate form inf - inf")]
    InfMinusInf,
    #[error("NaN is not a member of the extended real line")]
    NotANumber,
}

impl ExtReal {
    /// Wraps an `f64`, routing IEEE infinities to the infinite variants.
    pub fn from_f64(v: f64) -> Result<Self, ExtRealError> {
        if v.is_nan() {
            Err(ExtRealError::NotANumber)
        } else if v == f64::INFINITY {
            Ok(ExtReal::PosInf)
        } else if v == f64::NEG_INFINITY {
            Ok(ExtReal::NegInf)
        } else {
            Ok(ExtReal::Finite(v))
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    /// Collapses to an `f64`, mapping the infinite variants to IEEE infinities.
    pub fn to_f64(self) -> f64 {
        match self {
            ExtReal::NegInf => f64::NEG_INFINITY,
            ExtReal::Finite(v) => v,
            ExtReal::PosInf => f64::INFINITY,
        }
    }

    pub fn neg(self) -> Self {
        match self {
            ExtReal::NegInf => ExtReal::PosInf,
            ExtReal::Finite(v) => ExtReal::Finite(-v),
            ExtReal::PosInf => ExtReal::NegInf,
        }
    }

    pub fn add(self, other: Self) -> Result<Self, ExtRealError> {
        use ExtReal::*;
        match (self, other) {
            (Finite(a), Finite(b)) => ExtReal::from_f64(a + b),
            (PosInf, NegInf) | (NegInf, PosInf) => Err(ExtRealError::InfMinusInf),
            (PosInf, _) | (_, PosInf) => Ok(PosInf),
            (NegInf, _) | (_, NegInf) => Ok(NegInf),
        }
    }

    pub fn sub(self, other: Self) -> Result<Self, ExtRealError> {
        self.add(other.neg())
    }

    pub fn min(self, other: Self) -> Self {
        if self <= other {
            self
        } else {
            other
        }
    }

    pub fn max(self, other: Self) -> Self {
        if self >= other {
            self
        } else {
            other
        }
    }
}

impl PartialOrd for ExtReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        use ExtReal::*;
        Some(match (self, other) {
            (NegInf, NegInf) | (PosInf, PosInf) => Ordering::Equal,
            (NegInf, _) | (_, PosInf) => Ordering::Less,
            (PosInf, _) | (_, NegInf) => Ordering::Greater,
            (Finite(a), Finite(b)) => a.partial_cmp(b)?,
        })
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::NegInf => write!(f, "-inf"),
            ExtReal::Finite(v) => write!(f, "{v}"),
            ExtReal::PosInf => write!(f, "inf"),
        }
    }
}

impl Serialize for ExtReal {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            ExtReal::Finite(v) => serializer.serialize_f64(*v),
            ExtReal::PosInf => serializer.serialize_str("inf"),
            ExtReal::NegInf => serializer.serialize_str("-inf"),
        }
    }
}

impl From<f64> for ExtReal {
    /// Panics on NaN; use [`ExtReal::from_f64`] for fallible conversion.
    fn from(v: f64) -> Self {
        ExtReal::from_f64(v).expect("NaN passed to ExtReal::from")
    }
}
