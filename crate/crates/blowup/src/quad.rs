//! Adaptive Gauss–Kronrod quadrature.
//!
//! A 7/15-point Gauss–Kronrod rule drives a globally adaptive bisection
//! strategy: the interval with the largest error estimate is split until the
//! summed error estimate drops below the requested absolute tolerance.
//! Kronrod nodes are strictly interior, so integrable endpoint
//! singularities (e.g. `s^-1/2` at 0) are handled by subdivision alone.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::expr::EvalError;

/// Kronrod abscissae on [-1, 1] (positive half; the rule is symmetric).
const XGK: [f64; 8] = [
    0.991_455_371_120_813,
    0.949_107_912_342_759,
    0.864_864_423_359_769,
    0.741_531_185_599_394,
    0.586_087_235_467_691,
    0.405_845_151_377_397,
    0.207_784_955_007_898,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529,
    0.063_092_092_629_979,
    0.104_790_010_322_250,
    0.140_653_259_715_525,
    0.169_004_726_639_267,
    0.190_350_578_064_785,
    0.204_432_940_075_298,
    0.209_482_141_084_728,
];

/// Gauss weights for the embedded 7-point rule (odd Kronrod indices).
const WG: [f64; 4] = [
    0.129_484_966_168_870,
    0.279_705_391_489_277,
    0.381_830_050_505_119,
    0.417_959_183_673_469,
];

#[derive(Debug, Clone, thiserror::Error)]
pub enum QuadError {
    #[error("integrand evaluation failed at {x}: {source}")]
    Eval { x: f64, source: EvalError },
    #[error("non-finite integrand value at {x}; non-integrable singularity suspected")]
    NonFinite { x: f64 },
    #[error("tolerance {tol} not reached: error estimate {err} after {intervals} intervals")]
    ToleranceNotReached {
        tol: f64,
        err: f64,
        intervals: usize,
    },
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .partial_cmp(&other.error)
            .unwrap_or(Ordering::Equal)
    }
}

fn gk15<F>(f: &F, a: f64, b: f64) -> Result<Segment, QuadError>
where
    F: Fn(f64) -> Result<f64, EvalError> + ?Sized,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut kronrod = 0.0;
    let mut gauss = 0.0;
    for (j, (&xk, &wk)) in XGK.iter().zip(WGK.iter()).enumerate() {
        let points = if xk == 0.0 {
            vec![center]
        } else {
            vec![center - half * xk, center + half * xk]
        };
        let mut fsum = 0.0;
        for &x in &points {
            let v = f(x).map_err(|source| QuadError::Eval { x, source })?;
            if !v.is_finite() {
                return Err(QuadError::NonFinite { x });
            }
            fsum += v;
        }
        kronrod += wk * fsum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * fsum;
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs().max(1e-300);
    Ok(Segment {
        a,
        b,
        value,
        error,
    })
}

/// Integrates `f` over `[a, b]` to absolute tolerance `abs_tol`.
///
/// `a > b` is allowed and flips the sign; `a == b` returns 0.
pub fn integrate<F>(f: F, a: f64, b: f64, abs_tol: f64) -> Result<f64, QuadError>
where
    F: Fn(f64) -> Result<f64, EvalError>,
{
    integrate_fn(&f, a, b, abs_tol)
}

/// Trait-object form of [`integrate`], usable with boxed integrands.
pub fn integrate_fn<F>(f: &F, a: f64, b: f64, abs_tol: f64) -> Result<f64, QuadError>
where
    F: Fn(f64) -> Result<f64, EvalError> + ?Sized,
{
    if a == b {
        return Ok(0.0);
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };

    const MAX_INTERVALS: usize = 100_000;
    let mut heap = BinaryHeap::new();
    let first = gk15(f, lo, hi)?;
    let mut total_value = first.value;
    let mut total_error = first.error;
    heap.push(first);

    loop {
        // the requested tolerance cannot be tighter than what f64 can
        // represent relative to the running total; floor it at ~50 ulp
        let target = abs_tol.max(50.0 * f64::EPSILON * total_value.abs());
        if total_error <= target || heap.len() >= MAX_INTERVALS {
            break;
        }
        let worst = heap.pop().expect("heap non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval at floating-point resolution; keep its estimate
            total_error -= worst.error;
            heap.push(Segment {
                error: 0.0,
                ..worst
            });
            continue;
        }
        let left = gk15(f, worst.a, mid)?;
        let right = gk15(f, mid, worst.b)?;
        total_value += left.value + right.value - worst.value;
        total_error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }

    if total_error > abs_tol.max(1e-12 * total_value.abs()) {
        return Err(QuadError::ToleranceNotReached {
            tol: abs_tol,
            err: total_error,
            intervals: heap.len(),
        });
    }
    Ok(sign * total_value)
}

/// Integrates a closure that cannot fail.
pub fn integrate_infallible<F>(f: F, a: f64, b: f64, abs_tol: f64) -> Result<f64, QuadError>
where
    F: Fn(f64) -> f64,
{
    integrate(|x| Ok(f(x)), a, b, abs_tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let v = integrate_infallible(|x| x * x, 0.0, 3.0, 1e-12).unwrap();
        assert!((v - 9.0).abs() < 1e-10);
    }

    #[test]
    fn reversed_bounds_flip_sign() {
        let v = integrate_infallible(|x| x, 2.0, 0.0, 1e-12).unwrap();
        assert!((v + 2.0).abs() < 1e-10);
    }

    #[test]
    fn endpoint_singularity_inverse_sqrt() {
        // integral of s^(-1/2) over [0,1] = 2
        let v = integrate_infallible(|x| x.powf(-0.5), 0.0, 1.0, 1e-10).unwrap();
        assert!((v - 2.0).abs() < 1e-9, "got {v}");
    }

    #[test]
    fn gaussian_tail() {
        let v = integrate_infallible(|x| (-x * x / 2.0).exp(), 0.0, 10.0, 1e-13).unwrap();
        assert!((v - (std::f64::consts::PI / 2.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn interior_pole_reports_singularity() {
        let r = integrate(
            |x| {
                if x == 0.5 {
                    Ok(f64::INFINITY)
                } else {
                    Ok(1.0 / (x - 0.5).abs())
                }
            },
            0.0,
            1.0,
            1e-8,
        );
        assert!(r.is_err());
    }
}
