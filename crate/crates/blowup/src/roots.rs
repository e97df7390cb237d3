//! Bracketed root finding for monotone functions.
//!
//! All inversions in the library (`H`, `Psi`, `A`, `B`) go through these
//! helpers: a doubling search establishes a bracket, bisection closes it.

use crate::expr::EvalError;

#[derive(Debug, Clone, thiserror::Error)]
pub enum RootError {
    #[error("target {target} not bracketed: function saturates below it")]
    TargetUnreachable { target: f64 },
    #[error("no sign change on the supplied bracket [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },
    #[error("function evaluation failed at {x}: {source}")]
    Eval { x: f64, source: EvalError },
    #[error("{0}")]
    Numeric(String),
}

/// Bisects `f` on `[lo, hi]` down to absolute width `xtol`.
///
/// Requires `f(lo)` and `f(hi)` to have opposite signs (zero counts for
/// either side).
pub fn bisect<F>(f: F, mut lo: f64, mut hi: f64, xtol: f64) -> Result<f64, RootError>
where
    F: Fn(f64) -> Result<f64, EvalError>,
{
    let eval = |x: f64, f: &F| f(x).map_err(|source| RootError::Eval { x, source });
    let mut flo = eval(lo, &f)?;
    let fhi = eval(hi, &f)?;
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(RootError::NoSignChange { lo, hi });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo).abs() <= xtol || mid <= lo.min(hi) || mid >= lo.max(hi) {
            return Ok(mid);
        }
        let fm = eval(mid, &f)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Solves `g(x) = target` for an increasing `g`, expanding the bracket by
/// doubling the offset from `start` until `g` exceeds the target.
///
/// `limit` caps the search; if `g` never reaches `target` below `limit` the
/// target is reported unreachable (the saturating case).
pub fn invert_increasing<F>(
    g: F,
    target: f64,
    start: f64,
    limit: f64,
    xtol: f64,
) -> Result<f64, RootError>
where
    F: Fn(f64) -> Result<f64, EvalError>,
{
    let eval = |x: f64, g: &F| g(x).map_err(|source| RootError::Eval { x, source });
    let f_start = eval(start, &g)?;
    if f_start >= target {
        return Ok(start);
    }
    let mut step = xtol.max(1e-6) * (1.0 + start.abs());
    let mut lo = start;
    let mut hi;
    loop {
        hi = (lo + step).min(limit);
        let v = eval(hi, &g)?;
        if v >= target {
            break;
        }
        if hi >= limit {
            return Err(RootError::TargetUnreachable { target });
        }
        lo = hi;
        step *= 2.0;
    }
    bisect(|x| g(x).map(|v| v - target), lo, hi, xtol)
}

/// Same as [`invert_increasing`] but approaching a finite right endpoint
/// `end` geometrically instead of doubling away to infinity. Used to invert
/// monotone maps on an open interval whose value blows up at `end`.
pub fn invert_increasing_to_endpoint<F>(
    g: F,
    target: f64,
    start: f64,
    end: f64,
    xtol: f64,
) -> Result<f64, RootError>
where
    F: Fn(f64) -> Result<f64, EvalError>,
{
    let eval = |x: f64, g: &F| g(x).map_err(|source| RootError::Eval { x, source });
    if eval(start, &g)? >= target {
        return Ok(start);
    }
    let mut frac = 0.5;
    let mut lo = start;
    for _ in 0..200 {
        let hi = end - (end - start) * frac;
        match eval(hi, &g) {
            Ok(v) if v >= target => {
                return bisect(|x| g(x).map(|v| v - target), lo, hi, xtol);
            }
            Ok(_) => {
                lo = hi;
                frac *= 0.5;
            }
            // evaluation failure hugging the endpoint: stop expanding
            Err(_) => break,
        }
    }
    Err(RootError::TargetUnreachable { target })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_cubic() {
        let r = bisect(|x| Ok(x * x * x - 2.0), 0.0, 2.0, 1e-12).unwrap();
        assert!((r - 2.0_f64.powf(1.0 / 3.0)).abs() < 1e-10);
    }

    #[test]
    fn invert_doubles_outward() {
        let r = invert_increasing(|x| Ok(x * x * x), 1000.0, 0.0, 1e12, 1e-10).unwrap();
        assert!((r - 10.0).abs() < 1e-8);
    }

    #[test]
    fn saturating_function_unreachable() {
        let r = invert_increasing(|x: f64| Ok(1.0 - (-x).exp()), 2.0, 0.0, 1e9, 1e-10);
        assert!(matches!(r, Err(RootError::TargetUnreachable { .. })));
    }

    #[test]
    fn endpoint_approach() {
        // g(x) = 1/(1-x) on [0,1): solve g = 100 -> x = 0.99
        let g = |x: f64| Ok(1.0 / (1.0 - x));
        let r = invert_increasing_to_endpoint(g, 100.0, 0.0, 1.0, 1e-12).unwrap();
        assert!((r - 0.99).abs() < 1e-10);
    }
}
