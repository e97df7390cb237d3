//! `DistCurve`: a monotone CDF sampled on a time grid.
//!
//! This is the common currency between the analytic, Monte Carlo and PDE
//! modules, and the unit that the CLI writes to disk (CSV and JSON).

use serde::Serialize;

#[derive(Debug, Clone, thiserror::Error)]
pub enum CurveError {
    #[error("time grid must be non-empty, non-negative and strictly increasing")]
    BadGrid,
    #[error("cdf value {value} at index {index} outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("cdf decreases by {drop} at index {index}")]
    NotMonotone { index: usize, drop: f64 },
}

/// Tolerance absorbed when validating monotonicity and range; solver output
/// may wiggle at roundoff scale.
const SLACK: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct DistCurve {
    pub times: Vec<f64>,
    pub cdf: Vec<f64>,
    /// Name of the closed formula used, when one exists.
    pub closed_form: Option<String>,
    /// CDF value at the last grid time.
    pub total_mass: f64,
    /// Per-point binomial standard errors (Monte Carlo curves only).
    pub stderr: Option<Vec<f64>>,
    /// Fraction of censored mass (Monte Carlo curves only).
    pub censored_mass: Option<f64>,
}

impl DistCurve {
    pub fn new(
        times: Vec<f64>,
        cdf: Vec<f64>,
        closed_form: Option<String>,
    ) -> Result<Self, CurveError> {
        if times.is_empty()
            || times.len() != cdf.len()
            || times[0] < 0.0
            || times.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(CurveError::BadGrid);
        }
        let mut clean = Vec::with_capacity(cdf.len());
        let mut prev = 0.0_f64;
        for (i, &v) in cdf.iter().enumerate() {
            if !(-SLACK..=1.0 + SLACK).contains(&v) {
                return Err(CurveError::OutOfRange { index: i, value: v });
            }
            let v = v.clamp(0.0, 1.0);
            if v < prev - SLACK {
                return Err(CurveError::NotMonotone {
                    index: i,
                    drop: prev - v,
                });
            }
            let v = v.max(prev);
            clean.push(v);
            prev = v;
        }
        let total_mass = *clean.last().unwrap();
        Ok(DistCurve {
            times,
            cdf: clean,
            closed_form,
            total_mass,
            stderr: None,
            censored_mass: None,
        })
    }

    /// Linear interpolation of the CDF at time `t` (constant beyond the grid).
    pub fn interp(&self, t: f64) -> f64 {
        if t <= self.times[0] {
            return if t < self.times[0] { 0.0 } else { self.cdf[0] };
        }
        if t >= *self.times.last().unwrap() {
            return *self.cdf.last().unwrap();
        }
        let i = self.times.partition_point(|&u| u <= t);
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        c0 + (c1 - c0) * (t - t0) / (t1 - t0)
    }

    /// Largest absolute gap against `other`, comparing both on `grid`.
    pub fn sup_gap_on(&self, other: &DistCurve, grid: &[f64]) -> f64 {
        grid.iter()
            .map(|&t| (self.interp(t) - other.interp(t)).abs())
            .fold(0.0, f64::max)
    }

    /// CSV with header `t,cdf`, 17 significant digits, byte-stable.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,cdf\n");
        for (t, c) in self.times.iter().zip(self.cdf.iter()) {
            out.push_str(&format!("{:.16e},{:.16e}\n", t, c));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_decreasing_cdf() {
        let r = DistCurve::new(vec![1.0, 2.0], vec![0.5, 0.3], None);
        assert!(matches!(r, Err(CurveError::NotMonotone { .. })));
    }

    #[test]
    fn interp_is_piecewise_linear() {
        let c = DistCurve::new(vec![0.0, 1.0, 2.0], vec![0.0, 0.5, 1.0], None).unwrap();
        assert_eq!(c.interp(0.5), 0.25);
        assert_eq!(c.interp(5.0), 1.0);
        assert_eq!(c.interp(-1.0), 0.0);
    }

    #[test]
    fn csv_round_trip_precision() {
        let c = DistCurve::new(vec![0.1, 0.2], vec![0.123456789012345, 0.5], None).unwrap();
        let csv = c.to_csv();
        let line = csv.lines().nth(1).unwrap();
        let v: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(v, 0.123456789012345);
    }
}
