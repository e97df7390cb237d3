//! Finite-difference machinery: the forward PDE whose bounded solution is
//! the explosion-time CDF, the lambda-resolvent two-point boundary value
//! problem, the traveling-wave substitution, and the Laplace-transform
//! identity.
//!
//! The forward equation is `u_t = (1/2) sigma^2(x) u_xx + b(x) u_x` with
//! `u(0, x) = 0` and Dirichlet value 1 on the boundary rays that are
//! reachable (per case); `u(t, xi)` is then the probability of explosion by
//! time `t` from `xi`.

use serde::Serialize;

use crate::curve::{CurveError, DistCurve};
use crate::expr::FunctionExpr;

#[derive(Debug, Clone, thiserror::Error)]
pub enum PdeError {
    #[error("invalid problem: {0}")]
    InvalidInput(String),
    #[error("coefficient evaluation failed at x = {x}: {message}")]
    Coefficient { x: f64, message: String },
    #[error(
        "instability detected at t = {t}: u = {value} outside [-1e-6, 1 + 1e-6]; \
         max cell Peclet {max_peclet:.3}, dt = {dt:e}, min dx = {min_dx:e}"
    )]
    Unstable {
        t: f64,
        value: f64,
        max_peclet: f64,
        dt: f64,
        min_dx: f64,
    },
    #[error("singular tridiagonal system at row {row} (pivot {pivot:e})")]
    Singular { row: usize, pivot: f64 },
    #[error("curve assembly failed: {0}")]
    Curve(#[from] CurveError),
}

/// Which truncated ends carry the Dirichlet value 1 (explosion reachable
/// through that end); the other end holds 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BcCase {
    Both1,
    RightOnly,
    LeftOnly,
}

/// Forward-PDE problem on a truncated spatial grid.
#[derive(Debug, Clone)]
pub struct PdeProblem {
    pub b: FunctionExpr,
    pub sigma: FunctionExpr,
    pub bc_case: BcCase,
    /// Strictly increasing spatial nodes (possibly nonuniform).
    pub xs: Vec<f64>,
    pub t_final: f64,
    pub nt: usize,
}

impl PdeProblem {
    pub fn new(
        b: FunctionExpr,
        sigma: FunctionExpr,
        bc_case: BcCase,
        xs: Vec<f64>,
        t_final: f64,
        nt: usize,
    ) -> Result<Self, PdeError> {
        if xs.len() < 16 || nt < 16 {
            return Err(PdeError::InvalidInput(
                "need at least 16 spatial nodes and 16 time steps".into(),
            ));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(PdeError::InvalidInput(
                "spatial grid must be strictly increasing".into(),
            ));
        }
        if t_final <= 0.0 {
            return Err(PdeError::InvalidInput("t_final must be positive".into()));
        }
        Ok(PdeProblem {
            b,
            sigma,
            bc_case,
            xs,
            t_final,
            nt,
        })
    }

    /// Uniform grid constructor.
    pub fn uniform(
        b: FunctionExpr,
        sigma: FunctionExpr,
        bc_case: BcCase,
        x_lo: f64,
        x_hi: f64,
        nx: usize,
        t_final: f64,
        nt: usize,
    ) -> Result<Self, PdeError> {
        if x_lo >= x_hi {
            return Err(PdeError::InvalidInput("x_lo must be below x_hi".into()));
        }
        let xs = (0..nx)
            .map(|i| x_lo + (x_hi - x_lo) * i as f64 / (nx - 1) as f64)
            .collect();
        PdeProblem::new(b, sigma, bc_case, xs, t_final, nt)
    }
}

/// Builds a spatial grid whose nodes are uniform in the scale coordinate
/// `psi(x) = int_ref^x dz / sigma(z)`, so resolution follows the process's
/// natural geometry. Useful when the state domain must be truncated far out
/// (e.g. power-law diffusions where the scale map compresses `[1, inf)` into
/// a bounded interval).
pub fn psi_uniform_grid(
    sigma: &FunctionExpr,
    x_lo: f64,
    x_hi: f64,
    nx: usize,
) -> Result<Vec<f64>, PdeError> {
    if !(x_lo < x_hi) || nx < 16 {
        return Err(PdeError::InvalidInput(
            "need x_lo < x_hi and at least 16 nodes".into(),
        ));
    }
    let psi = |x: f64| -> Result<f64, PdeError> {
        crate::quad::integrate(
            |z| sigma.eval(z).map(|s| 1.0 / s),
            x_lo,
            x,
            1e-12,
        )
        .map_err(|e| PdeError::InvalidInput(format!("scale map quadrature failed: {e}")))
    };
    let psi_hi = psi(x_hi)?;
    if !psi_hi.is_finite() || psi_hi <= 0.0 {
        return Err(PdeError::InvalidInput(format!(
            "scale map not increasing on the domain (psi(x_hi) = {psi_hi})"
        )));
    }
    let mut xs = Vec::with_capacity(nx);
    xs.push(x_lo);
    for i in 1..nx - 1 {
        let target = psi_hi * i as f64 / (nx - 1) as f64;
        let x = crate::roots::bisect(
            |x| {
                psi(x)
                    .map(|v| v - target)
                    .map_err(|e| crate::expr::EvalError::Other(e.to_string()))
            },
            x_lo,
            x_hi,
            1e-12 * (1.0 + x_hi.abs()),
        )
        .map_err(|e| PdeError::InvalidInput(format!("scale grid inversion failed: {e}")))?;
        xs.push(x);
    }
    xs.push(x_hi);
    // defend against roundoff producing equal neighbors
    if xs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(PdeError::InvalidInput(
            "scale grid collapsed; increase node spacing or shrink the domain".into(),
        ));
    }
    Ok(xs)
}

/// Builds a grid uniform in `ln x` on `0 < x_lo < x_hi`. For power-law
/// coefficients (`sigma = x^alpha`, drift `~ x^(2 alpha - 1)`) this keeps the
/// cell Peclet number constant across the domain, so a far-out truncation
/// point costs only logarithmically many nodes.
pub fn log_uniform_grid(x_lo: f64, x_hi: f64, nx: usize) -> Result<Vec<f64>, PdeError> {
    if !(0.0 < x_lo && x_lo < x_hi) || nx < 16 {
        return Err(PdeError::InvalidInput(
            "need 0 < x_lo < x_hi and at least 16 nodes".into(),
        ));
    }
    let (llo, lhi) = (x_lo.ln(), x_hi.ln());
    let mut xs: Vec<f64> = (0..nx)
        .map(|i| (llo + (lhi - llo) * i as f64 / (nx - 1) as f64).exp())
        .collect();
    xs[0] = x_lo;
    *xs.last_mut().unwrap() = x_hi;
    Ok(xs)
}

/// Space-time solution grid with scheme diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct UGrid {
    pub times: Vec<f64>,
    pub xs: Vec<f64>,
    /// `u[n][i]` is the solution at `times[n]`, `xs[i]`.
    pub u: Vec<Vec<f64>>,
    pub max_peclet: f64,
    /// Fraction of interior cells using first-order upwinding.
    pub upwind_fraction: f64,
}

impl UGrid {
    /// CSV body `t,x,u`, byte-stable 17-significant-digit floats.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x,u\n");
        for (n, t) in self.times.iter().enumerate() {
            for (i, x) in self.xs.iter().enumerate() {
                out.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", t, x, self.u[n][i]));
            }
        }
        out
    }

    pub fn metadata_json(&self) -> String {
        #[derive(Serialize)]
        struct Meta {
            scheme: &'static str,
            nx: usize,
            nt: usize,
            max_peclet: f64,
            upwind_fraction: f64,
        }
        serde_json::to_string_pretty(&Meta {
            scheme: "theta-scheme (Crank-Nicolson, two implicit-Euler startup steps), \
                     first-order upwinding above cell Peclet 2",
            nx: self.xs.len(),
            nt: self.times.len() - 1,
            max_peclet: self.max_peclet,
            upwind_fraction: self.upwind_fraction,
        })
        .expect("metadata serialization cannot fail")
    }

    /// Linear interpolation of the solution in `x` at time level `n`.
    pub fn interp_x(&self, n: usize, x: f64) -> f64 {
        let xs = &self.xs;
        if x <= xs[0] {
            return self.u[n][0];
        }
        if x >= *xs.last().unwrap() {
            return *self.u[n].last().unwrap();
        }
        let i = xs.partition_point(|&v| v <= x);
        let (x0, x1) = (xs[i - 1], xs[i]);
        let (u0, u1) = (self.u[n][i - 1], self.u[n][i]);
        u0 + (u1 - u0) * (x - x0) / (x1 - x0)
    }
}

/// Solves the tridiagonal system `lower[i] u[i-1] + diag[i] u[i] +
/// upper[i] u[i+1] = rhs[i]` in place (Thomas algorithm).
fn thomas(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &mut [f64],
) -> Result<(), PdeError> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut pivot = diag[0];
    if pivot.abs() < 1e-300 {
        return Err(PdeError::Singular { row: 0, pivot });
    }
    c[0] = upper[0] / pivot;
    rhs[0] /= pivot;
    for i in 1..n {
        pivot = diag[i] - lower[i] * c[i - 1];
        if pivot.abs() < 1e-300 {
            return Err(PdeError::Singular { row: i, pivot });
        }
        c[i] = upper[i] / pivot;
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
    Ok(())
}

/// Interior spatial operator rows for `L u = (1/2) sigma^2 u_xx + b u_x` on a
/// (possibly nonuniform) grid. Returns `(lower, diag, upper)` for rows
/// `1..n-1` plus Peclet diagnostics.
struct SpatialOperator {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    max_peclet: f64,
    upwind_fraction: f64,
}

fn build_operator(p: &PdeProblem) -> Result<SpatialOperator, PdeError> {
    let n = p.xs.len();
    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    let mut max_peclet = 0.0f64;
    let mut upwinded = 0usize;
    for i in 1..n - 1 {
        let x = p.xs[i];
        let hm = x - p.xs[i - 1];
        let hp = p.xs[i + 1] - x;
        let sig = p
            .sigma
            .eval(x)
            .map_err(|e| PdeError::Coefficient { x, message: e.to_string() })?;
        let drift = p
            .b
            .eval(x)
            .map_err(|e| PdeError::Coefficient { x, message: e.to_string() })?;
        let s2 = 0.5 * sig * sig;
        if !(s2.is_finite() && drift.is_finite()) || s2 < 0.0 {
            return Err(PdeError::Coefficient {
                x,
                message: format!("non-finite or negative coefficients ({sig}, {drift})"),
            });
        }
        // second derivative on the nonuniform stencil
        let d2m = 2.0 / (hm * (hm + hp));
        let d2c = -2.0 / (hm * hp);
        let d2p = 2.0 / (hp * (hm + hp));
        lower[i] += s2 * d2m;
        diag[i] += s2 * d2c;
        upper[i] += s2 * d2p;

        let peclet = if s2 > 0.0 {
            drift.abs() * hm.max(hp) / (2.0 * s2)
        } else {
            f64::INFINITY
        };
        max_peclet = max_peclet.max(if peclet.is_finite() { peclet } else { 0.0 });
        let upwind = peclet > 2.0 || s2 == 0.0;
        if upwind {
            upwinded += 1;
            // first-order upwind difference keeps the maximum principle
            if drift >= 0.0 {
                diag[i] += -drift / hp;
                upper[i] += drift / hp;
            } else {
                lower[i] += -drift / hm;
                diag[i] += drift / hm;
            }
        } else {
            // second-order central difference on the nonuniform stencil
            lower[i] += -drift * hp / (hm * (hm + hp));
            diag[i] += drift * (hp - hm) / (hm * hp);
            upper[i] += drift * hm / (hp * (hm + hp));
        }
    }
    Ok(SpatialOperator {
        lower,
        diag,
        upper,
        max_peclet,
        upwind_fraction: upwinded as f64 / (n - 2) as f64,
    })
}

/// Solves the forward PDE with a theta scheme: Crank-Nicolson in the bulk
/// with two implicit-Euler startup steps to damp the incompatible corner
/// between the zero initial condition and the unit boundary data.
pub fn solve_forward(p: &PdeProblem) -> Result<UGrid, PdeError> {
    let n = p.xs.len();
    let op = build_operator(p)?;
    let dt = p.t_final / p.nt as f64;
    let min_dx = p
        .xs
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);

    let (bc_left, bc_right) = match p.bc_case {
        BcCase::Both1 => (1.0, 1.0),
        BcCase::RightOnly => (0.0, 1.0),
        BcCase::LeftOnly => (1.0, 0.0),
    };

    let mut times = Vec::with_capacity(p.nt + 1);
    times.push(0.0);
    let mut levels: Vec<Vec<f64>> = Vec::with_capacity(p.nt + 1);
    levels.push(vec![0.0; n]);

    let mut u = vec![0.0f64; n];
    for step in 0..p.nt {
        let theta = if step < 2 { 1.0 } else { 0.5 };
        // rhs = (I + (1 - theta) dt L) u^n on interior rows
        let mut rhs = vec![0.0; n];
        for i in 1..n - 1 {
            let lu = op.lower[i] * u[i - 1] + op.diag[i] * u[i] + op.upper[i] * u[i + 1];
            rhs[i] = u[i] + (1.0 - theta) * dt * lu;
        }
        rhs[0] = bc_left;
        rhs[n - 1] = bc_right;

        // system matrix I - theta dt L, identity on boundary rows
        let mut lo = vec![0.0; n];
        let mut di = vec![1.0; n];
        let mut up = vec![0.0; n];
        for i in 1..n - 1 {
            lo[i] = -theta * dt * op.lower[i];
            di[i] = 1.0 - theta * dt * op.diag[i];
            up[i] = -theta * dt * op.upper[i];
        }
        thomas(&lo, &di, &up, &mut rhs)?;
        u = rhs;

        let t = (step + 1) as f64 * dt;
        for &v in &u {
            if !(-1e-6..=1.0 + 1e-6).contains(&v) {
                return Err(PdeError::Unstable {
                    t,
                    value: v,
                    max_peclet: op.max_peclet,
                    dt,
                    min_dx,
                });
            }
        }
        times.push(t);
        levels.push(u.clone());
    }

    Ok(UGrid {
        times,
        xs: p.xs.clone(),
        u: levels,
        max_peclet: op.max_peclet,
        upwind_fraction: op.upwind_fraction,
    })
}

/// Reads the explosion-time CDF `t -> u(t, xi)` off a solved grid.
pub fn extract_cdf(grid: &UGrid, xi: f64) -> Result<DistCurve, PdeError> {
    let (lo, hi) = (grid.xs[0], *grid.xs.last().unwrap());
    if xi <= lo || xi >= hi {
        return Err(PdeError::InvalidInput(format!(
            "xi = {xi} not interior to [{lo}, {hi}]"
        )));
    }
    let cdf: Vec<f64> = (0..grid.times.len())
        .map(|nidx| grid.interp_x(nidx, xi))
        .collect();
    Ok(DistCurve::new(grid.times.clone(), cdf, None)?)
}

/// Resolvent problem `(c^2/2) w'' + (g(x) + a - bshift) w' - lambda w = 0`
/// on a truncated domain with `w(x_hi) = 1`.
#[derive(Debug, Clone)]
pub struct ResolventProblem {
    pub g: FunctionExpr,
    pub a: f64,
    pub bshift: f64,
    pub c: f64,
    pub lambda: f64,
    pub xs: Vec<f64>,
}

impl ResolventProblem {
    pub fn new(
        g: FunctionExpr,
        a: f64,
        bshift: f64,
        c: f64,
        lambda: f64,
        xs: Vec<f64>,
    ) -> Result<Self, PdeError> {
        if c == 0.0 {
            return Err(PdeError::InvalidInput("c must be nonzero".into()));
        }
        if lambda <= 0.0 {
            return Err(PdeError::InvalidInput("lambda must be positive".into()));
        }
        if xs.len() < 16 || xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(PdeError::InvalidInput(
                "need at least 16 strictly increasing nodes".into(),
            ));
        }
        Ok(ResolventProblem {
            g,
            a,
            bshift,
            c,
            lambda,
            xs,
        })
    }
}

/// Solves the resolvent boundary value problem.
///
/// Right boundary `w(x_hi) = 1`; at the truncated left end a zero-curvature
/// outflow row `w_0 - 2 w_1 + w_2 = 0` stands in for boundedness on the cut
/// ray. That row couples three unknowns, so it is eliminated against the
/// first interior row before the tridiagonal (Thomas) solve.
pub fn solve_resolvent_ode(p: &ResolventProblem) -> Result<Vec<f64>, PdeError> {
    let n = p.xs.len();
    let half_c2 = 0.5 * p.c * p.c;
    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    let mut rhs = vec![0.0; n];

    for i in 1..n - 1 {
        let x = p.xs[i];
        let hm = x - p.xs[i - 1];
        let hp = p.xs[i + 1] - x;
        let gx = p
            .g
            .eval(x)
            .map_err(|e| PdeError::Coefficient { x, message: e.to_string() })?;
        let drift = gx + p.a - p.bshift;
        lower[i] = half_c2 * 2.0 / (hm * (hm + hp)) - drift * hp / (hm * (hm + hp));
        diag[i] = -half_c2 * 2.0 / (hm * hp) + drift * (hp - hm) / (hm * hp) - p.lambda;
        upper[i] = half_c2 * 2.0 / (hp * (hm + hp)) + drift * hm / (hp * (hm + hp));
    }
    // right boundary: w = 1
    diag[n - 1] = 1.0;
    rhs[n - 1] = 1.0;

    // left outflow row w0 - 2 w1 + w2 = 0 eliminated against row 1:
    // substitute w0 = 2 w1 - w2 into row 1's lower coefficient
    diag[0] = 1.0; // placeholder; recovered after the solve
    let l1 = lower[1];
    lower[1] = 0.0;
    diag[1] += 2.0 * l1;
    upper[1] += -l1;

    let mut interior_rhs: Vec<f64> = rhs[1..].to_vec();
    thomas(&lower[1..], &diag[1..], &upper[1..], &mut interior_rhs)?;
    let mut w = vec![0.0; n];
    w[1..].copy_from_slice(&interior_rhs);
    w[0] = 2.0 * w[1] - w[2];

    // the extrapolated outflow node can undershoot zero by truncation error
    // when the tail has decayed; only the solved rows get the strict check
    for (i, &v) in w.iter().enumerate().skip(1) {
        if !(-1e-6..=1.0 + 1e-6).contains(&v) {
            return Err(PdeError::Unstable {
                t: 0.0,
                value: v,
                max_peclet: 0.0,
                dt: 0.0,
                min_dx: p.xs[i] - p.xs[i - 1],
            });
        }
    }
    Ok(w.iter().map(|&v| v.clamp(0.0, 1.0)).collect())
}

/// The traveling-wave realization `u(t, x) = w(x - bshift t)` of the
/// time-dependent problem with shift-structured drift.
pub fn traveling_wave_check(
    w: &[f64],
    xs: &[f64],
    bshift: f64,
    t: f64,
    x: f64,
) -> Result<f64, PdeError> {
    let arg = x - bshift * t;
    if arg < xs[0] || arg > *xs.last().unwrap() {
        return Err(PdeError::InvalidInput(format!(
            "x - bshift t = {arg} outside the wave grid"
        )));
    }
    let i = xs.partition_point(|&v| v <= arg).clamp(1, xs.len() - 1);
    let (x0, x1) = (xs[i - 1], xs[i]);
    let (w0, w1) = (w[i - 1], w[i]);
    Ok(w0 + (w1 - w0) * (arg - x0) / (x1 - x0))
}

/// Laplace transform of the explosion time from its CDF:
/// `lambda int_0^inf P(tau <= u) e^(-lambda u) du`, trapezoid rule on the
/// curve's grid plus the closed-form tail with the CDF frozen at its last
/// value (documented approximation).
pub fn laplace_from_cdf(curve: &DistCurve, lambda: f64) -> Result<f64, PdeError> {
    if lambda <= 0.0 {
        return Err(PdeError::InvalidInput("lambda must be positive".into()));
    }
    let mut ts: Vec<f64> = Vec::with_capacity(curve.times.len() + 1);
    if curve.times[0] > 0.0 {
        ts.push(0.0);
    }
    ts.extend_from_slice(&curve.times);
    let vals: Vec<f64> = ts
        .iter()
        .map(|&t| lambda * curve.interp(t) * (-lambda * t).exp())
        .collect();
    let mut total = 0.0;
    for i in 1..ts.len() {
        total += 0.5 * (vals[i] + vals[i - 1]) * (ts[i] - ts[i - 1]);
    }
    let t_end = *ts.last().unwrap();
    let tail = curve.total_mass * (-lambda * t_end).exp();
    Ok(total + tail)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{one_barrier_cdf, two_barrier_cdf, BarrierPair};
    use crate::ext_real::ExtReal;

    fn fx(src: &str) -> FunctionExpr {
        FunctionExpr::parse(src, "x").unwrap()
    }

    #[test]
    fn initial_slice_is_zero_and_boundaries_hold() {
        let p = PdeProblem::uniform(
            fx("0"),
            fx("1"),
            BcCase::Both1,
            -2.0,
            2.0,
            64,
            1.0,
            64,
        )
        .unwrap();
        let g = solve_forward(&p).unwrap();
        assert!(g.u[0].iter().all(|&v| v == 0.0));
        for n in 1..g.times.len() {
            assert_eq!(g.u[n][0], 1.0);
            assert_eq!(*g.u[n].last().unwrap(), 1.0);
        }
    }

    #[test]
    fn brownian_exit_matches_two_barrier_series() {
        // pure Brownian motion on (-1, 1): u(t, 0) is the two-barrier exit
        // CDF with clock value t
        let p = PdeProblem::uniform(
            fx("0"),
            fx("1"),
            BcCase::Both1,
            -1.0,
            1.0,
            201,
            2.0,
            400,
        )
        .unwrap();
        let g = solve_forward(&p).unwrap();
        let bp = BarrierPair::new(ExtReal::Finite(-1.0), ExtReal::Finite(1.0)).unwrap();
        for n in (40..=400).step_by(40) {
            let t = g.times[n];
            let pde = g.interp_x(n, 0.0);
            let exact = two_barrier_cdf(&bp, t, 1e-12).unwrap();
            assert!(
                (pde - exact).abs() < 5e-3,
                "t = {t}: pde {pde} vs exact {exact}"
            );
        }
    }

    #[test]
    fn extract_cdf_monotone_and_interior_only() {
        let p = PdeProblem::uniform(
            fx("0"),
            fx("1"),
            BcCase::Both1,
            -1.0,
            1.0,
            101,
            1.0,
            100,
        )
        .unwrap();
        let g = solve_forward(&p).unwrap();
        let c = extract_cdf(&g, 0.3).unwrap();
        assert!(c.cdf.windows(2).all(|w| w[1] >= w[0] - 1e-8));
        assert!(extract_cdf(&g, 1.5).is_err());
    }

    #[test]
    fn case_splitting_sums_to_both() {
        // Brownian motion with drift on a truncated interval: right-exit and
        // left-exit probabilities partition total exit
        let mk = |bc| {
            PdeProblem::uniform(fx("0.3"), fx("1"), bc, -3.0, 3.0, 181, 2.0, 200).unwrap()
        };
        let both = solve_forward(&mk(BcCase::Both1)).unwrap();
        let right = solve_forward(&mk(BcCase::RightOnly)).unwrap();
        let left = solve_forward(&mk(BcCase::LeftOnly)).unwrap();
        for n in (20..=200).step_by(20) {
            for &x in &[-1.0, 0.0, 1.0] {
                let s = right.interp_x(n, x) + left.interp_x(n, x);
                let b = both.interp_x(n, x);
                assert!((s - b).abs() < 5e-3, "n = {n}, x = {x}: {s} vs {b}");
            }
        }
    }

    #[test]
    fn grid_convergence_second_order() {
        // error against the two-barrier series drops by >= 3x when halving
        // both steps
        let run = |nx: usize, nt: usize| {
            let p = PdeProblem::uniform(
                fx("0"),
                fx("1"),
                BcCase::Both1,
                -1.0,
                1.0,
                nx,
                1.0,
                nt,
            )
            .unwrap();
            let g = solve_forward(&p).unwrap();
            let bp =
                BarrierPair::new(ExtReal::Finite(-1.0), ExtReal::Finite(1.0)).unwrap();
            let mut err = 0.0f64;
            for n in (nt / 4..=nt).step_by(nt / 8) {
                let t = g.times[n];
                let exact = two_barrier_cdf(&bp, t, 1e-12).unwrap();
                err = err.max((g.interp_x(n, 0.0) - exact).abs());
            }
            err
        };
        let coarse = run(51, 50);
        let fine = run(101, 100);
        assert!(
            coarse / fine >= 3.0,
            "coarse {coarse:.3e} vs fine {fine:.3e}"
        );
    }

    fn uniform_xs(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect()
    }

    #[test]
    fn resolvent_constant_coefficient_closed_form() {
        // g = 0, a = bshift: w(x) = exp(sqrt(2 lambda)/|c| (x - x_hi))
        let xs = uniform_xs(-20.0, 1.0, 2101);
        let p = ResolventProblem::new(fx("0"), 0.7, 0.7, 1.0, 1.0, xs.clone()).unwrap();
        let w = solve_resolvent_ode(&p).unwrap();
        assert_eq!(*w.last().unwrap(), 1.0);
        let rate = (2.0f64).sqrt();
        let mut sup = 0.0f64;
        for (i, &x) in xs.iter().enumerate() {
            let exact = (rate * (x - 1.0)).exp();
            sup = sup.max((w[i] - exact).abs());
        }
        assert!(sup <= 1e-4, "sup error {sup:.3e}");
    }

    #[test]
    fn resolvent_sinh_profile_on_short_domain() {
        // zero-curvature outflow pins w ~ 0 at the cut (w'' = 2 lambda w /
        // c^2 there), so the exact constant-coefficient solution is
        // sinh(k (x - x_lo)) / sinh(k L) with k = sqrt(2 lambda)/|c|
        let (lo, hi) = (-10.0, 1.0);
        let xs = uniform_xs(lo, hi, 2201);
        let lambda = 1e-4;
        let p = ResolventProblem::new(fx("0"), 0.0, 0.0, 1.0, lambda, xs.clone()).unwrap();
        let w = solve_resolvent_ode(&p).unwrap();
        let k = (2.0 * lambda).sqrt();
        let mut sup = 0.0f64;
        for (i, &x) in xs.iter().enumerate() {
            let exact = (k * (x - lo)).sinh() / (k * (hi - lo)).sinh();
            sup = sup.max((w[i] - exact).abs());
        }
        assert!(sup <= 1e-3, "sup error {sup:.3e}");
    }

    #[test]
    fn traveling_wave_shift_and_residual() {
        let xs = uniform_xs(-20.0, 1.0, 2101);
        let lambda = 1.0;
        let p = ResolventProblem::new(fx("0"), 0.5, 0.5, 1.0, lambda, xs.clone()).unwrap();
        let w = solve_resolvent_ode(&p).unwrap();
        // bshift = 0: u(t, x) = w(x)
        let v = traveling_wave_check(&w, &xs, 0.0, 5.0, 0.0).unwrap();
        let direct = traveling_wave_check(&w, &xs, 0.7, 0.0, 0.0).unwrap();
        assert!((v - direct).abs() < 1e-12);
        // discrete PDE residual of u(t, x) = w(x - b t):
        // (1/2) c^2 u_xx + (g(x - b t) + a) u_x - b u_x... collapses to the
        // resolvent ODE in the wave coordinate; check it at interior nodes
        let h = xs[1] - xs[0];
        let mut max_resid = 0.0f64;
        for i in 2..xs.len() - 2 {
            let wxx = (w[i + 1] - 2.0 * w[i] + w[i - 1]) / (h * h);
            let wx = (w[i + 1] - w[i - 1]) / (2.0 * h);
            // drift seen by the wave frame: g + a - bshift = 0 here
            let resid = 0.5 * wxx + 0.0 * wx - lambda * w[i];
            max_resid = max_resid.max(resid.abs());
        }
        assert!(max_resid <= 1e-3, "residual {max_resid:.3e}");
    }

    #[test]
    fn laplace_trivial_cases() {
        // instant explosion: E e^{-lambda tau} = 1 up to trapezoid error
        let times: Vec<f64> = (0..=400).map(|i| i as f64 * 0.005).collect();
        let ones = DistCurve::new(times.clone(), vec![1.0; times.len()], None).unwrap();
        for lambda in [0.1, 1.0, 10.0] {
            let v = laplace_from_cdf(&ones, lambda).unwrap();
            assert!((v - 1.0).abs() < 1e-3, "lambda {lambda}: {v}");
        }
        let zeros = DistCurve::new(vec![0.0, 1.0, 2.0], vec![0.0, 0.0, 0.0], None).unwrap();
        assert_eq!(laplace_from_cdf(&zeros, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn laplace_one_barrier_against_quadrature_oracle() {
        // hitting time of barrier m = 1: E e^{-lambda tau} = e^{-sqrt(2
        // lambda)}; CDF curve sampled densely, oracle quadrature at 1e-10
        let n = 6000usize;
        let t_end = 60.0;
        let times: Vec<f64> = (1..=n).map(|i| t_end * i as f64 / n as f64).collect();
        let cdf: Vec<f64> = times
            .iter()
            .map(|&t| one_barrier_cdf(1.0, t).unwrap())
            .collect();
        let curve = DistCurve::new(times, cdf, None).unwrap();
        for lambda in [0.5, 1.0, 2.0] {
            let v = laplace_from_cdf(&curve, lambda).unwrap();
            let oracle = crate::quad::integrate_infallible(
                |u| lambda * one_barrier_cdf(1.0, u).unwrap() * (-lambda * u).exp(),
                0.0,
                200.0,
                1e-10,
            )
            .unwrap();
            let exact = (-(2.0 * lambda).sqrt()).exp();
            assert!((v - oracle).abs() < 1e-3, "lambda {lambda}: {v} vs {oracle}");
            assert!(
                (oracle - exact).abs() < 1e-3,
                "lambda {lambda}: oracle {oracle} vs exact {exact}"
            );
        }
    }

    #[test]
    fn laplace_decreasing_in_lambda() {
        let times: Vec<f64> = (1..=100).map(|i| i as f64 * 0.1).collect();
        let cdf: Vec<f64> = times
            .iter()
            .map(|&t| one_barrier_cdf(1.0, t).unwrap())
            .collect();
        let curve = DistCurve::new(times, cdf, None).unwrap();
        let mut prev = f64::INFINITY;
        for lambda in [0.1, 1.0, 10.0] {
            let v = laplace_from_cdf(&curve, lambda).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn scale_grid_is_uniform_in_scale_coordinate() {
        // sigma = x^2: scale map from x_lo is 1/x_lo - 1/x, so uniform scale
        // increments mean uniform increments of -1/x
        let xs = psi_uniform_grid(&fx("x^2"), 0.1, 100.0, 50).unwrap();
        assert_eq!(xs.len(), 50);
        assert_eq!(xs[0], 0.1);
        assert_eq!(*xs.last().unwrap(), 100.0);
        let psis: Vec<f64> = xs.iter().map(|&x| 1.0 / 0.1 - 1.0 / x).collect();
        let d0 = psis[1] - psis[0];
        for w in psis.windows(2) {
            assert!((w[1] - w[0] - d0).abs() < 1e-6 * d0);
        }
    }

    #[test]
    fn log_grid_power_law_diffusion() {
        // sigma = x^2, drift (1/2) sigma sigma' = x^3: the scale-transformed
        // process is driftless Brownian motion, so the exit CDF from xi = 1
        // is the one-barrier formula with m = 1, H = t. The truncation point
        // sits where the boundary CDF is within 1e-6 of 1; a log grid keeps
        // the cell Peclet number flat all the way out.
        let xs = log_uniform_grid(1.0 / 17.0, 1.6e6, 400).unwrap();
        let p = PdeProblem::new(
            fx("x^3"),
            fx("x^2"),
            BcCase::RightOnly,
            xs,
            4.0,
            400,
        )
        .unwrap();
        let g = solve_forward(&p).unwrap();
        let c = extract_cdf(&g, 1.0).unwrap();
        let mut sup = 0.0f64;
        for &t in &[0.25, 0.5, 1.0, 2.0, 4.0] {
            let exact = one_barrier_cdf(1.0, t).unwrap();
            sup = sup.max((c.interp(t) - exact).abs());
        }
        assert!(sup <= 5e-3, "sup error {sup:.3e}");
    }

    #[test]
    fn unstable_run_is_refused_with_diagnostics() {
        // centered differencing forced onto a hugely advection-dominated
        // problem is not reachable (upwinding kicks in), so provoke failure
        // with a negative-diffusion coefficient instead
        let p = PdeProblem::uniform(
            fx("0"),
            fx("sqrt(abs(x))"),
            BcCase::Both1,
            -1.0,
            1.0,
            64,
            1.0,
            64,
        );
        // construction is fine; a genuinely unstable configuration needs an
        // explicit scheme, which this solver does not expose. Instead check
        // the singular-system path.
        assert!(p.is_ok());
        let bad = thomas(&[0.0, 0.0], &[0.0, 1.0], &[0.0, 0.0], &mut [1.0, 1.0]);
        assert!(matches!(bad, Err(PdeError::Singular { row: 0, .. })));
    }
}
