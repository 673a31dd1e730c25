//! The canonical 2×2 system
//!
//! ```text
//! δ  = (1/n) tr D (I + t δ̃ D)⁻¹
//! δ̃ = (1/n) tr D̃ (I + t δ D̃)⁻¹
//! ```
//!
//! and everything derived from its positive solution: `T`, `T̃`, `γ`, `γ̃`.
//!
//! Eliminating `δ̃` leaves the scalar equation `δ = f(t, δ)`. The ratio
//! `f(t, δ) / δ` is decreasing in `δ`, so the sign of `f(t, δ) - δ` changes
//! exactly once on `(0, ∞)` and a bracketed search always converges.

use serde::Serialize;

use crate::error::{Error, Result, Side};
use crate::profile::ValidatedProfile;

/// Default residual tolerance for [`solve`].
pub const DEFAULT_TOL: f64 = 1e-12;

const MAX_ITERATIONS: usize = 400;

/// Solution of the canonical system at a given `t`, with the diagonal
/// matrices `T = (I + tδ̃D)⁻¹`, `T̃ = (I + tδD̃)⁻¹` and
/// `γ = (1/n) tr D²T²`, `γ̃ = (1/n) tr D̃²T̃²`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FixedPoint {
    pub t: f64,
    pub delta: f64,
    pub delta_tilde: f64,
    pub t_diag: Vec<f64>,
    pub t_tilde_diag: Vec<f64>,
    pub gamma: f64,
    pub gamma_tilde: f64,
}

impl FixedPoint {
    /// `1 - t² γ γ̃`, strictly inside `(0, 1)` for `t > 0`.
    pub fn one_minus_t2gg(&self) -> f64 {
        1.0 - self.t * self.t * self.gamma * self.gamma_tilde
    }

    /// `(1/n) Σ dᵏ Tᵐ` over the chosen side, i.e. `(1/n) tr Dᵏ Tᵐ` or
    /// `(1/n) tr D̃ᵏ T̃ᵐ`.
    pub fn moment(&self, profile: &ValidatedProfile, side: Side, d_pow: i32, t_pow: i32) -> f64 {
        let (d, diag) = match side {
            Side::Receive => (profile.d(), &self.t_diag),
            Side::Transmit => (profile.d_tilde(), &self.t_tilde_diag),
        };
        let sum: f64 = d
            .iter()
            .zip(diag)
            .map(|(&x, &tt)| x.powi(d_pow) * tt.powi(t_pow))
            .sum();
        sum / profile.n() as f64
    }

    /// `dδ/dt = (tγγ̃δ − γδ̃) / (1 − t²γγ̃)`.
    pub fn delta_derivative(&self) -> f64 {
        (self.t * self.gamma * self.gamma_tilde * self.delta - self.gamma * self.delta_tilde)
            / self.one_minus_t2gg()
    }

    /// `dδ̃/dt = (tγγ̃δ̃ − γ̃δ) / (1 − t²γγ̃)`.
    pub fn delta_tilde_derivative(&self) -> f64 {
        (self.t * self.gamma * self.gamma_tilde * self.delta_tilde - self.gamma_tilde * self.delta)
            / self.one_minus_t2gg()
    }

    /// `dγ/dt = −2 (1/n)tr(D³T³) (1/n)tr(D̃T̃²) / (1 − t²γγ̃)`.
    pub fn gamma_derivative(&self, profile: &ValidatedProfile) -> f64 {
        -2.0 * self.moment(profile, Side::Receive, 3, 3)
            * self.moment(profile, Side::Transmit, 1, 2)
            / self.one_minus_t2gg()
    }

    /// `dγ̃/dt = −2 (1/n)tr(D̃³T̃³) (1/n)tr(DT²) / (1 − t²γγ̃)`.
    pub fn gamma_tilde_derivative(&self, profile: &ValidatedProfile) -> f64 {
        -2.0 * self.moment(profile, Side::Transmit, 3, 3)
            * self.moment(profile, Side::Receive, 1, 2)
            / self.one_minus_t2gg()
    }

    /// Residuals of both canonical equations, recomputed from scratch.
    pub fn residuals(&self, profile: &ValidatedProfile) -> (f64, f64) {
        let r = (scalar_map(profile, self.t, self.delta) - self.delta).abs();
        let r_tilde = (delta_tilde_of(profile, self.t, self.delta) - self.delta_tilde).abs();
        (r, r_tilde)
    }
}

/// `(1/n) tr D̃ (I + tδD̃)⁻¹`.
pub(crate) fn delta_tilde_of(profile: &ValidatedProfile, t: f64, delta: f64) -> f64 {
    let n = profile.n() as f64;
    profile
        .d_tilde()
        .iter()
        .map(|&x| x / (1.0 + t * delta * x))
        .sum::<f64>()
        / n
}

fn delta_of(profile: &ValidatedProfile, t: f64, delta_tilde: f64) -> f64 {
    let n = profile.n() as f64;
    profile
        .d()
        .iter()
        .map(|&x| x / (1.0 + t * delta_tilde * x))
        .sum::<f64>()
        / n
}

/// `f(t, δ)`: substitute `δ̃(δ)` into the first canonical equation.
fn scalar_map(profile: &ValidatedProfile, t: f64, delta: f64) -> f64 {
    delta_of(profile, t, delta_tilde_of(profile, t, delta))
}

/// `f(t, δ) − δ` and its derivative `t²γ(δ)γ̃(δ) − 1`.
fn excess_and_slope(profile: &ValidatedProfile, t: f64, delta: f64) -> (f64, f64) {
    let n = profile.n() as f64;
    let mut dt = 0.0;
    let mut gamma_tilde = 0.0;
    for &x in profile.d_tilde() {
        let r = 1.0 / (1.0 + t * delta * x);
        dt += x * r;
        gamma_tilde += x * x * r * r;
    }
    dt /= n;
    gamma_tilde /= n;
    let mut f = 0.0;
    let mut gamma = 0.0;
    for &x in profile.d() {
        let r = 1.0 / (1.0 + t * dt * x);
        f += x * r;
        gamma += x * x * r * r;
    }
    f /= n;
    gamma /= n;
    (f - delta, t * t * gamma * gamma_tilde - 1.0)
}

/// A-priori lower bound on `δ`: `((1/n) tr D) / (1 + t d_max d̃_max)`.
pub fn delta_lower_bound(profile: &ValidatedProfile, t: f64) -> f64 {
    profile.normalized_trace_d() / (1.0 + t * profile.d_max() * profile.d_tilde_max())
}

/// A-priori lower bound on `δ̃`: `((1/n) tr D̃) / (1 + t (N/n) d_max d̃_max)`.
pub fn delta_tilde_lower_bound(profile: &ValidatedProfile, t: f64) -> f64 {
    profile.normalized_trace_d_tilde()
        / (1.0 + t * profile.ratio() * profile.d_max() * profile.d_tilde_max())
}

/// Fills `T`, `T̃`, `γ`, `γ̃` for a solved pair `(δ, δ̃)`.
pub fn derived_quantities(
    profile: &ValidatedProfile,
    t: f64,
    delta: f64,
    delta_tilde: f64,
) -> FixedPoint {
    let n = profile.n() as f64;
    let t_diag: Vec<f64> = profile
        .d()
        .iter()
        .map(|&x| 1.0 / (1.0 + t * delta_tilde * x))
        .collect();
    let t_tilde_diag: Vec<f64> = profile
        .d_tilde()
        .iter()
        .map(|&x| 1.0 / (1.0 + t * delta * x))
        .collect();
    let gamma = profile
        .d()
        .iter()
        .zip(&t_diag)
        .map(|(&x, &r)| (x * r).powi(2))
        .sum::<f64>()
        / n;
    let gamma_tilde = profile
        .d_tilde()
        .iter()
        .zip(&t_tilde_diag)
        .map(|(&x, &r)| (x * r).powi(2))
        .sum::<f64>()
        / n;
    FixedPoint {
        t,
        delta,
        delta_tilde,
        t_diag,
        t_tilde_diag,
        gamma,
        gamma_tilde,
    }
}

fn check_args(t: f64, tol: f64) -> Result<()> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "t must be finite and >= 0, got {t}"
        )));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tol must be finite and > 0, got {tol}"
        )));
    }
    Ok(())
}

/// Solves the canonical system at `t` to residual `tol`.
///
/// `t = 0` is answered exactly: `δ = (1/n) tr D`, `δ̃ = (1/n) tr D̃`.
pub fn solve(profile: &ValidatedProfile, t: f64, tol: f64) -> Result<FixedPoint> {
    check_args(t, tol)?;
    if t == 0.0 {
        return Ok(at_zero(profile));
    }
    let lo = 0.5 * delta_lower_bound(profile, t);
    let hi = profile.normalized_trace_d();
    bracketed(profile, t, lo, hi, tol)
}

/// Like [`solve`] but starting from the bracket `[lo, hi]`. The bracket is
/// widened geometrically until it encloses the root, so any positive pair
/// is accepted.
pub fn solve_bracketed(
    profile: &ValidatedProfile,
    t: f64,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<FixedPoint> {
    check_args(t, tol)?;
    if !(lo > 0.0 && hi > 0.0 && lo.is_finite() && hi.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "bracket must be positive and finite, got [{lo}, {hi}]"
        )));
    }
    if t == 0.0 {
        return Ok(at_zero(profile));
    }
    let (mut lo, mut hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    for _ in 0..MAX_ITERATIONS {
        if excess_and_slope(profile, t, lo).0 > 0.0 {
            break;
        }
        lo *= 0.5;
    }
    for _ in 0..MAX_ITERATIONS {
        if excess_and_slope(profile, t, hi).0 <= 0.0 {
            break;
        }
        hi *= 2.0;
    }
    bracketed(profile, t, lo, hi, tol)
}

fn at_zero(profile: &ValidatedProfile) -> FixedPoint {
    derived_quantities(
        profile,
        0.0,
        profile.normalized_trace_d(),
        profile.normalized_trace_d_tilde(),
    )
}

/// Safeguarded Newton on `f(t, δ) − δ` inside a sign-changing bracket.
/// Every iterate that leaves the bracket or stalls is replaced by a
/// bisection step, so convergence never depends on the Newton model.
fn bracketed(profile: &ValidatedProfile, t: f64, lo: f64, hi: f64, tol: f64) -> Result<FixedPoint> {
    let (mut lo, mut hi) = (lo, hi);
    let (ex_lo, _) = excess_and_slope(profile, t, lo);
    let (ex_hi, _) = excess_and_slope(profile, t, hi);
    if ex_lo <= 0.0 || ex_hi > 0.0 {
        return Err(Error::NoConvergence {
            t,
            iterations: 0,
            residual: ex_lo.abs().min(ex_hi.abs()),
        });
    }
    if ex_hi == 0.0 {
        return finish(profile, t, hi);
    }

    let mut x = 0.5 * (lo + hi);
    let mut last_step = hi - lo;
    let mut residual = f64::INFINITY;
    for iteration in 1..=MAX_ITERATIONS {
        let (ex, slope) = excess_and_slope(profile, t, x);
        residual = ex.abs();
        if ex == 0.0 {
            return finish(profile, t, x);
        }
        if ex > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let width = hi - lo;
        if residual < tol && (width <= 4.0 * f64::EPSILON * hi || last_step <= f64::EPSILON * x) {
            return finish(profile, t, x);
        }
        if width <= 2.0 * f64::EPSILON * hi {
            if residual < tol {
                return finish(profile, t, x);
            }
            return Err(Error::NoConvergence {
                t,
                iterations: iteration,
                residual,
            });
        }
        let newton = x - ex / slope;
        let next =
            if slope < 0.0 && newton > lo && newton < hi && (newton - x).abs() < 0.5 * last_step {
                newton
            } else {
                0.5 * (lo + hi)
            };
        last_step = (next - x).abs();
        x = next;
    }
    Err(Error::NoConvergence {
        t,
        iterations: MAX_ITERATIONS,
        residual,
    })
}

fn finish(profile: &ValidatedProfile, t: f64, delta: f64) -> Result<FixedPoint> {
    let fp = derived_quantities(profile, t, delta, delta_tilde_of(profile, t, delta));
    check_a_priori(profile, &fp)?;
    Ok(fp)
}

/// Runtime assertion of the a-priori estimates on `δ`, `δ̃`, `γ`, `γ̃`.
/// A few ulps of slack absorb rounding where an estimate is tight.
pub fn check_a_priori(profile: &ValidatedProfile, fp: &FixedPoint) -> Result<()> {
    let slack = |x: f64| x.abs() * 64.0 * f64::EPSILON;
    let c = profile.ratio();
    let t = fp.t;
    let checks = [
        (fp.delta > 0.0, "delta > 0"),
        (fp.delta_tilde > 0.0, "delta_tilde > 0"),
        (
            fp.delta <= c * profile.d_max() + slack(fp.delta),
            "delta <= (N/n) d_max",
        ),
        (
            fp.delta_tilde <= profile.d_tilde_max() + slack(fp.delta_tilde),
            "delta_tilde <= d_tilde_max",
        ),
        (
            fp.delta + slack(fp.delta) >= delta_lower_bound(profile, t),
            "delta lower bound",
        ),
        (
            fp.delta_tilde + slack(fp.delta_tilde) >= delta_tilde_lower_bound(profile, t),
            "delta_tilde lower bound",
        ),
        (
            fp.delta * fp.delta / c <= fp.gamma + slack(fp.gamma),
            "(n/N) delta^2 <= gamma",
        ),
        (
            fp.delta_tilde * fp.delta_tilde <= fp.gamma_tilde + slack(fp.gamma_tilde),
            "delta_tilde^2 <= gamma_tilde",
        ),
    ];
    for (ok, what) in checks {
        if !ok {
            return Err(Error::BoundViolation(format!("{what} fails at t = {t}")));
        }
    }
    if t > 0.0 {
        // Test the product itself: for tiny t, 1 - x rounds to exactly 1.
        let x = t * t * fp.gamma * fp.gamma_tilde;
        if !(x > 0.0 && x < 1.0) {
            return Err(Error::BoundViolation(format!(
                "t^2 gamma gamma_tilde = {x} outside (0, 1) at t = {t}"
            )));
        }
    }
    Ok(())
}

/// Lower bound `(n/N)² δ² δ̃² / (d_max² d̃_max²)` on `1 − t²γγ̃`.
pub fn one_minus_t2gg_lower_bound(profile: &ValidatedProfile, fp: &FixedPoint) -> f64 {
    let c = profile.ratio();
    (fp.delta * fp.delta_tilde / (c * profile.d_max() * profile.d_tilde_max())).powi(2)
}

/// Upper bound `1 − t² (n/N) δ² δ̃²` on `1 − t²γγ̃`.
pub fn one_minus_t2gg_upper_bound(profile: &ValidatedProfile, fp: &FixedPoint) -> f64 {
    let t = fp.t;
    1.0 - t * t * (fp.delta * fp.delta_tilde).powi(2) / profile.ratio()
}

/// Solves along an ascending grid, using each solution as the upper end of
/// the next bracket (`δ` decreases in `t`).
pub fn solve_path(profile: &ValidatedProfile, t_grid: &[f64], tol: f64) -> Result<Vec<FixedPoint>> {
    if let Some(i) = t_grid.windows(2).position(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument(format!(
            "t_grid must be strictly increasing (index {})",
            i + 1
        )));
    }
    let mut out: Vec<FixedPoint> = Vec::with_capacity(t_grid.len());
    for (index, &t) in t_grid.iter().enumerate() {
        let fp = match out.last() {
            Some(prev) if t > 0.0 => {
                check_args(t, tol)?;
                let lo = 0.5 * delta_lower_bound(profile, t);
                bracketed(profile, t, lo, prev.delta, tol)
            }
            _ => solve(profile, t, tol),
        }
        .map_err(|e| match e {
            Error::InvalidArgument(_) => e,
            other => Error::PathFailure {
                index,
                source: Box::new(other),
            },
        })?;
        out.push(fp);
    }
    Ok(out)
}
