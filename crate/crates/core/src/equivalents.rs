//! Deterministic equivalents of the mutual information `I_n(ρ)`:
//! the mean approximation `V_n(ρ)`, the CLT variance `σ_n²(ρ)`, the
//! variance integrand `η_n(t)`, and Gaussian outage probabilities.
//!
//! All quantities are in nats.

use serde::Serialize;

use crate::error::{Error, Result, Side};
use crate::fixed_point::{self, FixedPoint};
use crate::profile::ValidatedProfile;

/// Display unit for information quantities. Computation is always in nats.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InfoUnit {
    #[default]
    Nats,
    Bits,
}

impl InfoUnit {
    pub fn from_nats(self, x: f64) -> f64 {
        match self {
            InfoUnit::Nats => x,
            InfoUnit::Bits => x / std::f64::consts::LN_2,
        }
    }

    /// Converts a variance (nats²).
    pub fn from_nats_sq(self, x: f64) -> f64 {
        match self {
            InfoUnit::Nats => x,
            InfoUnit::Bits => x / (std::f64::consts::LN_2 * std::f64::consts::LN_2),
        }
    }

    pub fn to_nats(self, x: f64) -> f64 {
        match self {
            InfoUnit::Nats => x,
            InfoUnit::Bits => x * std::f64::consts::LN_2,
        }
    }
}

/// Default number of Simpson subintervals for the integral cross-checks.
pub const DEFAULT_GRID: usize = 256;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Equivalents {
    pub rho: f64,
    /// `V_n(ρ)`, nats.
    pub v: f64,
    /// `σ_n²(ρ) = −log(1 − ρ²γγ̃)`, nats².
    pub sigma2: f64,
    pub fp: FixedPoint,
}

impl Equivalents {
    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    /// Gaussian approximation of `P(I_n(ρ) < threshold)`.
    pub fn outage(&self, threshold: f64) -> f64 {
        gaussian_outage(self.v, self.sigma(), threshold)
    }

    /// `(m², M²)` with `m² = −log(1 − ρ²(n/N)δ²δ̃²)` and
    /// `M² = −log((n/N)²δ²δ̃²/(d_max²d̃_max²))`, which bracket `σ²`.
    pub fn variance_bounds(&self, profile: &ValidatedProfile) -> (f64, f64) {
        // `0.0 - x` rather than `-x` so that log(1) reports +0.
        let lower = 0.0 - fixed_point::one_minus_t2gg_upper_bound(profile, &self.fp).ln();
        let upper = 0.0 - fixed_point::one_minus_t2gg_lower_bound(profile, &self.fp).ln();
        (lower, upper)
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho.is_finite() && rho >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "rho must be finite and >= 0, got {rho}"
        )))
    }
}

/// `V` from a solved fixed point:
/// `Σⱼ log(1 + ρδd̃ⱼ) + Σᵢ log(1 + ρδ̃dᵢ) − nρδδ̃`.
pub fn v_from_fixed_point(profile: &ValidatedProfile, fp: &FixedPoint) -> f64 {
    let rho = fp.t;
    let tx: f64 = profile
        .d_tilde()
        .iter()
        .map(|&x| (rho * fp.delta * x).ln_1p())
        .sum();
    let rx: f64 = profile
        .d()
        .iter()
        .map(|&x| (rho * fp.delta_tilde * x).ln_1p())
        .sum();
    tx + rx - profile.n() as f64 * rho * fp.delta * fp.delta_tilde
}

/// `−log(1 − t²γγ̃)`; exactly zero at `t = 0`.
pub fn sigma2_from_fixed_point(fp: &FixedPoint) -> f64 {
    if fp.t == 0.0 {
        return 0.0;
    }
    -(-fp.t * fp.t * fp.gamma * fp.gamma_tilde).ln_1p()
}

pub fn v_of_rho(profile: &ValidatedProfile, rho: f64, tol: f64) -> Result<Equivalents> {
    check_rho(rho)?;
    let fp = fixed_point::solve(profile, rho, tol)?;
    Ok(Equivalents {
        rho,
        v: v_from_fixed_point(profile, &fp),
        sigma2: sigma2_from_fixed_point(&fp),
        fp,
    })
}

/// The three-term integrand as it comes out of the characteristic-function
/// differential equation, evaluated term by term.
pub fn eta_from_fixed_point(profile: &ValidatedProfile, fp: &FixedPoint) -> f64 {
    let t = fp.t;
    if t == 0.0 {
        return 0.0;
    }
    let q = fp.one_minus_t2gg();
    let tr_dt2 = fp.moment(profile, Side::Receive, 1, 2);
    let tr_d2t3 = fp.moment(profile, Side::Receive, 2, 3);
    let tr_d3t3 = fp.moment(profile, Side::Receive, 3, 3);
    let tr_dt3_tilde = fp.moment(profile, Side::Transmit, 3, 3);
    let g = fp.gamma;
    let gt = fp.gamma_tilde;

    let first = -t * t * g * tr_dt3_tilde * tr_dt2 / q;
    let second = t * gt * tr_d2t3;
    let third = t.powi(3) * gt * gt * tr_d3t3 * tr_dt2 / q;
    (first + second + third) / q
}

/// The same integrand in the symmetric form
/// `½ (t²γγ̃′ + t²γ′γ̃ + 2tγγ̃) / (1 − t²γγ̃)`.
pub fn eta_symmetric_from_fixed_point(profile: &ValidatedProfile, fp: &FixedPoint) -> f64 {
    let t = fp.t;
    let g = fp.gamma;
    let gt = fp.gamma_tilde;
    let dg = fp.gamma_derivative(profile);
    let dgt = fp.gamma_tilde_derivative(profile);
    0.5 * (t * t * g * dgt + t * t * dg * gt + 2.0 * t * g * gt) / fp.one_minus_t2gg()
}

/// `η_n(t)`. Equal to `½ dσ²/dt`.
pub fn eta(profile: &ValidatedProfile, t: f64, tol: f64) -> Result<f64> {
    check_rho(t)?;
    let fp = fixed_point::solve(profile, t, tol)?;
    Ok(eta_from_fixed_point(profile, &fp))
}

pub fn eta_symmetric(profile: &ValidatedProfile, t: f64, tol: f64) -> Result<f64> {
    check_rho(t)?;
    let fp = fixed_point::solve(profile, t, tol)?;
    Ok(eta_symmetric_from_fixed_point(profile, &fp))
}

/// Composite Simpson rule over uniformly spaced samples (odd count).
pub(crate) fn simpson(values: &[f64], step: f64) -> f64 {
    debug_assert!(values.len() % 2 == 1 && values.len() >= 3);
    let last = values.len() - 1;
    let inner: f64 = values[1..last]
        .iter()
        .enumerate()
        .map(|(i, &v)| if i % 2 == 0 { 4.0 * v } else { 2.0 * v })
        .sum();
    step / 3.0 * (values[0] + inner + values[last])
}

/// `∫₀^ρ f(t) dt` by composite Simpson in `u` after the substitution
/// `t = ρu³`. The integrands bend sharply on the scale `t ≈ 1/(d d̃)`, which
/// a uniform grid in `t` resolves poorly once `ρ` is large; the cubic map
/// puts most nodes there and keeps the transformed integrand smooth.
fn integrate_along_path<F>(
    profile: &ValidatedProfile,
    rho: f64,
    grid_size: usize,
    integrand: F,
) -> Result<f64>
where
    F: Fn(&FixedPoint) -> f64,
{
    check_rho(rho)?;
    if grid_size < 16 || !grid_size.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "grid_size must be even and >= 16, got {grid_size}"
        )));
    }
    if rho == 0.0 {
        return Ok(0.0);
    }
    let m = grid_size as f64;
    let grid: Vec<f64> = (0..=grid_size)
        .map(|k| {
            if k == grid_size {
                rho
            } else {
                rho * (k as f64 / m).powi(3)
            }
        })
        .collect();
    let path = fixed_point::solve_path(profile, &grid, fixed_point::DEFAULT_TOL)?;
    let values: Vec<f64> = path
        .iter()
        .enumerate()
        .map(|(k, fp)| {
            let u = k as f64 / m;
            integrand(fp) * 3.0 * rho * u * u
        })
        .collect();
    Ok(simpson(&values, 1.0 / m))
}

/// `σ²(ρ)` recovered as `2 ∫₀^ρ η(t) dt` by Simpson on `grid_size`
/// subintervals. The factor two is `η = ½ dσ²/dt`.
pub fn sigma2_by_integration(
    profile: &ValidatedProfile,
    rho: f64,
    grid_size: usize,
) -> Result<f64> {
    let half = integrate_along_path(profile, rho, grid_size, |fp| {
        eta_from_fixed_point(profile, fp)
    })?;
    Ok(2.0 * half)
}

/// `V(ρ)` recovered as `∫₀^ρ n δ(t) δ̃(t) dt`.
pub fn v_by_integration(profile: &ValidatedProfile, rho: f64, grid_size: usize) -> Result<f64> {
    let n = profile.n() as f64;
    integrate_along_path(profile, rho, grid_size, |fp| n * fp.delta * fp.delta_tilde)
}

/// Standard normal CDF, `½ erfc(−x/√2)`.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// `Φ((threshold − mean) / sigma)`.
pub fn gaussian_outage(mean: f64, sigma: f64, threshold: f64) -> f64 {
    if sigma == 0.0 {
        return if threshold > mean { 1.0 } else { 0.0 };
    }
    normal_cdf((threshold - mean) / sigma)
}

/// Gaussian approximation of `P(I_n(ρ) < threshold)` (threshold in nats).
pub fn outage(profile: &ValidatedProfile, rho: f64, threshold: f64, tol: f64) -> Result<f64> {
    if rho <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "outage needs rho > 0, got {rho}"
        )));
    }
    if threshold.is_nan() {
        return Err(Error::InvalidArgument("threshold is NaN".into()));
    }
    Ok(v_of_rho(profile, rho, tol)?.outage(threshold))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixed_point::DEFAULT_TOL;
    use crate::profile::VarianceProfile;

    fn iid(k: usize) -> ValidatedProfile {
        VarianceProfile::new(vec![1.0; k], vec![1.0; k])
            .validate()
            .unwrap()
    }

    /// Capacity per antenna of the square i.i.d. channel, closed form.
    fn mp_capacity(rho: f64) -> f64 {
        let s = (1.0 + 4.0 * rho).sqrt();
        2.0 * ((1.0 + s) / 2.0).ln() - (s - 1.0).powi(2) / (4.0 * rho)
    }

    #[test]
    fn zero_snr() {
        let e = v_of_rho(&iid(3), 0.0, DEFAULT_TOL).unwrap();
        assert_eq!(e.v, 0.0);
        assert_eq!(e.sigma2, 0.0);
    }

    #[test]
    fn iid_rho_two() {
        let p = iid(6);
        let e = v_of_rho(&p, 2.0, DEFAULT_TOL).unwrap();
        let per = 2.0 * 2f64.ln() - 0.5;
        assert!((mp_capacity(2.0) - per).abs() < 1e-14);
        assert!((e.v / 6.0 - per).abs() < 1e-12);
        assert!((e.sigma2 - (-(0.75f64).ln())).abs() < 1e-12);
        let (lo, hi) = e.variance_bounds(&p);
        assert!(lo <= e.sigma2 && e.sigma2 <= hi);
    }

    #[test]
    fn eta_vanishes_linearly_at_zero() {
        let p = VarianceProfile::new(vec![0.5, 1.5, 1.0], vec![2.0, 0.3])
            .validate()
            .unwrap();
        assert_eq!(eta(&p, 0.0, DEFAULT_TOL).unwrap(), 0.0);
        let a = eta(&p, 1e-6, DEFAULT_TOL).unwrap();
        let b = eta(&p, 2e-6, DEFAULT_TOL).unwrap();
        assert!(a > 0.0);
        assert!((b / a - 2.0).abs() < 1e-3);
    }

    #[test]
    fn eta_is_half_variance_slope() {
        let p = iid(4);
        let h = 1e-4;
        let s = |t: f64| v_of_rho(&p, t, DEFAULT_TOL).unwrap().sigma2;
        let fd = (s(2.0 + h) - s(2.0 - h)) / (2.0 * h);
        let e = eta(&p, 2.0, DEFAULT_TOL).unwrap();
        assert!((e - 0.5 * fd).abs() < 1e-6, "{e} vs {}", 0.5 * fd);
    }

    #[test]
    fn eta_forms_agree() {
        for c0 in [0.25, 1.0, 3.0] {
            let p = VarianceProfile::new(vec![c0; 5], vec![c0; 3])
                .validate()
                .unwrap();
            for t in [0.1, 1.0, 7.5] {
                let a = eta(&p, t, DEFAULT_TOL).unwrap();
                let b = eta_symmetric(&p, t, DEFAULT_TOL).unwrap();
                assert!((a - b).abs() < 1e-10, "c0={c0} t={t}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn integrals_match_closed_forms() {
        let p = iid(4);
        let s = sigma2_by_integration(&p, 2.0, 256).unwrap();
        assert!((s - (-(0.75f64).ln())).abs() < 1e-6);
        let v = v_by_integration(&p, 2.0, 256).unwrap();
        assert!((v - 4.0 * (2.0 * 2f64.ln() - 0.5)).abs() < 1e-6);
        assert_eq!(sigma2_by_integration(&p, 0.0, 256).unwrap(), 0.0);
        assert_eq!(v_by_integration(&p, 0.0, 256).unwrap(), 0.0);
    }

    #[test]
    fn simpson_order() {
        let p = iid(2);
        let exact = -(0.75f64).ln();
        let e1 = (sigma2_by_integration(&p, 2.0, 64).unwrap() - exact).abs();
        let e2 = (sigma2_by_integration(&p, 2.0, 128).unwrap() - exact).abs();
        let ratio = e1 / e2;
        assert!(ratio > 12.0 && ratio < 20.0, "ratio {ratio}");
    }

    #[test]
    fn grid_validation() {
        let p = iid(2);
        assert!(sigma2_by_integration(&p, 1.0, 8).is_err());
        assert!(v_by_integration(&p, 1.0, 17).is_err());
    }

    #[test]
    fn outage_examples() {
        let p = iid(4);
        let e = v_of_rho(&p, 2.0, DEFAULT_TOL).unwrap();
        assert!((outage(&p, 2.0, e.v, DEFAULT_TOL).unwrap() - 0.5).abs() < 1e-15);
        let q = outage(&p, 2.0, e.v - 1.959964 * e.sigma(), DEFAULT_TOL).unwrap();
        assert!((q - 0.025).abs() < 1e-7);
        assert_eq!(e.outage(f64::NEG_INFINITY), 0.0);
        assert!(outage(&p, 0.0, 1.0, DEFAULT_TOL).is_err());
    }

    #[test]
    fn normal_cdf_reference_values() {
        // Values from the closed form Φ(x) = ½ erfc(−x/√2) in high precision.
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((normal_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
        assert!((normal_cdf(-3.0) - 0.001_349_898_031_630_094_6).abs() < 1e-15);
        assert!((normal_cdf(-8.0) - 6.220_960_574_271_785e-16).abs() < 1e-25);
    }
}
