//! Empirical diagnostics for the resolvent `H(ρ) = (ρ/n · YY* + I)⁻¹`:
//! per-realization identities, the Monte Carlo estimate of
//! `α = (1/n) tr D E[H]`, the intermediate matrices `R`, `R̃` built from it,
//! and log-log fits of how fast the deterministic approximations close in.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fixed_point::{self, DEFAULT_TOL};
use crate::montecarlo::{self, CMatrix, GramSpectrum, LogDetMethod};
use crate::profile::{self, ProfileKind, ValidatedProfile};
use crate::stats::{self, LineFit};

/// Per-realization checks of `H = I − (ρ/n) H YY*` and `spec(H) ⊂ (0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ResolventCheck {
    /// `max |H − (I − (ρ/n) H YY*)|` over entries.
    pub identity_residual: f64,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
}

pub fn resolvent_check(y: &CMatrix, rho: f64) -> Result<ResolventCheck> {
    let spectrum = GramSpectrum::of(y)?;
    let h = spectrum.resolvent(rho);
    let scale = nalgebra::Complex::from(rho / y.ncols() as f64);
    let mut rhs = -(&h * montecarlo::gram(y)) * scale;
    for i in 0..rhs.nrows() {
        rhs[(i, i)] += nalgebra::Complex::from(1.0);
    }
    let identity_residual = (h - rhs).iter().map(|z| z.norm()).fold(0.0, f64::max);
    let eig = spectrum.resolvent_eigenvalues(rho);
    Ok(ResolventCheck {
        identity_residual,
        min_eigenvalue: eig.iter().copied().fold(f64::INFINITY, f64::min),
        max_eigenvalue: eig.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

/// `β = (1/n) tr D H(ρ)` for one realization.
pub fn beta(
    profile: &ValidatedProfile,
    y: &CMatrix,
    rho: f64,
    method: LogDetMethod,
) -> Result<f64> {
    let diag = match method {
        LogDetMethod::Eigen => GramSpectrum::of(y)?.resolvent_diagonal(rho),
        LogDetMethod::Cholesky => montecarlo::resolvent_diagonal_cholesky(y, rho)?,
    };
    let s: f64 = profile.d().iter().zip(&diag).map(|(d, h)| d * h).sum();
    Ok(s / profile.n() as f64)
}

/// Monte Carlo estimate of `α` with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AlphaEstimate {
    pub value: f64,
    pub std_error: f64,
    pub trials: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlphaConfig {
    pub rho: f64,
    pub trials: u64,
    pub seed: u64,
    pub threads: usize,
    pub method: LogDetMethod,
}

/// Averages `β` over `trials` realizations. At `ρ = 0`, `H = I` and the
/// answer `(1/n) tr D` is returned exactly.
pub fn empirical_alpha(profile: &ValidatedProfile, config: &AlphaConfig) -> Result<AlphaEstimate> {
    if !(config.rho.is_finite() && config.rho >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "rho must be finite and >= 0, got {}",
            config.rho
        )));
    }
    if config.trials == 0 {
        return Err(Error::InvalidArgument("trials must be >= 1".into()));
    }
    if config.rho == 0.0 {
        return Ok(AlphaEstimate {
            value: profile.normalized_trace_d(),
            std_error: 0.0,
            trials: config.trials,
        });
    }
    let betas = montecarlo::run_trials(config.trials, config.seed, config.threads, |_, rng| {
        let y = montecarlo::sample_channel(profile, rng);
        beta(profile, &y, config.rho, config.method)
    })?;
    let std_error = stats::variance(&betas)
        .map(|v| (v / betas.len() as f64).sqrt())
        .unwrap_or(0.0);
    Ok(AlphaEstimate {
        value: stats::mean(&betas),
        std_error,
        trials: config.trials,
    })
}

/// `R̃ = (I + ρα̂D̃)⁻¹`, `α̃ = (1/n) tr D̃R̃`, `R = (I + ρα̃D)⁻¹`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RMatrices {
    pub r_diag: Vec<f64>,
    pub r_tilde_diag: Vec<f64>,
    pub alpha_tilde: f64,
}

pub fn r_matrices(profile: &ValidatedProfile, rho: f64, alpha_hat: f64) -> Result<RMatrices> {
    if !(alpha_hat > 0.0 && alpha_hat.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "alpha_hat must be > 0, got {alpha_hat}"
        )));
    }
    let r_tilde_diag: Vec<f64> = profile
        .d_tilde()
        .iter()
        .map(|&x| 1.0 / (1.0 + rho * alpha_hat * x))
        .collect();
    let alpha_tilde = profile
        .d_tilde()
        .iter()
        .zip(&r_tilde_diag)
        .map(|(x, r)| x * r)
        .sum::<f64>()
        / profile.n() as f64;
    let r_diag = profile
        .d()
        .iter()
        .map(|&x| 1.0 / (1.0 + rho * alpha_tilde * x))
        .collect();
    Ok(RMatrices {
        r_diag,
        r_tilde_diag,
        alpha_tilde,
    })
}

/// `(n, error)` pairs and the fitted slope of `log error` against `log n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagnosticSeries {
    pub ns: Vec<usize>,
    pub errors: Vec<f64>,
    /// Monte Carlo standard error of each entry of `errors`.
    pub std_errors: Vec<f64>,
    /// `None` when some error is exactly zero (e.g. at `ρ = 0`).
    pub fitted_exponent: Option<f64>,
    pub exponent_std_error: Option<f64>,
}

impl DiagnosticSeries {
    pub fn new(ns: Vec<usize>, errors: Vec<f64>, std_errors: Vec<f64>) -> Self {
        let fit = loglog_fit(&ns, &errors);
        DiagnosticSeries {
            ns,
            errors,
            std_errors,
            fitted_exponent: fit.map(|f| f.slope),
            exponent_std_error: fit.map(|f| f.slope_se),
        }
    }
}

/// OLS of `log error` on `log n`; `None` if any error is not positive.
pub fn loglog_fit(ns: &[usize], errors: &[f64]) -> Option<LineFit> {
    if ns.len() < 2 || errors.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
        return None;
    }
    let x: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let y: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    Some(stats::ols(&x, &y))
}

/// How many trials to run at each dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialSchedule {
    Fixed(u64),
    /// `base · (n / n₀)²` where `n₀` is the smallest dimension; keeps the
    /// Monte Carlo noise on `α̂` shrinking like the `O(n⁻²)` bias.
    Quadratic(u64),
}

impl TrialSchedule {
    pub fn trials_at(&self, n: usize, n0: usize) -> u64 {
        match *self {
            TrialSchedule::Fixed(t) => t,
            TrialSchedule::Quadratic(base) => {
                let r = n as f64 / n0 as f64;
                (base as f64 * r * r).round().max(1.0) as u64
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateConfig {
    pub family: ProfileKind,
    /// `N / n`; `N` is rounded to the nearest integer (at least 1).
    pub ratio: f64,
    pub rho: f64,
    pub ns: Vec<usize>,
    pub schedule: TrialSchedule,
    pub seed: u64,
    pub threads: usize,
    pub method: LogDetMethod,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateReport {
    pub rho: f64,
    pub seed: u64,
    pub trials: Vec<u64>,
    /// `|E tr(DH) − tr(DR)|`, with `R` built from the empirical `α̂`.
    pub trace_gap: DiagnosticSeries,
    /// `|α̂ − δ|`.
    pub alpha_gap: DiagnosticSeries,
}

/// Measures both approximation gaps for each dimension in `ns` and fits
/// their decay exponents. Dimension `k` uses seed `seed + k`.
pub fn rate_fit(config: &RateConfig) -> Result<RateReport> {
    if config.ns.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "rate_fit needs at least 3 dimensions, got {}",
            config.ns.len()
        )));
    }
    if config.ns.windows(2).any(|w| w[0] >= w[1]) || config.ns[0] == 0 {
        return Err(Error::InvalidArgument(
            "ns must be positive and strictly increasing".into(),
        ));
    }
    if !(config.ratio > 0.0 && config.ratio.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "ratio must be > 0, got {}",
            config.ratio
        )));
    }
    let n0 = config.ns[0];
    let mut trials = Vec::new();
    let (mut trace_err, mut trace_se) = (Vec::new(), Vec::new());
    let (mut alpha_err, mut alpha_se) = (Vec::new(), Vec::new());
    for (k, &n) in config.ns.iter().enumerate() {
        let big_n = ((config.ratio * n as f64).round() as usize).max(1);
        let p = profile::generate(config.family, big_n, n)?.validate()?;
        let count = config.schedule.trials_at(n, n0);
        let est = empirical_alpha(
            &p,
            &AlphaConfig {
                rho: config.rho,
                trials: count,
                seed: config.seed.wrapping_add(k as u64),
                threads: config.threads,
                method: config.method,
            },
        )?;
        let fp = fixed_point::solve(&p, config.rho, DEFAULT_TOL)?;
        trials.push(count);
        alpha_err.push((est.value - fp.delta).abs());
        alpha_se.push(est.std_error);
        if config.rho == 0.0 {
            trace_err.push(0.0);
            trace_se.push(0.0);
            continue;
        }
        let r = r_matrices(&p, config.rho, est.value)?;
        let tr_dr: f64 = p.d().iter().zip(&r.r_diag).map(|(d, r)| d * r).sum();
        let nf = n as f64;
        trace_err.push((nf * est.value - tr_dr).abs());
        trace_se.push(nf * est.std_error);
    }
    Ok(RateReport {
        rho: config.rho,
        seed: config.seed,
        trials,
        trace_gap: DiagnosticSeries::new(config.ns.clone(), trace_err, trace_se),
        alpha_gap: DiagnosticSeries::new(config.ns.clone(), alpha_err, alpha_se),
    })
}
