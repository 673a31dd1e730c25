//! Large-dimension analysis of the mutual information of correlated
//! (Kronecker) MIMO Rayleigh channels.
//!
//! For `Y = D^{1/2} X D̃^{1/2}` with `X` i.i.d. `CN(0, 1)` and
//! `I_n(ρ) = log det(ρ/n · YY* + I)`, the crate computes
//!
//! * the positive solution `(δ, δ̃)` of the canonical system ([`fixed_point`]),
//! * the deterministic mean `V_n(ρ)` and CLT variance `σ_n²(ρ)`
//!   ([`equivalents`]),
//! * Monte Carlo realizations of `I_n(ρ)` with normality statistics
//!   ([`montecarlo`]), and
//! * empirical decay rates of the resolvent approximations ([`resolvent`]).
//!
//! ```
//! use mimo_clt::{generate, v_of_rho, ProfileKind, DEFAULT_TOL};
//!
//! let profile = generate(ProfileKind::Constant { value: 1.0 }, 4, 4)?.validate()?;
//! let eq = v_of_rho(&profile, 2.0, DEFAULT_TOL)?;
//! assert!((eq.v / 4.0 - (2.0 * 2f64.ln() - 0.5)).abs() < 1e-12);
//! assert!((eq.sigma2 + 0.75f64.ln()).abs() < 1e-12);
//! # Ok::<(), mimo_clt::Error>(())
//! ```

pub mod equivalents;
pub mod error;
pub mod fixed_point;
pub mod montecarlo;
pub mod profile;
pub mod resolvent;
pub mod stats;

pub use equivalents::{
    eta, eta_symmetric, normal_cdf, outage, sigma2_by_integration, v_by_integration, v_of_rho,
    Equivalents, InfoUnit, DEFAULT_GRID,
};
pub use error::{Error, ErrorClass, Result, Side};
pub use fixed_point::{
    derived_quantities, solve, solve_bracketed, solve_path, FixedPoint, DEFAULT_TOL,
};
pub use montecarlo::{
    mutual_information, mutual_information_with, normality_test, run_batch, sample_channel,
    BatchConfig, CMatrix, LogDetMethod, TestReport, TrialBatch,
};
pub use profile::{generate, validate, ProfileKind, ValidatedProfile, VarianceProfile};
pub use resolvent::{
    empirical_alpha, r_matrices, rate_fit, AlphaConfig, AlphaEstimate, DiagnosticSeries, RMatrices,
    RateConfig, RateReport, TrialSchedule,
};
