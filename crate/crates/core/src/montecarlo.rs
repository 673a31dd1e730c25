//! Monte Carlo sampling of separable-variance channels and exact mutual
//! information per realization.
//!
//! Every trial draws from its own ChaCha8 stream keyed on `(seed, index)`,
//! so a batch is a pure function of its inputs regardless of how many
//! worker threads run it.

use std::io::Write;
use std::str::FromStr;

use nalgebra::{Cholesky, Complex, DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equivalents::{normal_cdf, Equivalents, InfoUnit};
use crate::error::{Error, Result};
use crate::profile::ValidatedProfile;
use crate::stats;

pub type Complex64 = Complex<f64>;
pub type CMatrix = DMatrix<Complex64>;

/// Minimum batch size accepted by [`normality_test`].
pub const MIN_NORMALITY_SAMPLES: usize = 100;

/// How `log det(I + ρ/n · YY*)` is evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogDetMethod {
    /// Hermitian eigendecomposition of the Gram matrix.
    #[default]
    Eigen,
    /// Cholesky factorization of `I + ρ/n · YY*`.
    Cholesky,
}

impl FromStr for LogDetMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eigen" => Ok(LogDetMethod::Eigen),
            "cholesky" => Ok(LogDetMethod::Cholesky),
            other => Err(Error::InvalidArgument(format!(
                "unknown logdet method `{other}` (eigen|cholesky)"
            ))),
        }
    }
}

/// Independent RNG stream for trial `index` of a run seeded with `seed`.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// One `CN(0, 1)` draw: `(g₁ + i g₂)/√2`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// `Y = D^{1/2} X D̃^{1/2}` with i.i.d. `CN(0, 1)` entries in `X`,
/// drawn in column-major order.
pub fn sample_channel<R: Rng + ?Sized>(profile: &ValidatedProfile, rng: &mut R) -> CMatrix {
    let row: Vec<f64> = profile.d().iter().map(|x| x.sqrt()).collect();
    let col: Vec<f64> = profile.d_tilde().iter().map(|x| x.sqrt()).collect();
    let mut y = CMatrix::zeros(profile.big_n(), profile.n());
    for (j, &cj) in col.iter().enumerate() {
        for (i, &ri) in row.iter().enumerate() {
            y[(i, j)] = complex_normal(rng) * (ri * cj);
        }
    }
    y
}

/// `Y Y*` (`N × N`).
///
/// With `Y = A + iB` and `S = [A | B]`, `T = [B | −A]`, this is
/// `S Sᵀ + i T Sᵀ`, two real products that run far faster than the
/// generic complex one.
pub fn gram(y: &CMatrix) -> CMatrix {
    let (rows, cols) = y.shape();
    let s = DMatrix::<f64>::from_fn(rows, 2 * cols, |i, j| {
        if j < cols {
            y[(i, j)].re
        } else {
            y[(i, j - cols)].im
        }
    });
    let t = DMatrix::<f64>::from_fn(rows, 2 * cols, |i, j| {
        if j < cols {
            y[(i, j)].im
        } else {
            -y[(i, j - cols)].re
        }
    });
    let st = s.transpose();
    let re = &s * &st;
    let im = &t * &st;
    CMatrix::from_fn(rows, rows, |i, j| Complex::new(re[(i, j)], im[(i, j)]))
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

fn failure(reason: &str) -> Error {
    Error::NumericalFailure {
        trial: 0,
        reason: reason.to_string(),
    }
}

/// `log det(ρ/n · YY* + I_N)` in nats, via [`LogDetMethod::Eigen`].
pub fn mutual_information(y: &CMatrix, rho: f64) -> Result<f64> {
    mutual_information_with(y, rho, LogDetMethod::Eigen)
}

pub fn mutual_information_with(y: &CMatrix, rho: f64, method: LogDetMethod) -> Result<f64> {
    check_rho(rho)?;
    if rho == 0.0 || y.is_empty() {
        return Ok(0.0);
    }
    let n = y.ncols() as f64;
    // Sylvester: det(I + AB) = det(I + BA), so use the smaller Gram matrix.
    let g = if y.nrows() <= y.ncols() {
        gram(y)
    } else {
        gram(&y.adjoint())
    };
    match method {
        LogDetMethod::Eigen => {
            let eig = SymmetricEigen::try_new(g, f64::EPSILON, 0)
                .ok_or_else(|| failure("Hermitian eigensolver did not converge"))?;
            Ok(eig
                .eigenvalues
                .iter()
                .map(|&l| (rho * l.max(0.0) / n).ln_1p())
                .sum())
        }
        LogDetMethod::Cholesky => {
            let m = shifted(g, rho / n);
            let chol =
                Cholesky::new(m).ok_or_else(|| failure("I + rho/n YY* not positive definite"))?;
            Ok(2.0
                * chol
                    .l_dirty()
                    .diagonal()
                    .iter()
                    .map(|z| z.re.ln())
                    .sum::<f64>())
        }
    }
}

/// `I + scale·G`.
fn shifted(mut g: CMatrix, scale: f64) -> CMatrix {
    g *= Complex::from(scale);
    for i in 0..g.nrows() {
        g[(i, i)] += Complex::from(1.0);
    }
    g
}

/// Eigendecomposition of `YY*`, from which both `I_n(ρ)` and the resolvent
/// `H(ρ) = (ρ/n · YY* + I)⁻¹` follow.
#[derive(Clone, Debug)]
pub struct GramSpectrum {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: CMatrix,
    n: usize,
}

impl GramSpectrum {
    pub fn of(y: &CMatrix) -> Result<Self> {
        let eig = SymmetricEigen::try_new(gram(y), f64::EPSILON, 0)
            .ok_or_else(|| failure("Hermitian eigensolver did not converge"))?;
        Ok(GramSpectrum {
            eigenvalues: eig.eigenvalues.map(|l| l.max(0.0)),
            eigenvectors: eig.eigenvectors,
            n: y.ncols(),
        })
    }

    fn resolvent_weights(&self, rho: f64) -> impl Iterator<Item = f64> + '_ {
        let n = self.n as f64;
        self.eigenvalues
            .iter()
            .map(move |&l| 1.0 / (1.0 + rho * l / n))
    }

    pub fn mutual_information(&self, rho: f64) -> f64 {
        let n = self.n as f64;
        self.eigenvalues
            .iter()
            .map(|&l| (rho * l / n).ln_1p())
            .sum()
    }

    /// Eigenvalues of `H(ρ)`, each `1/(1 + ρλ/n)`.
    pub fn resolvent_eigenvalues(&self, rho: f64) -> Vec<f64> {
        self.resolvent_weights(rho).collect()
    }

    /// `H(ρ) = U diag(1/(1 + ρλ/n)) U*`.
    pub fn resolvent(&self, rho: f64) -> CMatrix {
        let u = &self.eigenvectors;
        let mut scaled = u.clone();
        for (k, w) in self.resolvent_weights(rho).enumerate() {
            scaled.column_mut(k).scale_mut(w);
        }
        scaled * u.adjoint()
    }

    /// Diagonal of `H(ρ)`: `H_ii = Σ_k |U_ik|² / (1 + ρλ_k/n)`.
    pub fn resolvent_diagonal(&self, rho: f64) -> Vec<f64> {
        let u = &self.eigenvectors;
        let weights: Vec<f64> = self.resolvent_weights(rho).collect();
        (0..u.nrows())
            .map(|i| {
                weights
                    .iter()
                    .enumerate()
                    .map(|(k, &w)| u[(i, k)].norm_sqr() * w)
                    .sum()
            })
            .collect()
    }
}

/// Diagonal of `H(ρ)` through a Cholesky inverse of `I + ρ/n · YY*`.
pub fn resolvent_diagonal_cholesky(y: &CMatrix, rho: f64) -> Result<Vec<f64>> {
    let n = y.ncols() as f64;
    let m = shifted(gram(y), rho / n);
    let chol = Cholesky::new(m).ok_or_else(|| failure("I + rho/n YY* not positive definite"))?;
    Ok(inverse_gram_diagonal(&chol.unpack()))
}

/// Diagonal of `(L L*)⁻¹ = L^{-*} L⁻¹` for lower-triangular `L`:
/// entry `i` is the squared norm of column `i` of `L⁻¹`.
fn inverse_gram_diagonal(l: &CMatrix) -> Vec<f64> {
    let m = l.nrows();
    let mut col = vec![Complex64::new(0.0, 0.0); m];
    (0..m)
        .map(|i| {
            // Forward substitution for L w = e_i; w is zero above row i.
            col[i] = Complex::from(1.0) / l[(i, i)];
            let mut norm = col[i].norm_sqr();
            for r in i + 1..m {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in i..r {
                    acc += l[(r, k)] * col[k];
                }
                col[r] = -acc / l[(r, r)];
                norm += col[r].norm_sqr();
            }
            norm
        })
        .collect()
}

/// Runs `trials` independent jobs, each with its own [`trial_rng`] stream,
/// and returns the results ordered by trial index. `threads = 0` uses the
/// global rayon pool.
pub fn run_trials<T, F>(trials: u64, seed: u64, threads: usize, job: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64, &mut ChaCha8Rng) -> Result<T> + Sync,
{
    let work = || {
        (0..trials)
            .into_par_iter()
            .map(|index| {
                let mut rng = trial_rng(seed, index);
                job(index, &mut rng).map_err(|e| match e {
                    Error::NumericalFailure { reason, .. } => Error::NumericalFailure {
                        trial: index,
                        reason,
                    },
                    other => other,
                })
            })
            .collect::<Result<Vec<T>>>()
    };
    if threads == 0 {
        return work();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot build thread pool: {e}")))?;
    pool.install(work)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BatchConfig {
    pub rho: f64,
    pub trials: u64,
    pub seed: u64,
    /// Worker threads; 0 means the rayon default.
    pub threads: usize,
    pub method: LogDetMethod,
}

impl BatchConfig {
    pub fn new(rho: f64, trials: u64, seed: u64) -> Self {
        BatchConfig {
            rho,
            trials,
            seed,
            threads: 0,
            method: LogDetMethod::default(),
        }
    }
}

/// Realizations of `I_n(ρ)` with their summary statistics.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialBatch {
    pub rho: f64,
    pub seed: u64,
    pub samples: Vec<f64>,
    pub mean: f64,
    /// Unbiased sample variance, present from two samples on.
    pub var: Option<f64>,
}

impl TrialBatch {
    pub fn from_samples(rho: f64, seed: u64, samples: Vec<f64>) -> Self {
        TrialBatch {
            rho,
            seed,
            mean: stats::mean(&samples),
            var: stats::variance(&samples),
            samples,
        }
    }

    /// Standard error of the sample mean.
    pub fn std_error(&self) -> Option<f64> {
        self.var.map(|v| (v / self.samples.len() as f64).sqrt())
    }

    /// One sample per line, shortest round-trip decimal form.
    pub fn write_csv<W: Write>(&self, mut out: W, unit: InfoUnit) -> Result<()> {
        for &s in &self.samples {
            writeln!(out, "{}", unit.from_nats(s))?;
        }
        Ok(())
    }
}

pub fn run_batch(profile: &ValidatedProfile, config: &BatchConfig) -> Result<TrialBatch> {
    check_rho(config.rho)?;
    if config.trials == 0 {
        return Err(Error::InvalidArgument("trials must be >= 1".into()));
    }
    let samples = run_trials(config.trials, config.seed, config.threads, |_, rng| {
        let y = sample_channel(profile, rng);
        mutual_information_with(&y, config.rho, config.method)
    })?;
    Ok(TrialBatch::from_samples(config.rho, config.seed, samples))
}

/// Distributional comparison of standardized samples with `N(0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TestReport {
    pub samples: usize,
    pub ks_stat: f64,
    pub ks_p: f64,
    /// Sample variance of the standardized values (= var(I)/σ²).
    pub var_ratio: f64,
    pub mean: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

/// Compares already-standardized values with `N(0, 1)`.
pub fn standard_normal_report(z: &[f64]) -> Result<TestReport> {
    if z.len() < MIN_NORMALITY_SAMPLES {
        return Err(Error::InsufficientSamples {
            got: z.len(),
            need: MIN_NORMALITY_SAMPLES,
        });
    }
    let ks_stat = stats::ks_statistic(z, normal_cdf);
    let (skewness, excess_kurtosis) = stats::skewness_kurtosis(z);
    Ok(TestReport {
        samples: z.len(),
        ks_stat,
        ks_p: stats::ks_p_value(ks_stat, z.len()),
        var_ratio: stats::variance(z).unwrap_or(f64::NAN),
        mean: stats::mean(z),
        skewness,
        excess_kurtosis,
    })
}

/// Standardizes each sample as `(I − V)/σ` and tests it against `N(0, 1)`.
pub fn normality_test(batch: &TrialBatch, equivalents: &Equivalents) -> Result<TestReport> {
    let sigma = equivalents.sigma();
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(
            "normality test needs sigma > 0 (rho > 0)".into(),
        ));
    }
    let z: Vec<f64> = batch
        .samples
        .iter()
        .map(|&s| (s - equivalents.v) / sigma)
        .collect();
    standard_normal_report(&z)
}
