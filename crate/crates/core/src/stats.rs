//! Sample statistics, the one-sample Kolmogorov–Smirnov test and the
//! least-squares line fits used by the verification harness.

use serde::Serialize;

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance; `None` below two samples.
pub fn variance(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs);
    Some(xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64)
}

/// Moment skewness `m₃ / m₂^{3/2}` and excess kurtosis `m₄ / m₂² − 3`.
pub fn skewness_kurtosis(xs: &[f64]) -> (f64, f64) {
    let m = mean(xs);
    let k = xs.len() as f64;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in xs {
        let d = x - m;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= k;
    m3 /= k;
    m4 /= k;
    (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
}

/// `sup |F_n − F|` for the empirical CDF of `xs` against `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(xs: &[f64], cdf: F) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / k).max((i + 1) as f64 / k - f)
        })
        .fold(0.0, f64::max)
}

/// Kolmogorov survival function `Q(λ) = 2 Σ_{k≥1} (−1)^{k−1} e^{−2k²λ²}`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Small-λ form converges faster here:
        // 1 − Q(λ) = √(2π)/λ Σ_{k≥1} e^{−(2k−1)²π²/(8λ²)}.
        let pi2 = std::f64::consts::PI.powi(2);
        let sum: f64 = (1..=20)
            .map(|k| {
                let j = (2 * k - 1) as f64;
                (-j * j * pi2 / (8.0 * lambda * lambda)).exp()
            })
            .sum();
        let cdf = (2.0 * std::f64::consts::PI).sqrt() / lambda * sum;
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Asymptotic p-value of a KS statistic `d` on `n` samples, with
/// Stephens' small-sample correction of the argument.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    kolmogorov_survival((sn + 0.12 + 0.11 / sn) * d)
}

/// Least-squares line `y = intercept + slope·x` with standard errors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub intercept_se: f64,
}

/// Ordinary least squares. Standard errors use the residual variance with
/// `len − 2` degrees of freedom (zero when the fit is exact or `len = 2`).
pub fn ols(x: &[f64], y: &[f64]) -> LineFit {
    let w = vec![1.0; x.len()];
    let fit = weighted_fit(x, y, &w);
    let k = x.len();
    if k <= 2 {
        return LineFit {
            slope_se: 0.0,
            intercept_se: 0.0,
            ..fit
        };
    }
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(&xi, &yi)| (yi - fit.intercept - fit.slope * xi).powi(2))
        .sum();
    let s2 = rss / (k - 2) as f64;
    LineFit {
        slope_se: fit.slope_se * s2.sqrt(),
        intercept_se: fit.intercept_se * s2.sqrt(),
        ..fit
    }
}

/// Weighted least squares with weights `1/σᵢ²` treated as known; the
/// reported standard errors are the ones implied by those variances.
pub fn weighted_fit(x: &[f64], y: &[f64], w: &[f64]) -> LineFit {
    assert!(x.len() == y.len() && x.len() == w.len() && x.len() >= 2);
    let sw: f64 = w.iter().sum();
    let sx: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum();
    let sy: f64 = w.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = w.iter().zip(x).map(|(a, b)| a * b * b).sum();
    let sxy: f64 = w.iter().zip(x).zip(y).map(|((a, b), c)| a * b * c).sum();
    let det = sw * sxx - sx * sx;
    let slope = (sw * sxy - sx * sy) / det;
    let intercept = (sxx * sy - sx * sxy) / det;
    LineFit {
        slope,
        intercept,
        slope_se: (sw / det).sqrt(),
        intercept_se: (sxx / det).sqrt(),
    }
}
