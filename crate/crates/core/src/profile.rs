//! Separable variance profiles.
//!
//! A Kronecker channel `G = Ψ W Ψ̃` has the same mutual information as
//! `Y = D^{1/2} X D̃^{1/2}` where `D`, `D̃` hold the eigenvalues of `ΨΨ*` and
//! `Ψ̃Ψ̃*`, so a profile is stored as the two diagonals only.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Side};

/// Diagonals of `D` (receive, length `N`) and `D̃` (transmit, length `n`).
///
/// The JSON form is `{"n": .., "N": .., "d": [..], "d_tilde": [..]}` with
/// optional `d_max` / `d_tilde_max` declaring the uniform bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceProfile {
    pub n: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub d: Vec<f64>,
    pub d_tilde: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_tilde_max: Option<f64>,
}

impl VarianceProfile {
    pub fn new(d: Vec<f64>, d_tilde: Vec<f64>) -> Self {
        VarianceProfile {
            n: d_tilde.len(),
            big_n: d.len(),
            d,
            d_tilde,
            d_max: None,
            d_tilde_max: None,
        }
    }

    pub fn validate(self) -> Result<ValidatedProfile> {
        validate(self)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = self.to_json_string()?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }
}

/// A profile that passed [`validate`]. Immutable; share freely.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidatedProfile {
    inner: VarianceProfile,
    d_max: f64,
    d_tilde_max: f64,
    trace_d: f64,
    trace_d_tilde: f64,
}

impl ValidatedProfile {
    /// Number of transmit antennas (columns of `Y`).
    pub fn n(&self) -> usize {
        self.inner.n
    }

    /// Number of receive antennas (rows of `Y`).
    pub fn big_n(&self) -> usize {
        self.inner.big_n
    }

    pub fn d(&self) -> &[f64] {
        &self.inner.d
    }

    pub fn d_tilde(&self) -> &[f64] {
        &self.inner.d_tilde
    }

    /// Aspect ratio `c = N / n`.
    pub fn ratio(&self) -> f64 {
        self.inner.big_n as f64 / self.inner.n as f64
    }

    /// Declared bound on `d`, or the largest entry when none was declared.
    pub fn d_max(&self) -> f64 {
        self.d_max
    }

    pub fn d_tilde_max(&self) -> f64 {
        self.d_tilde_max
    }

    /// `(1/n) tr D`. Note the normalisation is by `n`, not `N`.
    pub fn normalized_trace_d(&self) -> f64 {
        self.trace_d
    }

    /// `(1/n) tr D̃`.
    pub fn normalized_trace_d_tilde(&self) -> f64 {
        self.trace_d_tilde
    }

    pub fn profile(&self) -> &VarianceProfile {
        &self.inner
    }

    pub fn into_inner(self) -> VarianceProfile {
        self.inner
    }
}

fn check_side(values: &[f64], declared: Option<f64>, side: Side) -> Result<f64> {
    if let Some(bound) = declared {
        if !bound.is_finite() || bound < 0.0 {
            return Err(Error::InvalidParams(format!(
                "declared bound for {side} must be finite and nonnegative, got {bound}"
            )));
        }
    }
    let mut max = 0.0f64;
    for (index, &value) in values.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::RejectNonFinite { side, index });
        }
        if value < 0.0 {
            return Err(Error::RejectNegativeEntry { side, index, value });
        }
        if let Some(bound) = declared {
            if value > bound {
                return Err(Error::RejectExceedsBound {
                    side,
                    index,
                    value,
                    bound,
                });
            }
        }
        max = max.max(value);
    }
    Ok(declared.unwrap_or(max))
}

/// Checks nonnegativity, boundedness and nonzero normalized traces, and
/// records the ratio `N / n`.
pub fn validate(profile: VarianceProfile) -> Result<ValidatedProfile> {
    if profile.n == 0 || profile.big_n == 0 {
        return Err(Error::RejectShape(format!(
            "dimensions must be positive, got N = {}, n = {}",
            profile.big_n, profile.n
        )));
    }
    if profile.d.len() != profile.big_n {
        return Err(Error::RejectShape(format!(
            "d has {} entries but N = {}",
            profile.d.len(),
            profile.big_n
        )));
    }
    if profile.d_tilde.len() != profile.n {
        return Err(Error::RejectShape(format!(
            "d_tilde has {} entries but n = {}",
            profile.d_tilde.len(),
            profile.n
        )));
    }
    let d_max = check_side(&profile.d, profile.d_max, Side::Receive)?;
    let d_tilde_max = check_side(&profile.d_tilde, profile.d_tilde_max, Side::Transmit)?;

    let n = profile.n as f64;
    let trace_d = profile.d.iter().sum::<f64>() / n;
    let trace_d_tilde = profile.d_tilde.iter().sum::<f64>() / n;
    if trace_d <= 0.0 {
        return Err(Error::RejectZeroTrace {
            side: Side::Receive,
        });
    }
    if trace_d_tilde <= 0.0 {
        return Err(Error::RejectZeroTrace {
            side: Side::Transmit,
        });
    }
    Ok(ValidatedProfile {
        inner: profile,
        d_max,
        d_tilde_max,
        trace_d,
        trace_d_tilde,
    })
}

/// Deterministic profile families used for experiments.
///
/// Parsed from `constant:<c0>`, `linear-ramp:<lo>,<hi>` or
/// `exponential-decay:<base>`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ProfileKind {
    Constant { value: f64 },
    LinearRamp { lo: f64, hi: f64 },
    ExponentialDecay { base: f64 },
}

impl ProfileKind {
    fn check(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite();
        match *self {
            ProfileKind::Constant { value } if !ok(value) || value <= 0.0 => Err(
                Error::InvalidParams(format!("constant value must be > 0, got {value}")),
            ),
            ProfileKind::LinearRamp { lo, hi } if !ok(lo) || !ok(hi) || lo < 0.0 || hi < 0.0 => {
                Err(Error::InvalidParams(format!(
                    "linear-ramp endpoints must be >= 0, got ({lo}, {hi})"
                )))
            }
            ProfileKind::ExponentialDecay { base } if !ok(base) || base <= 0.0 => Err(
                Error::InvalidParams(format!("exponential-decay base must be > 0, got {base}")),
            ),
            _ => Ok(()),
        }
    }

    /// The first `len` values of the family.
    pub fn values(&self, len: usize) -> Result<Vec<f64>> {
        self.check()?;
        Ok(match *self {
            ProfileKind::Constant { value } => vec![value; len],
            ProfileKind::LinearRamp { lo, hi } => {
                if len == 1 {
                    vec![lo]
                } else {
                    let step = (hi - lo) / (len - 1) as f64;
                    (0..len)
                        .map(|i| {
                            if i + 1 == len {
                                hi
                            } else {
                                lo + step * i as f64
                            }
                        })
                        .collect()
                }
            }
            ProfileKind::ExponentialDecay { base } => {
                (0..len).map(|i| base.powi(i as i32)).collect()
            }
        })
    }
}

impl FromStr for ProfileKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, params) = s.split_once(':').unwrap_or((s, ""));
        let nums = params
            .split(',')
            .filter(|p| !p.trim().is_empty())
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidParams(format!("`{p}` is not a number")))
            })
            .collect::<Result<Vec<_>>>()?;
        let arity = |k: usize| -> Result<()> {
            if nums.len() == k {
                Ok(())
            } else {
                Err(Error::InvalidParams(format!(
                    "`{name}` takes {k} parameter(s), got {}",
                    nums.len()
                )))
            }
        };
        let kind = match name.trim() {
            "constant" => {
                arity(1)?;
                ProfileKind::Constant { value: nums[0] }
            }
            "linear-ramp" => {
                arity(2)?;
                ProfileKind::LinearRamp {
                    lo: nums[0],
                    hi: nums[1],
                }
            }
            "exponential-decay" => {
                arity(1)?;
                ProfileKind::ExponentialDecay { base: nums[0] }
            }
            other => return Err(Error::UnknownKind(other.to_string())),
        };
        kind.check()?;
        Ok(kind)
    }
}

/// Builds a profile with both diagonals drawn from the same family:
/// `d` has `big_n` entries and `d_tilde` has `n`.
pub fn generate(kind: ProfileKind, big_n: usize, n: usize) -> Result<VarianceProfile> {
    if big_n == 0 || n == 0 {
        return Err(Error::InvalidParams(format!(
            "dimensions must be >= 1, got N = {big_n}, n = {n}"
        )));
    }
    Ok(VarianceProfile::new(kind.values(big_n)?, kind.values(n)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_profile_is_valid() {
        let p = VarianceProfile::new(vec![1.0, 1.0], vec![1.0, 1.0])
            .validate()
            .unwrap();
        assert_eq!(p.ratio(), 1.0);
        assert_eq!(p.normalized_trace_d(), 1.0);
        assert_eq!(p.d_max(), 1.0);
    }

    #[test]
    fn negative_entry_rejected() {
        let err = VarianceProfile::new(vec![1.0, -0.5], vec![1.0, 1.0])
            .validate()
            .unwrap_err();
        assert!(matches!(
            err,
            Error::RejectNegativeEntry {
                side: Side::Receive,
                index: 1,
                ..
            }
        ));
    }

    #[test]
    fn zero_trace_rejected() {
        let err = VarianceProfile::new(vec![0.0, 0.0], vec![1.0])
            .validate()
            .unwrap_err();
        assert!(matches!(
            err,
            Error::RejectZeroTrace {
                side: Side::Receive
            }
        ));
        let err = VarianceProfile::new(vec![1.0], vec![0.0])
            .validate()
            .unwrap_err();
        assert!(matches!(
            err,
            Error::RejectZeroTrace {
                side: Side::Transmit
            }
        ));
    }

    #[test]
    fn declared_bound_enforced() {
        let mut p = VarianceProfile::new(vec![1.0, 3.0], vec![1.0]);
        p.d_max = Some(2.0);
        assert!(matches!(
            p.clone().validate().unwrap_err(),
            Error::RejectExceedsBound { index: 1, .. }
        ));
        p.d_max = Some(4.0);
        assert_eq!(p.validate().unwrap().d_max(), 4.0);
    }

    #[test]
    fn shape_and_nan_rejected() {
        let mut p = VarianceProfile::new(vec![1.0], vec![1.0]);
        p.big_n = 2;
        assert!(matches!(p.validate(), Err(Error::RejectShape(_))));
        let p = VarianceProfile::new(vec![f64::NAN], vec![1.0]);
        assert!(matches!(p.validate(), Err(Error::RejectNonFinite { .. })));
        let p = VarianceProfile::new(vec![], vec![1.0]);
        assert!(matches!(p.validate(), Err(Error::RejectShape(_))));
    }

    #[test]
    fn generator_examples() {
        let p = generate(ProfileKind::Constant { value: 1.0 }, 4, 4).unwrap();
        assert_eq!(p.d, vec![1.0; 4]);
        assert_eq!(p.d_tilde, vec![1.0; 4]);

        let ramp = ProfileKind::LinearRamp { lo: 0.5, hi: 1.5 };
        assert_eq!(ramp.values(3).unwrap(), vec![0.5, 1.0, 1.5]);

        let decay = ProfileKind::ExponentialDecay { base: 0.5 };
        let p = generate(decay, 2, 3).unwrap();
        assert_eq!(p.d_tilde, vec![1.0, 0.5, 0.25]);
    }

    #[test]
    fn kind_parsing() {
        assert_eq!(
            "constant:1".parse::<ProfileKind>().unwrap(),
            ProfileKind::Constant { value: 1.0 }
        );
        assert_eq!(
            "linear-ramp:0.5,1.5".parse::<ProfileKind>().unwrap(),
            ProfileKind::LinearRamp { lo: 0.5, hi: 1.5 }
        );
        assert!(matches!(
            "gaussian:1".parse::<ProfileKind>(),
            Err(Error::UnknownKind(_))
        ));
        assert!(matches!(
            "exponential-decay:0".parse::<ProfileKind>(),
            Err(Error::InvalidParams(_))
        ));
        assert!(matches!(
            "exponential-decay:-1".parse::<ProfileKind>(),
            Err(Error::InvalidParams(_))
        ));
        assert!(matches!(
            "linear-ramp:1".parse::<ProfileKind>(),
            Err(Error::InvalidParams(_))
        ));
    }

    #[test]
    fn json_field_names() {
        let p = VarianceProfile::new(vec![1.0, 2.0], vec![0.5]);
        let text = p.to_json_string().unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["N"], 2);
        assert_eq!(v["n"], 1);
        assert!(v.get("d_max").is_none());
        assert_eq!(VarianceProfile::from_json_str(&text).unwrap(), p);
    }
}
