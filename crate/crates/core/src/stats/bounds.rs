//! One-sided binomial confidence bounds.

use serde::{Deserialize, Serialize};

use super::beta::beta_quantile;
use super::normal::inverse_normal_cdf;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundMethod {
    /// Exact interval from beta quantiles. Used by every certificate.
    ClopperPearson,
    Wilson,
    AgrestiCoull,
}

impl BoundMethod {
    pub const ALL: [BoundMethod; 3] = [
        BoundMethod::ClopperPearson,
        BoundMethod::Wilson,
        BoundMethod::AgrestiCoull,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoundMethod::ClopperPearson => "clopper-pearson",
            BoundMethod::Wilson => "wilson",
            BoundMethod::AgrestiCoull => "agresti-coull",
        }
    }
}

impl std::str::FromStr for BoundMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clopper-pearson" | "cp" => Ok(BoundMethod::ClopperPearson),
            "wilson" => Ok(BoundMethod::Wilson),
            "agresti-coull" | "ac" => Ok(BoundMethod::AgrestiCoull),
            other => Err(Error::domain(format!("unknown bound method `{other}`"))),
        }
    }
}

/// A one-sided interval method at confidence `1 - alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceBoundSpec {
    method: BoundMethod,
    alpha: f64,
}

impl ConfidenceBoundSpec {
    pub fn new(method: BoundMethod, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 0.5) {
            return Err(Error::domain(format!("alpha must lie in (0, 0.5], got {alpha}")));
        }
        Ok(Self { method, alpha })
    }

    pub fn clopper_pearson(alpha: f64) -> Result<Self> {
        Self::new(BoundMethod::ClopperPearson, alpha)
    }

    pub fn method(&self) -> BoundMethod {
        self.method
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// `successes` out of `trials` Bernoulli draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinomialSample {
    successes: u64,
    trials: u64,
}

impl BinomialSample {
    pub fn new(successes: u64, trials: u64) -> Result<Self> {
        if trials == 0 {
            return Err(Error::domain("binomial sample needs at least one trial"));
        }
        if successes > trials {
            return Err(Error::domain(format!(
                "successes ({successes}) exceed trials ({trials})"
            )));
        }
        Ok(Self { successes, trials })
    }

    pub fn successes(&self) -> u64 {
        self.successes
    }

    pub fn trials(&self) -> u64 {
        self.trials
    }

    pub fn proportion(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }
}

/// One-sided lower bound on the success probability at confidence `1 - alpha`.
pub fn lower_confidence_bound(sample: BinomialSample, spec: ConfidenceBoundSpec) -> Result<f64> {
    let (k, n) = (sample.successes, sample.trials);
    match spec.method {
        BoundMethod::ClopperPearson => {
            if k == 0 {
                Ok(0.0)
            } else if k == n {
                Ok(libm::pow(spec.alpha, 1.0 / n as f64))
            } else {
                beta_quantile(spec.alpha, k as f64, (n - k + 1) as f64)
            }
        }
        BoundMethod::Wilson => Ok(wilson(k, n, spec.alpha, -1.0)?.clamp(0.0, 1.0)),
        BoundMethod::AgrestiCoull => Ok(agresti_coull(k, n, spec.alpha, -1.0)?.clamp(0.0, 1.0)),
    }
}

/// One-sided upper bound on the success probability at confidence `1 - alpha`.
pub fn upper_confidence_bound(sample: BinomialSample, spec: ConfidenceBoundSpec) -> Result<f64> {
    let (k, n) = (sample.successes, sample.trials);
    match spec.method {
        BoundMethod::ClopperPearson => {
            if k == n {
                Ok(1.0)
            } else if k == 0 {
                Ok(1.0 - libm::pow(spec.alpha, 1.0 / n as f64))
            } else {
                beta_quantile(1.0 - spec.alpha, (k + 1) as f64, (n - k) as f64)
            }
        }
        BoundMethod::Wilson => Ok(wilson(k, n, spec.alpha, 1.0)?.clamp(0.0, 1.0)),
        BoundMethod::AgrestiCoull => Ok(agresti_coull(k, n, spec.alpha, 1.0)?.clamp(0.0, 1.0)),
    }
}

fn wilson(k: u64, n: u64, alpha: f64, sign: f64) -> Result<f64> {
    let z = inverse_normal_cdf(1.0 - alpha)?;
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let centre = p + z2 / (2.0 * n);
    let spread = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    Ok((centre + sign * spread) / (1.0 + z2 / n))
}

fn agresti_coull(k: u64, n: u64, alpha: f64, sign: f64) -> Result<f64> {
    let z = inverse_normal_cdf(1.0 - alpha)?;
    let z2 = z * z;
    let n_tilde = n as f64 + z2;
    let p_tilde = (k as f64 + 0.5 * z2) / n_tilde;
    Ok(p_tilde + sign * z * (p_tilde * (1.0 - p_tilde) / n_tilde).sqrt())
}
