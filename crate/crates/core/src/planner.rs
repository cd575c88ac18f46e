//! Sample-budget planning: how many Bernoulli draws an interval method needs
//! before its bound lands within `chi` of the true proportion.
//!
//! The required count peaks around p = 1/2 and falls toward both ends,
//! which is why bounding a small disagreement probability is much cheaper
//! than bounding a top-class probability from scratch.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{
    lower_confidence_bound, upper_confidence_bound, BinomialSample, BoundMethod,
    ConfidenceBoundSpec,
};

/// Width of the non-monotone pockets scanned below the bisection result.
const POCKET_SCAN: u64 = 64;
const MAX_SAMPLES: u64 = 1 << 40;
const MIN_CHI: f64 = 1e-9;

/// How the error of an interval is measured at the idealized observation
/// k = round(p·n).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorMeasure {
    /// upper(k, n) − lower(k, n), each side at level α.
    #[default]
    Width,
    /// p − lower(k, n).
    Lower,
    /// upper(k, n) − p.
    Upper,
}

impl ErrorMeasure {
    pub fn name(self) -> &'static str {
        match self {
            ErrorMeasure::Width => "width",
            ErrorMeasure::Lower => "lower",
            ErrorMeasure::Upper => "upper",
        }
    }
}

impl std::str::FromStr for ErrorMeasure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "width" => Ok(ErrorMeasure::Width),
            "lower" => Ok(ErrorMeasure::Lower),
            "upper" => Ok(ErrorMeasure::Upper),
            other => Err(Error::domain(format!("unknown error measure `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanQuery {
    pub p_true: f64,
    pub chi: f64,
    pub spec: ConfidenceBoundSpec,
    pub measure: ErrorMeasure,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub n_required: u64,
    pub achieved_error: f64,
}

/// Error of the bound at `n` samples for the idealized observation.
pub fn idealized_error(q: &PlanQuery, n: u64) -> Result<f64> {
    let k = (q.p_true * n as f64).round_ties_even().clamp(0.0, n as f64) as u64;
    let sample = BinomialSample::new(k, n)?;
    Ok(match q.measure {
        ErrorMeasure::Width => {
            upper_confidence_bound(sample, q.spec)? - lower_confidence_bound(sample, q.spec)?
        }
        ErrorMeasure::Lower => q.p_true - lower_confidence_bound(sample, q.spec)?,
        ErrorMeasure::Upper => upper_confidence_bound(sample, q.spec)? - q.p_true,
    })
}

/// The least `n` whose idealized error is at most `chi`.
///
/// Exponential bracketing, then bisection, then a short linear scan below
/// the bisection result for the rounding-induced non-monotone pockets.
pub fn required_samples(q: &PlanQuery) -> Result<PlanResult> {
    if !(0.0..=1.0).contains(&q.p_true) {
        return Err(Error::domain(format!("p_true must lie in [0, 1], got {}", q.p_true)));
    }
    if !(q.chi > 0.0 && q.chi < 1.0) {
        return Err(Error::domain(format!("chi must lie in (0, 1), got {}", q.chi)));
    }
    if q.chi < MIN_CHI {
        return Err(Error::Planning(format!(
            "target error {} is below the numeric tolerance {MIN_CHI}",
            q.chi
        )));
    }
    let ok = |n: u64| -> Result<bool> { Ok(idealized_error(q, n)? <= q.chi) };

    let mut hi = 1u64;
    let mut lo = 0u64;
    while !ok(hi)? {
        lo = hi;
        hi = hi.checked_mul(2).filter(|&h| h <= MAX_SAMPLES).ok_or_else(|| {
            Error::Planning(format!(
                "no sample count up to {MAX_SAMPLES} reaches error {} at p={}",
                q.chi, q.p_true
            ))
        })?;
    }
    // invariant: !ok(lo) (or lo == 0), ok(hi)
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut n = hi;
    for candidate in hi.saturating_sub(POCKET_SCAN).max(1)..hi {
        if ok(candidate)? {
            n = candidate;
            break;
        }
    }
    Ok(PlanResult {
        n_required: n,
        achieved_error: idealized_error(q, n)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub method: BoundMethod,
    pub alpha: f64,
    pub chi: f64,
    pub p: f64,
    pub n_required: u64,
}

/// Required samples over a grid of target errors and proportions.
pub fn sample_curve(
    method: BoundMethod,
    chi_list: &[f64],
    alpha: f64,
    p_grid: &[f64],
    measure: ErrorMeasure,
) -> Result<Vec<CurveRow>> {
    if chi_list.is_empty() || p_grid.is_empty() {
        return Err(Error::domain("sample curve needs nonempty chi and p grids"));
    }
    let spec = ConfidenceBoundSpec::new(method, alpha)?;
    let points: Vec<(f64, f64)> = chi_list
        .iter()
        .flat_map(|&chi| p_grid.iter().map(move |&p| (chi, p)))
        .collect();
    points
        .par_iter()
        .map(|&(chi, p)| {
            let plan = required_samples(&PlanQuery {
                p_true: p,
                chi,
                spec,
                measure,
            })?;
            Ok(CurveRow {
                method,
                alpha,
                chi,
                p,
                n_required: plan.n_required,
            })
        })
        .collect()
}
