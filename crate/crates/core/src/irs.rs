//! Incremental recertification of an approximated classifier `f^p` from the
//! cached certification state of the original `f`.
//!
//! Two routes, chosen by the cached lower bound p̲_A against the threshold γ:
//!
//! * p̲_A < γ: bound the disagreement ζ = P(f(x+ε) ≠ f^p(x+ε)) from above by
//!   replaying the first `n_p` cached noise samples through `f^p`, then
//!   certify with p̲_A − ζ. The result holds at confidence 1 − (α + α_ζ) even
//!   though both bounds were estimated on the same noise.
//! * p̲_A ≥ γ: near-certain inputs gain nothing from ζ, so draw `n_p` fresh
//!   samples of `f^p` and bound its own success probability at the combined
//!   confidence 1 − (α + α_ζ).

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cache::{input_digest, CacheRecord};
use crate::certify::{
    check_input, class_counts, predictions_under_noise, verdict_from_bound, CertificationOutcome,
    Verdict, FRESH_STREAM,
};
use crate::classifier::Classifier;
use crate::error::{Error, Result};
use crate::noise::{derive_seed_list, split_seed, NoiseSpec, GENERATOR_ID};
use crate::stats::{
    inverse_normal_cdf, lower_confidence_bound, upper_confidence_bound, BinomialSample,
    ConfidenceBoundSpec,
};

pub const DEFAULT_ALPHA: f64 = 0.001;
pub const DEFAULT_ALPHA_ZETA: f64 = 0.001;
pub const DEFAULT_GAMMA: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IrsParams {
    pub sigma: f64,
    pub n_p: usize,
    pub alpha: f64,
    pub alpha_zeta: f64,
    pub gamma: f64,
    /// Seed for the fresh-sample route.
    pub fresh_seed: u64,
}

impl IrsParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::domain(format!("sigma must be positive, got {}", self.sigma)));
        }
        if self.n_p == 0 {
            return Err(Error::domain("n_p must be at least 1"));
        }
        if !(self.gamma > 0.5 && self.gamma < 1.0) {
            return Err(Error::domain(format!("gamma must lie in (0.5, 1), got {}", self.gamma)));
        }
        ConfidenceBoundSpec::clopper_pearson(self.alpha)?;
        ConfidenceBoundSpec::clopper_pearson(self.alpha_zeta)?;
        // The fresh route bounds at alpha + alpha_zeta.
        ConfidenceBoundSpec::clopper_pearson(self.combined_alpha())?;
        Ok(())
    }

    pub fn combined_alpha(&self) -> f64 {
        self.alpha + self.alpha_zeta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZetaEstimate {
    /// Clopper-Pearson upper bound on the disagreement probability.
    pub zeta: f64,
    pub disagreements: u64,
    pub samples: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "route", rename_all = "lowercase")]
pub enum IrsRoute {
    Reuse { zeta: ZetaEstimate },
    Fresh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrsOutcome {
    pub outcome: CertificationOutcome,
    pub route: IrsRoute,
}

fn check_record(x: &[f64], sigma: f64, record: &CacheRecord) -> Result<()> {
    if record.generator_id != GENERATOR_ID {
        return Err(Error::CacheIncompatible(format!(
            "record was generated by `{}`, this engine implements `{GENERATOR_ID}`",
            record.generator_id
        )));
    }
    if record.sigma != sigma {
        return Err(Error::CacheIncompatible(format!(
            "record was certified at sigma={}, requested sigma={sigma}",
            record.sigma
        )));
    }
    if record.input_digest != input_digest(x) {
        return Err(Error::CacheIncompatible(format!(
            "record `{}` belongs to a different input vector",
            record.input_id
        )));
    }
    Ok(())
}

/// Upper confidence bound on P(f(x+ε) ≠ f^p(x+ε)), replaying the first
/// `n_p` cached samples.
pub fn estimate_zeta(
    approx: &Classifier,
    x: &[f64],
    params: &IrsParams,
    record: &CacheRecord,
) -> Result<ZetaEstimate> {
    params.validate()?;
    check_input(approx, x)?;
    check_record(x, params.sigma, record)?;
    if record.p_lower.is_none() {
        return Err(Error::CacheIncompatible(format!(
            "record `{}` abstained and holds no samples",
            record.input_id
        )));
    }
    if params.n_p > record.seeds.len() {
        return Err(Error::domain(format!(
            "n_p={} exceeds the {} cached samples",
            params.n_p,
            record.seeds.len()
        )));
    }
    let spec = NoiseSpec::new(params.sigma, x.len())?;
    let seeds = &record.seeds.as_slice()[..params.n_p];
    let replayed = predictions_under_noise(approx, x, &spec, seeds)?;
    let disagreements = replayed
        .iter()
        .zip(&record.predictions)
        .filter(|(a, b)| a != b)
        .count() as u64;
    let zeta = upper_confidence_bound(
        BinomialSample::new(disagreements, params.n_p as u64)?,
        ConfidenceBoundSpec::clopper_pearson(params.alpha_zeta)?,
    )?;
    Ok(ZetaEstimate {
        zeta,
        disagreements,
        samples: params.n_p as u64,
    })
}

/// Certifies the smoothed `f^p` at `x` from the cached record of `f`.
pub fn certify_irs(
    approx: &Classifier,
    x: &[f64],
    params: &IrsParams,
    record: &CacheRecord,
) -> Result<IrsOutcome> {
    let start = Instant::now();
    params.validate()?;
    check_input(approx, x)?;
    check_record(x, params.sigma, record)?;
    let Some(cached_lower) = record.p_lower else {
        return Err(Error::CacheIncompatible(format!(
            "record `{}` abstained; recertify from scratch",
            record.input_id
        )));
    };
    let class = record.top_class;

    if cached_lower < params.gamma {
        let zeta = estimate_zeta(approx, x, params, record)?;
        let bound = cached_lower - zeta.zeta;
        let verdict = match irs_radius(cached_lower, zeta.zeta, params.sigma)? {
            Some(radius) => Verdict::Certified { class, radius },
            None => Verdict::Abstain,
        };
        return Ok(IrsOutcome {
            outcome: CertificationOutcome {
                verdict,
                p_lower: bound,
                samples_used: zeta.samples,
                elapsed: start.elapsed(),
            },
            route: IrsRoute::Reuse { zeta },
        });
    }

    let spec = NoiseSpec::new(params.sigma, x.len())?;
    let seeds = derive_seed_list(split_seed(params.fresh_seed, FRESH_STREAM), params.n_p)?;
    let counts = class_counts(
        &predictions_under_noise(approx, x, &spec, seeds.as_slice())?,
        approx.label_count(),
    );
    let hits = counts.get(class as usize).copied().unwrap_or(0);
    let p_lower = lower_confidence_bound(
        BinomialSample::new(hits, params.n_p as u64)?,
        ConfidenceBoundSpec::clopper_pearson(params.combined_alpha())?,
    )?;
    Ok(IrsOutcome {
        outcome: CertificationOutcome {
            verdict: verdict_from_bound(class, p_lower, params.sigma)?,
            p_lower,
            samples_used: params.n_p as u64,
            elapsed: start.elapsed(),
        },
        route: IrsRoute::Fresh,
    })
}

/// σ·Φ⁻¹(p̲_A − ζ) when p̲_A − ζ > 1/2, otherwise `None`.
pub fn irs_radius(p_lower: f64, zeta: f64, sigma: f64) -> Result<Option<f64>> {
    check_unit(p_lower, "p_lower")?;
    check_unit(zeta, "zeta")?;
    if !(sigma > 0.0) {
        return Err(Error::domain(format!("sigma must be positive, got {sigma}")));
    }
    let bound = p_lower - zeta;
    if bound > 0.5 {
        Ok(Some(sigma * inverse_normal_cdf(bound)?))
    } else {
        Ok(None)
    }
}

/// The unsimplified radius (σ/2)(Φ⁻¹(p̲_A − ζ) − Φ⁻¹(p̄_B + ζ)).
pub fn two_sided_irs_radius(p_lower: f64, p_upper_runner_up: f64, zeta: f64, sigma: f64) -> Result<f64> {
    check_unit(p_lower, "p_lower")?;
    check_unit(p_upper_runner_up, "p_upper_runner_up")?;
    check_unit(zeta, "zeta")?;
    Ok(0.5
        * sigma
        * (inverse_normal_cdf(p_lower - zeta)? - inverse_normal_cdf(p_upper_runner_up + zeta)?))
}

fn check_unit(v: f64, name: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::domain(format!("{name} must lie in [0, 1], got {v}")));
    }
    Ok(())
}
