//! Standard randomized-smoothing certification.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::cache::{input_digest, CacheRecord};
use crate::classifier::{ClassIndex, Classifier};
use crate::error::{Error, Result};
use crate::noise::{self, derive_seed_list, split_seed, NoiseSpec};
use crate::stats::{inverse_normal_cdf, lower_confidence_bound, BinomialSample, ConfidenceBoundSpec};

/// Rows per classifier call when sampling.
pub const SAMPLE_BATCH: usize = 256;

pub(crate) const SELECTION_STREAM: u64 = 0;
pub(crate) const ESTIMATION_STREAM: u64 = 1;
pub(crate) const FRESH_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertifyParams {
    pub sigma: f64,
    /// Samples used to pick the top class.
    pub n0: usize,
    /// Samples used to bound its probability.
    pub n: usize,
    pub alpha: f64,
    pub master_seed: u64,
}

impl CertifyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::domain(format!("sigma must be positive, got {}", self.sigma)));
        }
        if self.n0 == 0 || self.n == 0 {
            return Err(Error::domain("n0 and n must both be at least 1"));
        }
        ConfidenceBoundSpec::clopper_pearson(self.alpha)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Verdict {
    Certified { class: ClassIndex, radius: f64 },
    Abstain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationOutcome {
    pub verdict: Verdict,
    /// The lower bound the verdict was derived from.
    pub p_lower: f64,
    pub samples_used: u64,
    pub elapsed: Duration,
}

impl CertificationOutcome {
    pub fn is_certified(&self) -> bool {
        matches!(self.verdict, Verdict::Certified { .. })
    }

    pub fn prediction(&self) -> Option<ClassIndex> {
        match self.verdict {
            Verdict::Certified { class, .. } => Some(class),
            Verdict::Abstain => None,
        }
    }

    pub fn radius(&self) -> f64 {
        match self.verdict {
            Verdict::Certified { radius, .. } => radius,
            Verdict::Abstain => 0.0,
        }
    }

    /// Radius credited toward ACR: zero unless certified with `label`.
    pub fn credited_radius(&self, label: ClassIndex) -> f64 {
        match self.verdict {
            Verdict::Certified { class, radius } if class == label => radius,
            _ => 0.0,
        }
    }
}

/// Evaluates `f` on `x + noise(seed)` for every seed, in seed order.
pub(crate) fn predictions_under_noise(
    f: &Classifier,
    x: &[f64],
    spec: &NoiseSpec,
    seeds: &[u64],
) -> Result<Vec<ClassIndex>> {
    let dim = x.len();
    let mut out = Vec::with_capacity(seeds.len());
    let mut rows = vec![0.0; SAMPLE_BATCH.min(seeds.len().max(1)) * dim];
    for chunk in seeds.chunks(SAMPLE_BATCH) {
        let rows = &mut rows[..chunk.len() * dim];
        for (&seed, row) in chunk.iter().zip(rows.chunks_exact_mut(dim)) {
            noise::perturb_into(spec, seed, x, row);
        }
        f.predict_into(rows, dim, &mut out)?;
    }
    Ok(out)
}

pub(crate) fn class_counts(predictions: &[ClassIndex], label_count: usize) -> Vec<u64> {
    let mut counts = vec![0u64; label_count];
    for &p in predictions {
        counts[p as usize] += 1;
    }
    counts
}

/// Index of the largest count; ties go to the lowest index.
pub(crate) fn top_class(counts: &[u64]) -> ClassIndex {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best as ClassIndex
}

/// Certified verdict from a lower bound on the top-class probability.
pub(crate) fn verdict_from_bound(class: ClassIndex, p_lower: f64, sigma: f64) -> Result<Verdict> {
    if p_lower > 0.5 {
        Ok(Verdict::Certified {
            class,
            radius: sigma * inverse_normal_cdf(p_lower)?,
        })
    } else {
        Ok(Verdict::Abstain)
    }
}

pub(crate) fn check_input(f: &Classifier, x: &[f64]) -> Result<()> {
    if x.len() != f.dim() {
        return Err(Error::domain(format!(
            "input has dimension {}, classifier expects {}",
            x.len(),
            f.dim()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("input contains non-finite values"));
    }
    Ok(())
}

/// Certifies `g` at `x`: pick the top class from `n0` samples, bound its
/// probability from `n` fresh samples, and report the radius σ·Φ⁻¹(p̲_A).
///
/// The returned cache record holds the `n` estimation seeds and the
/// predictions of `f` on them, which is all incremental recertification needs.
pub fn certify(f: &Classifier, x: &[f64], params: &CertifyParams) -> Result<(CertificationOutcome, CacheRecord)> {
    let start = Instant::now();
    params.validate()?;
    check_input(f, x)?;
    let spec = NoiseSpec::new(params.sigma, x.len())?;
    let bound = ConfidenceBoundSpec::clopper_pearson(params.alpha)?;

    let selection = derive_seed_list(split_seed(params.master_seed, SELECTION_STREAM), params.n0)?;
    let counts0 = class_counts(
        &predictions_under_noise(f, x, &spec, selection.as_slice())?,
        f.label_count(),
    );
    let class = top_class(&counts0);

    let seeds = derive_seed_list(split_seed(params.master_seed, ESTIMATION_STREAM), params.n)?;
    let predictions = predictions_under_noise(f, x, &spec, seeds.as_slice())?;
    let hits = predictions.iter().filter(|&&p| p == class).count() as u64;
    let p_lower = lower_confidence_bound(BinomialSample::new(hits, params.n as u64)?, bound)?;
    let verdict = verdict_from_bound(class, p_lower, params.sigma)?;

    let record = match verdict {
        Verdict::Certified { .. } => CacheRecord {
            input_id: String::new(),
            input_digest: input_digest(x),
            top_class: class,
            p_lower: Some(p_lower),
            sigma: params.sigma,
            alpha: params.alpha,
            n: params.n,
            seeds,
            predictions,
            generator_id: spec.generator_id().to_owned(),
        },
        Verdict::Abstain => CacheRecord::abstained(
            String::new(),
            input_digest(x),
            class,
            params.sigma,
            params.alpha,
            params.n,
        ),
    };
    let outcome = CertificationOutcome {
        verdict,
        p_lower,
        samples_used: (params.n0 + params.n) as u64,
        elapsed: start.elapsed(),
    };
    Ok((outcome, record))
}

/// Mean credited radius over `(outcome, true label)` pairs. Abstentions and
/// wrong predictions count as zero.
pub fn average_certified_radius<'a, I>(items: I) -> Result<f64>
where
    I: IntoIterator<Item = (&'a CertificationOutcome, ClassIndex)>,
{
    let (mut sum, mut count) = (0.0, 0usize);
    for (outcome, label) in items {
        sum += outcome.credited_radius(label);
        count += 1;
    }
    if count == 0 {
        return Err(Error::domain("average certified radius of an empty set"));
    }
    Ok(sum / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcome(verdict: Verdict) -> CertificationOutcome {
        CertificationOutcome {
            verdict,
            p_lower: 0.0,
            samples_used: 0,
            elapsed: Duration::ZERO,
        }
    }

    #[test]
    fn acr_arithmetic() {
        let abstain = outcome(Verdict::Abstain);
        assert_eq!(average_certified_radius([(&abstain, 0), (&abstain, 1)]).unwrap(), 0.0);

        let good = outcome(Verdict::Certified { class: 1, radius: 0.5 });
        assert_eq!(average_certified_radius([(&good, 1), (&abstain, 1)]).unwrap(), 0.25);
        assert_eq!(average_certified_radius([(&good, 0)]).unwrap(), 0.0);
        assert!(average_certified_radius(std::iter::empty()).is_err());
    }

    #[test]
    fn ties_go_to_lowest_class() {
        assert_eq!(top_class(&[3, 5, 5, 1]), 1);
        assert_eq!(top_class(&[0, 0]), 0);
    }

    #[test]
    fn single_sample_always_abstains() {
        let f = Classifier::threshold(0.0, 1).unwrap();
        let params = CertifyParams {
            sigma: 1.0,
            n0: 1,
            n: 1,
            alpha: 0.001,
            master_seed: 5,
        };
        let (out, record) = certify(&f, &[10.0], &params).unwrap();
        assert_eq!(out.verdict, Verdict::Abstain);
        assert!((out.p_lower - 0.001).abs() < 1e-15);
        assert!(record.p_lower.is_none());
    }

    #[test]
    fn invalid_params() {
        let f = Classifier::threshold(0.0, 1).unwrap();
        let mut params = CertifyParams {
            sigma: 1.0,
            n0: 10,
            n: 10,
            alpha: 0.001,
            master_seed: 0,
        };
        params.n = 0;
        assert!(certify(&f, &[0.0], &params).is_err());
        params.n = 10;
        params.alpha = 0.7;
        assert!(certify(&f, &[0.0], &params).is_err());
        params.alpha = 0.001;
        assert!(certify(&f, &[0.0, 1.0], &params).is_err());
    }
}
