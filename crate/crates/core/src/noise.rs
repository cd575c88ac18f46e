//! Seed-addressable Gaussian noise.
//!
//! Every sample has its own 64-bit seed. Coordinate `j` of the sample with
//! seed `s` is a pure function of `(s, j)`: a SplitMix64 finalizer turns the
//! counter into 53 uniform bits, and the inverse normal CDF maps those to a
//! standard normal deviate. Nothing depends on stream position, so any
//! subset of cached samples can be regenerated independently.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::inverse_normal_cdf_unchecked;

/// Identifier of the only generator this crate implements. Recorded in
/// every cache header; a mismatch on reload is fatal.
pub const GENERATOR_ID: &str = "splitmix64-invcdf/v1";

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const NOISE_DOMAIN: u64 = 0xD1B5_4A32_D192_ED03;

#[inline]
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The `index`-th output of a SplitMix64 stream started at `state`.
#[inline]
fn counter_output(state: u64, index: u64) -> u64 {
    mix64(state.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// Maps 64 random bits to a uniform in the open interval (0, 1).
#[inline]
fn open_unit(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Derives an independent sub-stream master from `master` and a domain tag.
pub fn split_seed(master: u64, domain: u64) -> u64 {
    mix64(master ^ mix64(domain.wrapping_add(GOLDEN_GAMMA)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    sigma: f64,
    dim: usize,
    generator_id: String,
}

impl NoiseSpec {
    pub fn new(sigma: f64, dim: usize) -> Result<Self> {
        Self::with_generator(sigma, dim, GENERATOR_ID)
    }

    pub fn with_generator(sigma: f64, dim: usize, generator_id: &str) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::domain(format!("sigma must be positive, got {sigma}")));
        }
        if dim == 0 {
            return Err(Error::domain("noise dimension must be at least 1"));
        }
        if generator_id.is_empty() {
            return Err(Error::domain("generator id must be nonempty"));
        }
        Ok(Self {
            sigma,
            dim,
            generator_id: generator_id.to_owned(),
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn generator_id(&self) -> &str {
        &self.generator_id
    }

    fn check_generator(&self) -> Result<()> {
        if self.generator_id != GENERATOR_ID {
            return Err(Error::UnsupportedGenerator(self.generator_id.clone()));
        }
        Ok(())
    }
}

/// Draws one noise vector of `spec.dim()` entries, each σ·N(0, 1).
pub fn sample_noise(spec: &NoiseSpec, seed: u64) -> Result<Vec<f64>> {
    let mut out = vec![0.0; spec.dim];
    fill_noise(spec, seed, &mut out)?;
    Ok(out)
}

/// Writes `base + noise(seed)` into `out`. `base` and `out` have length `dim`.
pub(crate) fn perturb_into(spec: &NoiseSpec, seed: u64, base: &[f64], out: &mut [f64]) {
    debug_assert_eq!(base.len(), spec.dim);
    debug_assert_eq!(out.len(), spec.dim);
    let state = seed ^ NOISE_DOMAIN;
    for (j, (o, &b)) in out.iter_mut().zip(base).enumerate() {
        let z = inverse_normal_cdf_unchecked(open_unit(counter_output(state, j as u64)));
        *o = b + spec.sigma * z;
    }
}

/// Fills `out` with a noise vector. `out.len()` must equal `spec.dim()`.
pub fn fill_noise(spec: &NoiseSpec, seed: u64, out: &mut [f64]) -> Result<()> {
    spec.check_generator()?;
    if out.len() != spec.dim {
        return Err(Error::domain(format!(
            "noise buffer has length {}, expected {}",
            out.len(),
            spec.dim
        )));
    }
    let state = seed ^ NOISE_DOMAIN;
    for (j, o) in out.iter_mut().enumerate() {
        let z = inverse_normal_cdf_unchecked(open_unit(counter_output(state, j as u64)));
        *o = spec.sigma * z;
    }
    Ok(())
}

/// Per-sample seeds, in sample order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SeedList(Vec<u64>);

impl SeedList {
    pub fn as_slice(&self) -> &[u64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<u64> {
        self.0
    }
}

impl From<Vec<u64>> for SeedList {
    fn from(v: Vec<u64>) -> Self {
        SeedList(v)
    }
}

/// Expands `master_seed` into `count` per-sample seeds. A shorter list is
/// always a prefix of a longer one.
pub fn derive_seed_list(master_seed: u64, count: usize) -> Result<SeedList> {
    if count == 0 {
        return Err(Error::domain("seed list count must be at least 1"));
    }
    Ok(SeedList(
        (0..count as u64)
            .map(|i| counter_output(master_seed, i))
            .collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_seed_identical_bits() {
        let spec = NoiseSpec::new(0.5, 33).unwrap();
        let a = sample_noise(&spec, 99).unwrap();
        let b = sample_noise(&spec, 99).unwrap();
        assert_eq!(
            a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        assert_ne!(a, sample_noise(&spec, 100).unwrap());
    }

    #[test]
    fn sigma_scales_linearly() {
        let one = sample_noise(&NoiseSpec::new(1.0, 64).unwrap(), 7).unwrap();
        let two = sample_noise(&NoiseSpec::new(2.0, 64).unwrap(), 7).unwrap();
        for (a, b) in one.iter().zip(&two) {
            assert_eq!(*b, 2.0 * a);
        }
    }

    #[test]
    fn perturb_matches_fill() {
        let spec = NoiseSpec::new(0.25, 5).unwrap();
        let base = [1.0, -2.0, 0.5, 0.0, 3.0];
        let mut out = [0.0; 5];
        perturb_into(&spec, 1234, &base, &mut out);
        let noise = sample_noise(&spec, 1234).unwrap();
        for j in 0..5 {
            assert_eq!(out[j], base[j] + noise[j]);
        }
    }

    #[test]
    fn moments_of_pooled_entries() {
        let spec = NoiseSpec::new(1.0, 1000).unwrap();
        let seeds = derive_seed_list(2024, 1000).unwrap();
        let (mut sum, mut sq, mut count) = (0.0, 0.0, 0.0);
        for &s in seeds.as_slice() {
            for v in sample_noise(&spec, s).unwrap() {
                sum += v;
                sq += v * v;
                count += 1.0;
            }
        }
        let mean = sum / count;
        let var = sq / count - mean * mean;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.01, "var {var}");
    }

    #[test]
    fn seed_list_prefix_and_determinism() {
        let five = derive_seed_list(17, 5).unwrap();
        let ten = derive_seed_list(17, 10).unwrap();
        assert_eq!(five.as_slice(), &ten.as_slice()[..5]);
        assert_eq!(ten, derive_seed_list(17, 10).unwrap());
        assert!(derive_seed_list(17, 0).is_err());
    }

    #[test]
    fn unknown_generator_is_rejected() {
        let spec = NoiseSpec::with_generator(1.0, 3, "mt19937/v0").unwrap();
        assert!(matches!(
            sample_noise(&spec, 1),
            Err(Error::UnsupportedGenerator(_))
        ));
    }

    #[test]
    fn invalid_spec() {
        assert!(NoiseSpec::new(0.0, 3).is_err());
        assert!(NoiseSpec::new(1.0, 0).is_err());
        assert!(NoiseSpec::with_generator(1.0, 3, "").is_err());
    }
}
