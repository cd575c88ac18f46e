//! Randomized-smoothing robustness certification with incremental
//! recertification of approximated classifiers.
//!
//! [`certify::certify`] certifies a smoothed classifier from scratch and
//! emits a [`cache::CacheRecord`]. [`irs::certify_irs`] later recertifies a
//! modified classifier from that record at a fraction of the sample cost.

pub mod cache;
pub mod certify;
pub mod classifier;
pub mod error;
pub mod harness;
pub mod irs;
pub mod noise;
pub mod planner;
pub mod stats;

pub use cache::{CacheHeader, CacheRecord};
pub use certify::{average_certified_radius, certify, CertificationOutcome, CertifyParams, Verdict};
pub use classifier::{ClassIndex, Classifier};
pub use error::{Error, Result};
pub use irs::{certify_irs, estimate_zeta, irs_radius, IrsOutcome, IrsParams, ZetaEstimate};
pub use noise::{derive_seed_list, sample_noise, NoiseSpec, SeedList};
