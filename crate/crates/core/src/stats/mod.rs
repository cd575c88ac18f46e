//! Binomial confidence bounds and the normal/beta numerics behind them.

mod beta;
mod bounds;
mod normal;

pub use beta::{beta_quantile, regularized_incomplete_beta, QUANTILE_MAX_ITER, QUANTILE_TOL};
pub use bounds::{
    lower_confidence_bound, upper_confidence_bound, BinomialSample, BoundMethod,
    ConfidenceBoundSpec,
};
pub use normal::{inverse_normal_cdf, normal_cdf, normal_pdf};

pub(crate) use normal::inverse_normal_cdf_unchecked;
