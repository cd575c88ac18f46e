//! Regularized incomplete beta function and its quantile.

use crate::error::{Error, Result};

/// Iteration cap for the quantile solver.
pub const QUANTILE_MAX_ITER: usize = 200;
/// Absolute tolerance on the returned quantile.
pub const QUANTILE_TOL: f64 = 1e-10;

const CF_MAX_ITER: usize = 50_000;
const CF_EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;

pub(crate) fn ln_beta(a: f64, b: f64) -> f64 {
    libm::lgamma(a) + libm::lgamma(b) - libm::lgamma(a + b)
}

/// Regularized incomplete beta I_x(a, b).
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> Result<f64> {
    check_shape(a, b)?;
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain(format!("incomplete beta needs x in [0, 1], got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    // Continued fraction converges quickly only left of the mode; reflect otherwise.
    if x > (a + 1.0) / (a + b + 2.0) {
        Ok(1.0 - incbeta_cf(1.0 - x, b, a)?)
    } else {
        incbeta_cf(x, a, b)
    }
}

/// x^a (1-x)^b / (a B(a,b)) times the Lentz continued fraction.
fn incbeta_cf(x: f64, a: f64, b: f64) -> Result<f64> {
    let ln_front = a * libm::log(x) + b * libm::log1p(-x) - ln_beta(a, b) - libm::log(a);
    let front = libm::exp(ln_front);
    if front == 0.0 {
        return Ok(0.0);
    }

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;

        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;

        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_EPS {
            return Ok(front * h);
        }
    }
    Err(Error::Numerics(format!(
        "incomplete beta continued fraction did not converge (x={x}, a={a}, b={b})"
    )))
}

fn beta_pdf(x: f64, a: f64, b: f64) -> f64 {
    libm::exp((a - 1.0) * libm::log(x) + (b - 1.0) * libm::log1p(-x) - ln_beta(a, b))
}

fn check_shape(a: f64, b: f64) -> Result<()> {
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::domain(format!(
            "beta shape parameters must be positive and finite, got a={a}, b={b}"
        )));
    }
    Ok(())
}

/// Quantile of Beta(a, b): the x with I_x(a, b) = q.
///
/// Safeguarded Newton on a shrinking bracket. Falls back to bisection
/// whenever the Newton step leaves the bracket.
pub fn beta_quantile(q: f64, a: f64, b: f64) -> Result<f64> {
    check_shape(a, b)?;
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::domain(format!("beta quantile needs q in (0, 1), got {q}")));
    }

    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut x = a / (a + b);
    for _ in 0..QUANTILE_MAX_ITER {
        let f = regularized_incomplete_beta(x, a, b)? - q;
        if f == 0.0 {
            return Ok(x);
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= QUANTILE_TOL * 1e-2 {
            return Ok(0.5 * (lo + hi));
        }

        let pdf = beta_pdf(x, a, b);
        let newton = x - f / pdf;
        let next = if pdf.is_finite() && pdf > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() <= QUANTILE_TOL * 1e-3 {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::Numerics(format!(
        "beta quantile exceeded {QUANTILE_MAX_ITER} iterations (q={q}, a={a}, b={b})"
    )))
}
