//! Independent numeric oracles. None of these share code paths with the
//! library: binomial tails are summed term by term, Φ uses a power series
//! or continued fraction, and every inverse is plain bisection.

#![allow(dead_code)]

/// ln of each binomial pmf term P(X = j), j = 0..=n.
fn ln_pmf_terms(n: u64, p: f64) -> Vec<f64> {
    let (lp, lq) = (p.ln(), (1.0 - p).ln());
    let mut ln_choose = 0.0;
    (0..=n)
        .map(|j| {
            if j > 0 {
                ln_choose += ((n - j + 1) as f64).ln() - (j as f64).ln();
            }
            let a = if j == 0 { 0.0 } else { j as f64 * lp };
            let b = if j == n { 0.0 } else { (n - j) as f64 * lq };
            ln_choose + a + b
        })
        .collect()
}

/// P(X ≥ k), X ~ Bin(n, p).
pub fn binom_upper_tail(k: u64, n: u64, p: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    ln_pmf_terms(n, p)[k as usize..].iter().map(|t| t.exp()).sum()
}

/// P(X ≤ k), X ~ Bin(n, p).
pub fn binom_lower_tail(k: u64, n: u64, p: f64) -> f64 {
    if k >= n {
        return 1.0;
    }
    if p <= 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return 0.0;
    }
    ln_pmf_terms(n, p)[..=k as usize].iter().map(|t| t.exp()).sum()
}

pub fn binom_pmf(j: u64, n: u64, p: f64) -> f64 {
    if p <= 0.0 {
        return if j == 0 { 1.0 } else { 0.0 };
    }
    if p >= 1.0 {
        return if j == n { 1.0 } else { 0.0 };
    }
    ln_pmf_terms(n, p)[j as usize].exp()
}

fn bisect(mut lo: f64, mut hi: f64, increasing: bool, f: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == increasing {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// One-sided Clopper-Pearson lower bound: P(X ≥ k | L) = α.
pub fn cp_lower(k: u64, n: u64, alpha: f64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    bisect(0.0, 1.0, true, |p| binom_upper_tail(k, n, p) - alpha)
}

/// One-sided Clopper-Pearson upper bound: P(X ≤ k | U) = α.
pub fn cp_upper(k: u64, n: u64, alpha: f64) -> f64 {
    if k == n {
        return 1.0;
    }
    bisect(0.0, 1.0, false, |p| binom_lower_tail(k, n, p) - alpha)
}

/// Φ(x): Taylor series of erf near zero, Lentz continued fraction in the tails.
pub fn phi(x: f64) -> f64 {
    if x.abs() < 3.0 {
        // Φ(x) = 1/2 + φ(x) Σ x^(2m+1) / (1·3·…·(2m+1))
        let mut term = x;
        let mut sum = x;
        let mut m = 0.0;
        while term.abs() > 1e-18 * sum.abs().max(1e-300) {
            m += 1.0;
            term *= x * x / (2.0 * m + 1.0);
            sum += term;
        }
        0.5 + sum * (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
    } else {
        // Mills ratio continued fraction for the tail beyond |x|
        let z = x.abs();
        let mut f = z;
        for k in (1..200).rev() {
            f = z + k as f64 / f;
        }
        let tail = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt() / f;
        if x > 0.0 {
            1.0 - tail
        } else {
            tail
        }
    }
}

pub fn phi_inv(p: f64) -> f64 {
    bisect(-40.0, 40.0, true, |x| phi(x) - p)
}

/// I_x(a, b) by the power series of x^a (1-x)^b / (a B(a,b)), valid for the
/// small x used in tests.
pub fn incbeta_series(x: f64, a: f64, b: f64) -> f64 {
    let ln_beta = ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
    let front = (a * x.ln() + b * (1.0 - x).ln() - ln_beta).exp() / a;
    // I_x(a,b) = front · Σ_j [B(a+1, j+1) / B(a+b, j+1)] x^j
    let mut term = 1.0;
    let mut sum = 1.0;
    for j in 0..10_000 {
        let j = j as f64;
        term *= (a + b + j) / (a + 1.0 + j) * x;
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    front * sum
}

/// Lanczos (g = 7, n = 9) log-gamma for positive arguments.
pub fn ln_gamma(x: f64) -> f64 {
    const G: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return (std::f64::consts::PI / (std::f64::consts::PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = G[0];
    let t = x + 7.5;
    for (i, g) in G.iter().enumerate().skip(1) {
        a += g / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}
