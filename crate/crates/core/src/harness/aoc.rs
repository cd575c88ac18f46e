use serde::{Deserialize, Serialize};

use super::experiment::ComparisonRow;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AocSpeedup {
    /// Baseline area over IRS area; above 1 means IRS is faster.
    Speedup { value: f64 },
    /// The two ACR ranges do not overlap, so no common interval exists.
    Incomparable,
}

impl AocSpeedup {
    pub fn value(self) -> Option<f64> {
        match self {
            AocSpeedup::Speedup { value } => Some(value),
            AocSpeedup::Incomparable => None,
        }
    }
}

/// (acr, time) points sorted by acr; duplicate acr values are averaged.
fn curve(points: impl Iterator<Item = (f64, f64)>) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = points.collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64, usize)> = Vec::with_capacity(pts.len());
    for (x, y) in pts {
        match out.last_mut() {
            Some(last) if last.0 == x => {
                last.1 += y;
                last.2 += 1;
            }
            _ => out.push((x, y, 1)),
        }
    }
    out.into_iter().map(|(x, y, c)| (x, y / c as f64)).collect()
}

fn interpolate(c: &[(f64, f64)], x: f64) -> f64 {
    let i = c.partition_point(|p| p.0 < x);
    if i == 0 {
        return c[0].1;
    }
    if i == c.len() {
        return c[c.len() - 1].1;
    }
    let (x0, y0) = c[i - 1];
    let (x1, y1) = c[i];
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// Area under the piecewise-linear curve on [lo, hi].
fn area(c: &[(f64, f64)], lo: f64, hi: f64) -> f64 {
    let mut xs = vec![lo];
    xs.extend(c.iter().map(|p| p.0).filter(|&x| x > lo && x < hi));
    xs.push(hi);
    xs.windows(2)
        .map(|w| 0.5 * (interpolate(c, w[0]) + interpolate(c, w[1])) * (w[1] - w[0]))
        .sum()
}

/// Ratio of areas under the time-versus-ACR curves of the baseline and IRS,
/// over the ACR interval both curves cover.
pub fn aoc_speedup(rows: &[ComparisonRow]) -> Result<AocSpeedup> {
    if rows.len() < 2 {
        return Err(Error::domain("area-over-curve needs at least two sweep rows"));
    }
    let base = curve(rows.iter().map(|r| (r.acr_baseline, r.mean_secs_baseline)));
    let irs = curve(rows.iter().map(|r| (r.acr_irs, r.mean_secs_irs)));
    let lo = base[0].0.max(irs[0].0);
    let hi = base[base.len() - 1].0.min(irs[irs.len() - 1].0);
    if !(hi > lo) {
        return Ok(AocSpeedup::Incomparable);
    }
    let irs_area = area(&irs, lo, hi);
    if irs_area <= 0.0 {
        return Err(Error::domain("IRS curve has zero area"));
    }
    Ok(AocSpeedup::Speedup {
        value: area(&base, lo, hi) / irs_area,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(acr_b: f64, t_b: f64, acr_i: f64, t_i: f64) -> ComparisonRow {
        ComparisonRow {
            n_p: 0,
            acr_baseline: acr_b,
            acr_irs: acr_i,
            mean_secs_baseline: t_b,
            mean_secs_irs: t_i,
            certified_baseline: 0.0,
            certified_irs: 0.0,
            irs_greater: 0,
            irs_equal: 0,
            irs_less: 0,
            fallbacks: 0,
            failures: 0,
        }
    }

    #[test]
    fn identical_curves_give_one() {
        let rows = [row(0.1, 1.0, 0.1, 1.0), row(0.3, 2.0, 0.3, 2.0), row(0.5, 5.0, 0.5, 5.0)];
        assert!((aoc_speedup(&rows).unwrap().value().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn doubled_baseline_gives_two() {
        let rows = [row(0.1, 2.0, 0.1, 1.0), row(0.4, 6.0, 0.4, 3.0)];
        assert!((aoc_speedup(&rows).unwrap().value().unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn common_range_only() {
        // baseline covers [0, 1] with constant time 4, IRS covers [0.5, 2] with constant time 1
        let rows = [row(0.0, 4.0, 0.5, 1.0), row(1.0, 4.0, 2.0, 1.0)];
        assert!((aoc_speedup(&rows).unwrap().value().unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn disjoint_ranges_are_incomparable() {
        let rows = [row(0.1, 1.0, 0.5, 1.0), row(0.2, 2.0, 0.6, 2.0)];
        assert_eq!(aoc_speedup(&rows).unwrap(), AocSpeedup::Incomparable);
        assert!(aoc_speedup(&rows[..1]).is_err());
    }
}
