//! Classifiers whose smoothed behaviour is known in closed form.

use serde::{Deserialize, Serialize};

use super::ClassIndex;
use crate::error::{Error, Result};
use crate::stats::normal_cdf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    /// `x[0] >= t` is class 1.
    #[default]
    Ascending,
    /// `x[0] >= t` is class 0.
    Descending,
}

impl Orientation {
    pub fn flipped(self) -> Self {
        match self {
            Orientation::Ascending => Orientation::Descending,
            Orientation::Descending => Orientation::Ascending,
        }
    }
}

/// Two-class threshold on the first coordinate. Remaining coordinates are
/// ignored, which lets benchmarks pay realistic per-sample noise costs while
/// keeping exact probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Threshold1D {
    pub threshold: f64,
    #[serde(default)]
    pub orientation: Orientation,
    #[serde(default = "one")]
    pub dim: usize,
}

fn one() -> usize {
    1
}

impl Threshold1D {
    pub fn new(threshold: f64, orientation: Orientation, dim: usize) -> Result<Self> {
        if threshold.is_nan() {
            return Err(Error::domain("threshold must not be NaN"));
        }
        if dim == 0 {
            return Err(Error::domain("threshold classifier needs dim >= 1"));
        }
        Ok(Self {
            threshold,
            orientation,
            dim,
        })
    }

    #[inline]
    pub fn classify(&self, x: &[f64]) -> ClassIndex {
        let above = x[0] >= self.threshold;
        match (self.orientation, above) {
            (Orientation::Ascending, true) | (Orientation::Descending, false) => 1,
            _ => 0,
        }
    }

    /// P(f(x + ε) = 1) for ε ~ N(0, σ²I).
    pub fn smoothed_class_one(&self, x0: f64, sigma: f64) -> f64 {
        match self.orientation {
            Orientation::Ascending => normal_cdf((x0 - self.threshold) / sigma),
            Orientation::Descending => normal_cdf((self.threshold - x0) / sigma),
        }
    }
}

/// Gaussian mass of `[lo, hi)` around `centre` with scale `sigma`.
pub(crate) fn interval_mass(lo: f64, hi: f64, centre: f64, sigma: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let a = (lo - centre) / sigma;
    let b = (hi - centre) / sigma;
    // Work in whichever tail keeps the difference well conditioned.
    if a > 0.0 {
        normal_cdf(-a) - normal_cdf(-b)
    } else {
        normal_cdf(b) - normal_cdf(a)
    }
}

/// Argmax of `W x + b`; ties go to the lowest class index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearMulticlass {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl LinearMulticlass {
    pub fn new(weights: Vec<Vec<f64>>, bias: Vec<f64>) -> Result<Self> {
        let classes = weights.len();
        if classes < 2 {
            return Err(Error::domain("linear classifier needs at least two classes"));
        }
        if classes > ClassIndex::MAX as usize + 1 {
            return Err(Error::domain("too many classes for a u16 label"));
        }
        if bias.len() != classes {
            return Err(Error::domain(format!(
                "bias has {} entries for {classes} classes",
                bias.len()
            )));
        }
        let dim = weights[0].len();
        if dim == 0 || weights.iter().any(|row| row.len() != dim) {
            return Err(Error::domain("weight rows must share a nonzero dimension"));
        }
        Ok(Self { weights, bias })
    }

    pub fn dim(&self) -> usize {
        self.weights[0].len()
    }

    pub fn label_count(&self) -> usize {
        self.weights.len()
    }

    #[inline]
    pub fn classify(&self, x: &[f64]) -> ClassIndex {
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (c, (row, b)) in self.weights.iter().zip(&self.bias).enumerate() {
            let score = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b;
            if score > best_score {
                best = c;
                best_score = score;
            }
        }
        best as ClassIndex
    }

    /// P(class 1) for a two-class model: the smoothed margin is Gaussian.
    pub(crate) fn smoothed_class_one(&self, x: &[f64], sigma: f64) -> Result<f64> {
        if self.label_count() != 2 {
            return Err(Error::UnsupportedOracle(format!(
                "linear classifier with {} classes",
                self.label_count()
            )));
        }
        let diff: Vec<f64> = self.weights[1]
            .iter()
            .zip(&self.weights[0])
            .map(|(a, b)| a - b)
            .collect();
        let offset = self.bias[1] - self.bias[0];
        let margin = diff.iter().zip(x).map(|(d, v)| d * v).sum::<f64>() + offset;
        let norm = diff.iter().map(|d| d * d).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Ok(if offset > 0.0 { 1.0 } else { 0.0 });
        }
        Ok(normal_cdf(margin / (sigma * norm)))
    }
}

/// Nearest-neighbour lookup over stored points; ties go to the earliest entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<ClassIndex>,
    pub label_count: usize,
}

impl Table {
    pub fn new(points: Vec<Vec<f64>>, labels: Vec<ClassIndex>, label_count: usize) -> Result<Self> {
        if points.is_empty() || points.len() != labels.len() {
            return Err(Error::domain("table needs one label per stored point"));
        }
        let dim = points[0].len();
        if dim == 0 || points.iter().any(|p| p.len() != dim) {
            return Err(Error::domain("table points must share a nonzero dimension"));
        }
        if label_count < 2 || labels.iter().any(|&l| l as usize >= label_count) {
            return Err(Error::domain("table labels out of range"));
        }
        Ok(Self {
            points,
            labels,
            label_count,
        })
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn classify(&self, x: &[f64]) -> ClassIndex {
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d: f64 = p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best_dist {
                best = i;
                best_dist = d;
            }
        }
        self.labels[best]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_mass_is_symmetric_and_stable() {
        let left = interval_mass(-2.0, -1.0, 0.0, 1.0);
        let right = interval_mass(1.0, 2.0, 0.0, 1.0);
        assert!((left - right).abs() < 1e-16);
        // deep right tail, where the naive difference cancels
        let tail = interval_mass(9.0, 10.0, 0.0, 1.0);
        assert!(tail > 0.0 && tail < 1.2e-19);
    }

    #[test]
    fn linear_ties_go_low() {
        let lin = LinearMulticlass::new(vec![vec![1.0], vec![1.0]], vec![0.0, 0.0]).unwrap();
        assert_eq!(lin.classify(&[3.0]), 0);
    }
}
