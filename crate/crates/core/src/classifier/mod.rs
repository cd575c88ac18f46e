//! Base classifiers `f : R^m -> labels`.
//!
//! Analytic kinds are evaluated in-process and expose closed-form smoothed
//! probabilities; the external kind forwards batches over the wire protocol.

mod analytic;
pub mod external;
pub mod wire;

pub use analytic::{LinearMulticlass, Orientation, Table, Threshold1D};
pub use external::{Endpoint, ExternalClassifier};

use analytic::interval_mass;

use crate::error::{Error, Result};

pub type ClassIndex = u16;

#[derive(Debug)]
pub enum Classifier {
    Threshold1D(Threshold1D),
    LinearMulticlass(LinearMulticlass),
    Table(Table),
    External(ExternalClassifier),
}

impl Classifier {
    pub fn threshold(threshold: f64, dim: usize) -> Result<Self> {
        Ok(Classifier::Threshold1D(Threshold1D::new(
            threshold,
            Orientation::Ascending,
            dim,
        )?))
    }

    pub fn dim(&self) -> usize {
        match self {
            Classifier::Threshold1D(t) => t.dim,
            Classifier::LinearMulticlass(l) => l.dim(),
            Classifier::Table(t) => t.dim(),
            Classifier::External(e) => e.dim(),
        }
    }

    pub fn label_count(&self) -> usize {
        match self {
            Classifier::Threshold1D(_) => 2,
            Classifier::LinearMulticlass(l) => l.label_count(),
            Classifier::Table(t) => t.label_count,
            Classifier::External(e) => e.label_count(),
        }
    }

    /// A stable description recorded in cache headers.
    pub fn identity(&self) -> String {
        match self {
            Classifier::Threshold1D(t) => format!(
                "threshold1d(t={:?},{:?},dim={})",
                t.threshold, t.orientation, t.dim
            ),
            Classifier::LinearMulticlass(l) => {
                format!("linear(classes={},dim={})", l.label_count(), l.dim())
            }
            Classifier::Table(t) => format!("table(points={},dim={})", t.points.len(), t.dim()),
            Classifier::External(e) => format!("external({})", e.model()),
        }
    }

    /// Classifies `rows`, a row-major batch of `dim`-vectors, appending one
    /// label per row to `out` in order.
    pub fn predict_into(&self, rows: &[f64], dim: usize, out: &mut Vec<ClassIndex>) -> Result<()> {
        if dim != self.dim() || !rows.len().is_multiple_of(dim) {
            return Err(Error::domain(format!(
                "batch of {} values with dim {dim} does not fit classifier dim {}",
                rows.len(),
                self.dim()
            )));
        }
        match self {
            Classifier::Threshold1D(t) => out.extend(rows.chunks_exact(dim).map(|r| t.classify(r))),
            Classifier::LinearMulticlass(l) => {
                out.extend(rows.chunks_exact(dim).map(|r| l.classify(r)))
            }
            Classifier::Table(t) => out.extend(rows.chunks_exact(dim).map(|r| t.classify(r))),
            Classifier::External(e) => e.predict(rows, out)?,
        }
        Ok(())
    }

    pub fn predict_batch(&self, rows: &[f64], dim: usize) -> Result<Vec<ClassIndex>> {
        let mut out = Vec::with_capacity(rows.len() / dim.max(1));
        self.predict_into(rows, dim, &mut out)?;
        Ok(out)
    }

    /// P(f(x + ε) = class) for ε ~ N(0, σ²I), where a closed form exists.
    pub fn exact_smoothed_probability(&self, x: &[f64], sigma: f64, class: ClassIndex) -> Result<f64> {
        if !(sigma > 0.0) {
            return Err(Error::domain(format!("sigma must be positive, got {sigma}")));
        }
        if x.len() != self.dim() {
            return Err(Error::domain("input dimension mismatch"));
        }
        if class as usize >= self.label_count() {
            return Err(Error::domain(format!("class {class} out of range")));
        }
        let p1 = match self {
            Classifier::Threshold1D(t) => t.smoothed_class_one(x[0], sigma),
            Classifier::LinearMulticlass(l) => l.smoothed_class_one(x, sigma)?,
            Classifier::Table(_) => {
                return Err(Error::UnsupportedOracle("table classifier".into()))
            }
            Classifier::External(_) => {
                return Err(Error::UnsupportedOracle("external classifier".into()))
            }
        };
        Ok(if class == 1 { p1 } else { 1.0 - p1 })
    }

    /// Most probable class of the smoothed classifier, when exactly computable.
    pub fn exact_smoothed_prediction(&self, x: &[f64], sigma: f64) -> Result<ClassIndex> {
        let p1 = self.exact_smoothed_probability(x, sigma, 1)?;
        Ok(if p1 > 0.5 { 1 } else { 0 })
    }
}

/// P(f(x + ε) ≠ f'(x + ε)) for a pair of threshold classifiers.
pub fn exact_disagreement_probability(
    original: &Classifier,
    approx: &Classifier,
    x: &[f64],
    sigma: f64,
) -> Result<f64> {
    let (Classifier::Threshold1D(a), Classifier::Threshold1D(b)) = (original, approx) else {
        return Err(Error::UnsupportedOracle(
            "disagreement is only closed-form for threshold pairs".into(),
        ));
    };
    if !(sigma > 0.0) {
        return Err(Error::domain(format!("sigma must be positive, got {sigma}")));
    }
    if x.is_empty() {
        return Err(Error::domain("empty input"));
    }
    let lo = a.threshold.min(b.threshold);
    let hi = a.threshold.max(b.threshold);
    let between = interval_mass(lo, hi, x[0], sigma);
    Ok(if a.orientation == b.orientation {
        between
    } else {
        1.0 - between
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_sign_classifier() {
        let f = Classifier::threshold(0.0, 1).unwrap();
        assert_eq!(f.predict_batch(&[-1.0, 1.0], 1).unwrap(), vec![0, 1]);
    }

    #[test]
    fn linear_identity_picks_coordinate() {
        let k = 4;
        let w: Vec<Vec<f64>> = (0..k)
            .map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let f = Classifier::LinearMulticlass(LinearMulticlass::new(w, vec![0.0; k]).unwrap());
        for c in 0..k {
            let mut e = vec![0.0; k];
            e[c] = 1.0;
            assert_eq!(f.predict_batch(&e, k).unwrap(), vec![c as ClassIndex]);
        }
    }

    #[test]
    fn table_returns_stored_labels() {
        let points: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64, 0.0]).collect();
        let labels = vec![2, 0, 1, 1, 2];
        let f = Classifier::Table(Table::new(points.clone(), labels.clone(), 3).unwrap());
        let flat: Vec<f64> = points.concat();
        assert_eq!(f.predict_batch(&flat, 2).unwrap(), labels);
    }

    #[test]
    fn dimension_mismatch() {
        let f = Classifier::threshold(0.0, 3).unwrap();
        assert!(matches!(f.predict_batch(&[0.0, 1.0], 2), Err(Error::Domain(_))));
    }

    #[test]
    fn smoothed_threshold_probabilities() {
        let f = Classifier::threshold(0.0, 1).unwrap();
        assert_eq!(f.exact_smoothed_probability(&[0.0], 0.7, 1).unwrap(), 0.5);
        let sigma = 0.25;
        let p = f.exact_smoothed_probability(&[sigma], sigma, 1).unwrap();
        assert!((p - 0.841_344_746_068_542_9).abs() < 1e-15);
        let q = f.exact_smoothed_probability(&[sigma], sigma, 0).unwrap();
        assert!((p + q - 1.0).abs() < 1e-15);
    }

    #[test]
    fn smoothed_linear_matches_threshold() {
        let lin = Classifier::LinearMulticlass(
            LinearMulticlass::new(vec![vec![0.0, 0.0], vec![2.0, 0.0]], vec![0.0, -1.0]).unwrap(),
        );
        // class 1 iff 2 x0 - 1 > 0, i.e. x0 > 0.5
        let thr = Classifier::threshold(0.5, 2).unwrap();
        for &x0 in &[-1.0, 0.2, 0.5, 1.3] {
            let a = lin.exact_smoothed_probability(&[x0, 9.0], 0.6, 1).unwrap();
            let b = thr.exact_smoothed_probability(&[x0, 9.0], 0.6, 1).unwrap();
            assert!((a - b).abs() < 1e-15);
        }
        let three = Classifier::LinearMulticlass(
            LinearMulticlass::new(vec![vec![1.0]; 3], vec![0.0; 3]).unwrap(),
        );
        assert!(matches!(
            three.exact_smoothed_probability(&[0.0], 1.0, 0),
            Err(Error::UnsupportedOracle(_))
        ));
    }

    #[test]
    fn disagreement_oracle() {
        let f = Classifier::threshold(0.0, 1).unwrap();
        let same = Classifier::threshold(0.0, 1).unwrap();
        assert_eq!(exact_disagreement_probability(&f, &same, &[0.3], 1.0).unwrap(), 0.0);

        let shifted = Classifier::threshold(0.1, 1).unwrap();
        let d = exact_disagreement_probability(&f, &shifted, &[0.0], 1.0).unwrap();
        assert!((d - 0.039_827_837_277_028_98).abs() < 1e-15);

        // far left of both thresholds: almost no mass between them
        let wide = Classifier::threshold(-1e6, 1).unwrap();
        let d = exact_disagreement_probability(&wide, &shifted, &[-3.0], 1.0).unwrap();
        let limit = crate::stats::normal_cdf(3.1);
        assert!((d - limit).abs() < 1e-15);

        let flipped = Classifier::Threshold1D(
            Threshold1D::new(0.0, Orientation::Descending, 1).unwrap(),
        );
        assert_eq!(exact_disagreement_probability(&f, &flipped, &[0.0], 1.0).unwrap(), 1.0);
    }
}
