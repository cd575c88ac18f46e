//! Fixtures shared by the benchmarks.

use recert::classifier::{Orientation, Threshold1D};
use recert::{certify, CacheRecord, CertifyParams, Classifier};

pub struct Fixture {
    pub original: Classifier,
    pub approximated: Classifier,
    pub x: Vec<f64>,
    pub record: CacheRecord,
}

/// A certified input of dimension `dim` with a cached record of `n` samples,
/// and a slightly shifted copy of the classifier.
pub fn fixture(dim: usize, n: usize) -> Fixture {
    let original = Classifier::threshold(0.0, dim).expect("valid threshold");
    let approximated = Classifier::Threshold1D(
        Threshold1D::new(0.02, Orientation::Ascending, dim).expect("valid threshold"),
    );
    let mut x = vec![0.0; dim];
    x[0] = 0.84;
    let params = CertifyParams {
        sigma: 1.0,
        n0: 100,
        n,
        alpha: 0.001,
        master_seed: 1,
    };
    let (_, record) = certify(&original, &x, &params).expect("fixture certifies");
    Fixture {
        original,
        approximated,
        x,
        record,
    }
}
