mod common;

use recert::classifier::{exact_disagreement_probability, Classifier, Orientation, Threshold1D};
use recert::noise::{derive_seed_list, split_seed};
use recert::planner::{required_samples, ErrorMeasure, PlanQuery};
use recert::stats::{
    lower_confidence_bound, normal_cdf, upper_confidence_bound, BinomialSample,
    ConfidenceBoundSpec,
};
use recert::{certify, certify_irs, estimate_zeta, sample_noise, CertifyParams, IrsParams, NoiseSpec};

fn threshold(t: f64, dim: usize) -> Classifier {
    Classifier::Threshold1D(Threshold1D::new(t, Orientation::Ascending, dim).unwrap())
}

#[test]
fn noise_passes_kolmogorov_smirnov() {
    let spec = NoiseSpec::new(1.0, 8).unwrap();
    let mut xs: Vec<f64> = derive_seed_list(99, 2500)
        .unwrap()
        .as_slice()
        .iter()
        .flat_map(|&s| sample_noise(&spec, s).unwrap())
        .collect();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal_cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    // critical value at the 0.001 level
    assert!(d < 1.9495 / n.sqrt(), "KS statistic {d}");
}

#[test]
fn coordinates_are_uncorrelated() {
    let spec = NoiseSpec::new(1.0, 2).unwrap();
    let seeds = derive_seed_list(5, 100_000).unwrap();
    let mut sum = 0.0;
    for &s in seeds.as_slice() {
        let v = sample_noise(&spec, s).unwrap();
        sum += v[0] * v[1];
    }
    assert!((sum / 1e5).abs() < 4.0 / 1e5f64.sqrt());
}

#[test]
fn empirical_disagreement_matches_closed_form() {
    let (f, fp) = (threshold(0.0, 3), threshold(0.35, 3));
    let x = [0.4, -1.0, 2.0];
    let sigma = 0.75;
    let exact = exact_disagreement_probability(&f, &fp, &x, sigma).unwrap();
    let spec = NoiseSpec::new(sigma, 3).unwrap();
    let m = 50_000;
    let mut rows = Vec::with_capacity(m * 3);
    for &s in derive_seed_list(17, m).unwrap().as_slice() {
        let e = sample_noise(&spec, s).unwrap();
        rows.extend(x.iter().zip(&e).map(|(a, b)| a + b));
    }
    let a = f.predict_batch(&rows, 3).unwrap();
    let b = fp.predict_batch(&rows, 3).unwrap();
    let rate = a.iter().zip(&b).filter(|(p, q)| p != q).count() as f64 / m as f64;
    let se = (exact * (1.0 - exact) / m as f64).sqrt();
    assert!((rate - exact).abs() < 3.0 * se, "{rate} vs {exact}");
}

#[test]
fn certify_bound_is_sound_and_tight() {
    let f = threshold(0.0, 1);
    let p_true = normal_cdf(1.0);
    let mut over = 0;
    let mut slack = 0.0;
    for r in 0..300 {
        let params = CertifyParams {
            sigma: 1.0,
            n0: 100,
            n: 5000,
            alpha: 0.01,
            master_seed: split_seed(1, r),
        };
        let (o, _) = certify(&f, &[1.0], &params).unwrap();
        over += usize::from(o.p_lower > p_true);
        slack += p_true - o.p_lower;
    }
    assert!(over <= 9, "{over} of 300 above the true probability");
    // CP at n=5000 sits about z·sqrt(pq/n) ≈ 0.012 under the truth
    let mean = slack / 300.0;
    assert!(mean > 0.005 && mean < 0.02, "mean slack {mean}");
}

/// IRS on a pair where the reused bound certifies most of the time, so a
/// broken ζ would show up as bounds above the truth.
#[test]
fn irs_reuse_bound_is_sound() {
    let sigma = 1.0;
    let x0 = sigma * recert::stats::inverse_normal_cdf(0.8).unwrap();
    let f = threshold(0.0, 1);
    let fp = threshold(x0 - recert::stats::inverse_normal_cdf(0.76).unwrap(), 1);
    let truth = fp.exact_smoothed_probability(&[x0], sigma, 1).unwrap();
    assert!((truth - 0.76).abs() < 1e-12);
    let runs = 400;
    let (mut unsound, mut certified) = (0, 0);
    for r in 0..runs {
        let params = CertifyParams {
            sigma,
            n0: 100,
            n: 10_000,
            alpha: 0.01,
            master_seed: split_seed(2, r),
        };
        let (_, record) = certify(&f, &[x0], &params).unwrap();
        let irs = IrsParams {
            sigma,
            n_p: 1000,
            alpha: 0.01,
            alpha_zeta: 0.01,
            gamma: 0.99,
            fresh_seed: r,
        };
        let out = certify_irs(&fp, &[x0], &irs, &record).unwrap();
        certified += usize::from(out.outcome.is_certified());
        unsound += usize::from(out.outcome.p_lower > truth);
    }
    assert!(certified > runs as usize * 9 / 10);
    // allowed failure rate 0.02; 3σ slack
    let limit = runs as f64 * 0.02 + 3.0 * (runs as f64 * 0.02 * 0.98).sqrt();
    assert!((unsound as f64) <= limit, "{unsound} unsound of {runs}");
}

#[test]
fn irs_fresh_route_is_sound() {
    let sigma = 0.5;
    let x0 = 1.5;
    let f = threshold(0.0, 1);
    let fp = threshold(0.1, 1);
    let truth = fp.exact_smoothed_probability(&[x0], sigma, 1).unwrap();
    let mut unsound = 0;
    for r in 0..300 {
        let params = CertifyParams {
            sigma,
            n0: 100,
            n: 10_000,
            alpha: 0.01,
            master_seed: split_seed(3, r),
        };
        let (_, record) = certify(&f, &[x0], &params).unwrap();
        let irs = IrsParams {
            sigma,
            n_p: 2000,
            alpha: 0.01,
            alpha_zeta: 0.01,
            gamma: 0.99,
            fresh_seed: split_seed(4, r),
        };
        let out = certify_irs(&fp, &[x0], &irs, &record).unwrap();
        assert!(matches!(out.route, recert::irs::IrsRoute::Fresh));
        unsound += usize::from(out.outcome.p_lower > truth);
    }
    assert!(unsound <= 15, "{unsound} unsound of 300");
}

/// At n_p samples, bounding a small disagreement is far tighter than
/// bounding the top-class probability itself.
#[test]
fn disagreement_bound_is_cheaper_than_fresh_bound() {
    let f = threshold(0.0, 1);
    let fp = threshold(0.02, 1);
    let x = [0.84];
    let (_, record) = certify(
        &f,
        &x,
        &CertifyParams {
            sigma: 1.0,
            n0: 100,
            n: 10_000,
            alpha: 0.001,
            master_seed: 8,
        },
    )
    .unwrap();
    let irs = IrsParams {
        sigma: 1.0,
        n_p: 500,
        alpha: 0.001,
        alpha_zeta: 0.001,
        gamma: 0.99,
        fresh_seed: 9,
    };
    let zeta = estimate_zeta(&fp, &x, &irs, &record).unwrap();
    let reused = record.p_lower.unwrap() - zeta.zeta;
    let hits = fp
        .predict_batch(
            &derive_seed_list(10, 500)
                .unwrap()
                .as_slice()
                .iter()
                .map(|&s| x[0] + sample_noise(&NoiseSpec::new(1.0, 1).unwrap(), s).unwrap()[0])
                .collect::<Vec<_>>(),
            1,
        )
        .unwrap()
        .iter()
        .filter(|&&c| c == 1)
        .count() as u64;
    let fresh = lower_confidence_bound(
        BinomialSample::new(hits, 500).unwrap(),
        ConfidenceBoundSpec::clopper_pearson(0.002).unwrap(),
    )
    .unwrap();
    assert!(reused > fresh + 0.02, "reuse {reused} vs fresh {fresh}");

    let plan = |p| {
        required_samples(&PlanQuery {
            p_true: p,
            chi: 0.01,
            spec: ConfidenceBoundSpec::clopper_pearson(0.001).unwrap(),
            measure: ErrorMeasure::Width,
        })
        .unwrap()
        .n_required
    };
    assert!(plan(0.8) > 5 * plan(0.01));
}

/// The interval width at the planned n, for binomial draws around p·n,
/// is centred on the target.
#[test]
fn planned_sample_size_hits_target_width() {
    let spec = ConfidenceBoundSpec::clopper_pearson(0.01).unwrap();
    let (p, chi) = (0.2, 0.02);
    let n = required_samples(&PlanQuery {
        p_true: p,
        chi,
        spec,
        measure: ErrorMeasure::Width,
    })
    .unwrap()
    .n_required;
    // inverse-cdf binomial draws from the library's uniform source
    let cdf: Vec<f64> = (0..=n)
        .scan(0.0, |acc, k| {
            *acc += common::binom_pmf(k, n, p);
            Some(*acc)
        })
        .collect();
    let unit = NoiseSpec::new(1.0, 1).unwrap();
    let mut widths = Vec::new();
    for &s in derive_seed_list(21, 200).unwrap().as_slice() {
        let u = normal_cdf(sample_noise(&unit, s).unwrap()[0]);
        let k = cdf.partition_point(|&c| c < u) as u64;
        let sample = BinomialSample::new(k.min(n), n).unwrap();
        widths.push(upper_confidence_bound(sample, spec).unwrap() - lower_confidence_bound(sample, spec).unwrap());
    }
    let mean = widths.iter().sum::<f64>() / widths.len() as f64;
    assert!((mean - chi).abs() < 0.05 * chi, "mean width {mean} at n={n}");
}
