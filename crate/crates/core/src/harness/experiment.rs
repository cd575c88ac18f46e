use std::collections::HashMap;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::Experiment;
use crate::cache::{CacheHeader, CacheRecord};
use crate::certify::{certify, CertificationOutcome, CertifyParams};
use crate::classifier::ClassIndex;
use crate::error::{Error, Result};
use crate::irs::{certify_irs, estimate_zeta, IrsRoute};
use crate::noise::split_seed;

const CERTIFY_DOMAIN: u64 = 0x10;
const BASELINE_DOMAIN: u64 = 0x20;
const FRESH_DOMAIN: u64 = 0x30;
const FALLBACK_DOMAIN: u64 = 0x40;

fn stream_seed(master: u64, domain: u64, rep: usize, index: usize) -> u64 {
    split_seed(split_seed(split_seed(master, domain), rep as u64), index as u64)
}

/// One line of certification output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRow {
    pub input_id: String,
    pub label: ClassIndex,
    /// `certified`, `abstain` or `error`.
    pub status: String,
    pub prediction: Option<ClassIndex>,
    pub radius: f64,
    pub p_lower: Option<f64>,
    pub samples: u64,
    pub elapsed_secs: f64,
    pub route: Option<String>,
    pub zeta: Option<f64>,
    pub error: Option<String>,
}

impl OutcomeRow {
    fn from_outcome(id: String, label: ClassIndex, o: &CertificationOutcome, elapsed: f64) -> Self {
        Self {
            input_id: id,
            label,
            status: if o.is_certified() { "certified" } else { "abstain" }.into(),
            prediction: o.prediction(),
            radius: o.radius(),
            p_lower: Some(o.p_lower),
            samples: o.samples_used,
            elapsed_secs: elapsed,
            route: None,
            zeta: None,
            error: None,
        }
    }

    fn failed(id: String, label: ClassIndex, e: &Error) -> Self {
        Self {
            input_id: id,
            label,
            status: "error".into(),
            prediction: None,
            radius: 0.0,
            p_lower: None,
            samples: 0,
            elapsed_secs: 0.0,
            route: None,
            zeta: None,
            error: Some(e.to_string()),
        }
    }

    pub fn is_error(&self) -> bool {
        self.status == "error"
    }

    pub fn credited_radius(&self) -> f64 {
        if self.status == "certified" && self.prediction == Some(self.label) {
            self.radius
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone)]
pub struct CertifyRun {
    pub rows: Vec<OutcomeRow>,
    pub header: CacheHeader,
    pub records: Vec<CacheRecord>,
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Certifies the original classifier on every input. Inputs that fail are
/// reported as error rows and left out of the cache.
pub fn run_certify(exp: &Experiment) -> Result<CertifyRun> {
    let cfg = &exp.config;
    let results: Vec<_> = pool(cfg.workers)?.install(|| {
        (0..exp.inputs.len())
            .into_par_iter()
            .map(|i| {
                let params = cfg.certify_params(stream_seed(cfg.seed, CERTIFY_DOMAIN, 0, i));
                let start = Instant::now();
                let res = certify(&exp.original, exp.inputs.vector(i), &params);
                (res, start.elapsed().as_secs_f64())
            })
            .collect()
    });
    let mut rows = Vec::with_capacity(results.len());
    let mut records = Vec::with_capacity(results.len());
    for (i, (res, elapsed)) in results.into_iter().enumerate() {
        let (id, label) = (exp.inputs.id(i), exp.inputs.label(i));
        match res {
            Ok((outcome, mut record)) => {
                rows.push(OutcomeRow::from_outcome(id.clone(), label, &outcome, elapsed));
                record.input_id = id;
                records.push(record);
            }
            Err(e) => rows.push(OutcomeRow::failed(id, label, &e)),
        }
    }
    let header = CacheHeader::new(
        cfg.sigma,
        cfg.alpha,
        cfg.n,
        exp.original.identity(),
        cfg.created_unix.unwrap_or_else(now_unix),
    );
    Ok(CertifyRun {
        rows,
        header,
        records,
    })
}

fn index_records<'a>(
    exp: &Experiment,
    header: &CacheHeader,
    records: &'a [CacheRecord],
) -> Result<HashMap<&'a str, &'a CacheRecord>> {
    if header.sigma != exp.config.sigma {
        return Err(Error::CacheIncompatible(format!(
            "cache was built at sigma={}, configuration asks for sigma={}",
            header.sigma, exp.config.sigma
        )));
    }
    Ok(records.iter().map(|r| (r.input_id.as_str(), r)).collect())
}

/// Recertifies one input with IRS, falling back to a full certification when
/// the cached record abstained. Returns the outcome, route label and ζ.
fn recertify_one(
    exp: &Experiment,
    cache: &HashMap<&str, &CacheRecord>,
    i: usize,
    n_p: usize,
    gamma: f64,
    rep: usize,
) -> Result<(CertificationOutcome, &'static str, Option<f64>)> {
    let cfg = &exp.config;
    let approx = exp.approximated()?;
    let id = exp.inputs.id(i);
    let x = exp.inputs.vector(i);
    let record = cache.get(id.as_str()).ok_or_else(|| {
        Error::CacheIncompatible(format!("cache holds no record for input `{id}`"))
    })?;
    if record.is_abstained() {
        let params = CertifyParams {
            alpha: cfg.baseline_alpha(),
            ..cfg.certify_params(stream_seed(cfg.seed, FALLBACK_DOMAIN, rep, i))
        };
        let (outcome, _) = certify(approx, x, &params)?;
        return Ok((outcome, "fallback", None));
    }
    let params = crate::irs::IrsParams {
        gamma,
        ..cfg.irs_params(n_p, stream_seed(cfg.seed, FRESH_DOMAIN, rep, i))
    };
    let out = certify_irs(approx, x, &params, record)?;
    Ok(match out.route {
        IrsRoute::Reuse { zeta } => (out.outcome, "reuse", Some(zeta.zeta)),
        IrsRoute::Fresh => (out.outcome, "fresh", None),
    })
}

/// IRS recertification of the approximated classifier at one `n_p`.
pub fn run_recertify(
    exp: &Experiment,
    header: &CacheHeader,
    records: &[CacheRecord],
    n_p: usize,
) -> Result<Vec<OutcomeRow>> {
    let cache = index_records(exp, header, records)?;
    exp.approximated()?;
    let gamma = exp.config.gamma;
    pool(exp.config.workers)?.install(|| {
        Ok((0..exp.inputs.len())
            .into_par_iter()
            .map(|i| {
                let (id, label) = (exp.inputs.id(i), exp.inputs.label(i));
                let start = Instant::now();
                match recertify_one(exp, &cache, i, n_p, gamma, 0) {
                    Ok((o, route, zeta)) => {
                        let mut row =
                            OutcomeRow::from_outcome(id, label, &o, start.elapsed().as_secs_f64());
                        row.route = Some(route.into());
                        row.zeta = zeta;
                        row
                    }
                    Err(e) => OutcomeRow::failed(id, label, &e),
                }
            })
            .collect())
    })
}

/// Radius and time of both methods on one input.
struct Paired {
    irs_radius: f64,
    irs_secs: f64,
    irs_certified: bool,
    fallback: bool,
    base_radius: f64,
    base_secs: f64,
    base_certified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub n_p: usize,
    pub acr_baseline: f64,
    pub acr_irs: f64,
    pub mean_secs_baseline: f64,
    pub mean_secs_irs: f64,
    pub certified_baseline: f64,
    pub certified_irs: f64,
    /// Among inputs certified by either method.
    pub irs_greater: usize,
    pub irs_equal: usize,
    pub irs_less: usize,
    pub fallbacks: usize,
    pub failures: usize,
}

/// IRS against from-scratch certification of the approximated classifier,
/// one row per `n_p` fraction, averaged over repetitions.
pub fn run_compare(
    exp: &Experiment,
    header: &CacheHeader,
    records: &[CacheRecord],
) -> Result<Vec<ComparisonRow>> {
    let cfg = &exp.config;
    let cache = index_records(exp, header, records)?;
    let approx = exp.approximated()?;
    let pool = pool(cfg.workers)?;
    let mut rows = Vec::with_capacity(cfg.np_fractions.len());
    for &fraction in &cfg.np_fractions {
        let n_p = cfg.n_p_for(fraction);
        let mut paired = Vec::new();
        let mut failures = 0;
        for rep in 0..cfg.repetitions {
            let results: Vec<Result<Paired>> = pool.install(|| {
                (0..exp.inputs.len())
                    .into_par_iter()
                    .map(|i| {
                        let label = exp.inputs.label(i);
                        let start = Instant::now();
                        let (irs, route, _) = recertify_one(exp, &cache, i, n_p, cfg.gamma, rep)?;
                        let irs_secs = start.elapsed().as_secs_f64();

                        let params = CertifyParams {
                            n: n_p,
                            alpha: cfg.baseline_alpha(),
                            ..cfg.certify_params(stream_seed(
                                cfg.seed,
                                BASELINE_DOMAIN + n_p as u64,
                                rep,
                                i,
                            ))
                        };
                        let start = Instant::now();
                        let (base, _) = certify(approx, exp.inputs.vector(i), &params)?;
                        let base_secs = start.elapsed().as_secs_f64();
                        Ok(Paired {
                            irs_radius: irs.credited_radius(label),
                            irs_secs,
                            irs_certified: irs.is_certified(),
                            fallback: route == "fallback",
                            base_radius: base.credited_radius(label),
                            base_secs,
                            base_certified: base.is_certified(),
                        })
                    })
                    .collect()
            });
            for r in results {
                match r {
                    Ok(p) => paired.push(p),
                    Err(_) => failures += 1,
                }
            }
        }
        if paired.is_empty() {
            return Err(Error::Config(format!(
                "every input failed at n_p={n_p}; check the cache and classifier"
            )));
        }
        let m = paired.len() as f64;
        let mean = |f: &dyn Fn(&Paired) -> f64| paired.iter().map(f).sum::<f64>() / m;
        let decided = paired.iter().filter(|p| p.irs_radius > 0.0 || p.base_radius > 0.0);
        let (mut gt, mut eq, mut lt) = (0, 0, 0);
        for p in decided {
            match p.irs_radius.partial_cmp(&p.base_radius) {
                Some(std::cmp::Ordering::Greater) => gt += 1,
                Some(std::cmp::Ordering::Less) => lt += 1,
                _ => eq += 1,
            }
        }
        rows.push(ComparisonRow {
            n_p,
            acr_baseline: mean(&|p| p.base_radius),
            acr_irs: mean(&|p| p.irs_radius),
            mean_secs_baseline: mean(&|p| p.base_secs),
            mean_secs_irs: mean(&|p| p.irs_secs),
            certified_baseline: mean(&|p| p.base_certified as u8 as f64),
            certified_irs: mean(&|p| p.irs_certified as u8 as f64),
            irs_greater: gt,
            irs_equal: eq,
            irs_less: lt,
            fallbacks: paired.iter().filter(|p| p.fallback).count(),
            failures,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZetaRow {
    pub input_id: String,
    pub n_p: usize,
    pub disagreements: Option<u64>,
    pub zeta: Option<f64>,
    pub error: Option<String>,
}

/// ζ for every cached input at each configured `n_p`.
pub fn run_zeta(
    exp: &Experiment,
    header: &CacheHeader,
    records: &[CacheRecord],
) -> Result<Vec<ZetaRow>> {
    let cfg = &exp.config;
    let cache = index_records(exp, header, records)?;
    let approx = exp.approximated()?;
    let mut out = Vec::new();
    for &fraction in &cfg.np_fractions {
        let n_p = cfg.n_p_for(fraction);
        let rows: Vec<ZetaRow> = pool(cfg.workers)?.install(|| {
            (0..exp.inputs.len())
                .into_par_iter()
                .map(|i| {
                    let input_id = exp.inputs.id(i);
                    let res = cache
                        .get(input_id.as_str())
                        .ok_or_else(|| {
                            Error::CacheIncompatible(format!("no record for `{input_id}`"))
                        })
                        .and_then(|r| {
                            estimate_zeta(approx, exp.inputs.vector(i), &cfg.irs_params(n_p, 0), r)
                        });
                    match res {
                        Ok(z) => ZetaRow {
                            input_id,
                            n_p,
                            disagreements: Some(z.disagreements),
                            zeta: Some(z.zeta),
                            error: None,
                        },
                        Err(e) => ZetaRow {
                            input_id,
                            n_p,
                            disagreements: None,
                            zeta: None,
                            error: Some(e.to_string()),
                        },
                    }
                })
                .collect()
        });
        out.extend(rows);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaRow {
    pub gamma: f64,
    pub n_p: usize,
    pub acr: f64,
    pub mean_secs: f64,
    pub reused: usize,
    pub fresh: usize,
    pub fallbacks: usize,
    pub failures: usize,
}

/// IRS at the first `n_p` fraction for every γ in the configured list.
pub fn run_gamma_sweep(
    exp: &Experiment,
    header: &CacheHeader,
    records: &[CacheRecord],
) -> Result<Vec<GammaRow>> {
    let cfg = &exp.config;
    let cache = index_records(exp, header, records)?;
    exp.approximated()?;
    let n_p = cfg.n_p_for(cfg.np_fractions[0]);
    let pool = pool(cfg.workers)?;
    let mut rows = Vec::with_capacity(cfg.gammas.len());
    for &gamma in &cfg.gammas {
        let results: Vec<Result<(f64, f64, &str)>> = pool.install(|| {
            (0..exp.inputs.len())
                .into_par_iter()
                .map(|i| {
                    let start = Instant::now();
                    let (o, route, _) = recertify_one(exp, &cache, i, n_p, gamma, 0)?;
                    Ok((
                        o.credited_radius(exp.inputs.label(i)),
                        start.elapsed().as_secs_f64(),
                        route,
                    ))
                })
                .collect()
        });
        let ok: Vec<_> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
        let m = ok.len().max(1) as f64;
        let count = |name: &str| ok.iter().filter(|r| r.2 == name).count();
        rows.push(GammaRow {
            gamma,
            n_p,
            acr: ok.iter().map(|r| r.0).sum::<f64>() / m,
            mean_secs: ok.iter().map(|r| r.1).sum::<f64>() / m,
            reused: count("reuse"),
            fresh: count("fresh"),
            fallbacks: count("fallback"),
            failures: results.len() - ok.len(),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::ExperimentConfig;

    fn experiment(disagreement: f64) -> Experiment {
        ExperimentConfig::from_toml(&format!(
            r#"
            n = 2000
            seed = 7
            workers = 2
            created_unix = 1
            np_fractions = [0.05, 0.2]
            gammas = [0.9, 0.999]
            [scenario]
            kind = "threshold-pair"
            p_a = 0.8
            disagreement = {disagreement}
            dim = 3
            count = 20
            "#
        ))
        .unwrap()
        .build()
        .unwrap()
    }

    #[test]
    fn certify_then_compare() {
        let exp = experiment(0.01);
        let run = run_certify(&exp).unwrap();
        assert_eq!(run.rows.len(), 20);
        assert_eq!(run.records.len(), 20);
        assert!(run.rows.iter().all(|r| r.status == "certified" && r.prediction == Some(1)));
        assert_eq!(run.records[3].input_id, exp.inputs.id(3));

        let rows = run_compare(&exp, &run.header, &run.records).unwrap();
        assert_eq!(rows.iter().map(|r| r.n_p).collect::<Vec<_>>(), vec![100, 400]);
        for r in &rows {
            assert_eq!(r.failures, 0);
            assert!(r.acr_irs > 0.0);
            assert_eq!(r.irs_greater + r.irs_equal + r.irs_less, 20);
        }

        let recert = run_recertify(&exp, &run.header, &run.records, 100).unwrap();
        assert!(recert.iter().all(|r| r.route.as_deref() == Some("reuse") && r.zeta.is_some()));

        let sweep = run_gamma_sweep(&exp, &run.header, &run.records).unwrap();
        assert_eq!(sweep.len(), 2);
        assert_eq!(sweep[0].fresh + sweep[0].reused, 20);

        let zeta = run_zeta(&exp, &run.header, &run.records).unwrap();
        assert_eq!(zeta.len(), 40);
        assert!(zeta.iter().all(|z| z.error.is_none()));
    }

    #[test]
    fn certify_is_deterministic() {
        let exp = experiment(0.01);
        let a = run_certify(&exp).unwrap();
        let b = run_certify(&exp).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.header, b.header);
    }

    #[test]
    fn missing_records_are_reported_per_input() {
        let exp = experiment(0.01);
        let run = run_certify(&exp).unwrap();
        let rows = run_recertify(&exp, &run.header, &run.records[..10], 100).unwrap();
        assert_eq!(rows.iter().filter(|r| r.is_error()).count(), 10);
    }

    #[test]
    fn sigma_mismatch_is_rejected() {
        let exp = experiment(0.01);
        let mut run = run_certify(&exp).unwrap();
        run.header.sigma = 0.5;
        assert!(matches!(
            run_compare(&exp, &run.header, &run.records),
            Err(Error::CacheIncompatible(_))
        ));
    }
}
