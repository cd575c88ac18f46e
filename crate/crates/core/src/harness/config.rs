//! Declarative experiment configuration (TOML).
//!
//! ```toml
//! sigma = 1.0
//! n0 = 100
//! n = 10000
//! alpha = 0.001
//! alpha_zeta = 0.001
//! gamma = 0.99
//! seed = 42
//! np_fractions = [0.01, 0.02, 0.05, 0.1]
//!
//! [scenario]            # or explicit [original], [approximated], [inputs]
//! kind = "threshold-pair"
//! p_a = 0.8
//! disagreement = 0.01
//! dim = 16
//! count = 500
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::inputs::InputSet;
use crate::certify::CertifyParams;
use crate::classifier::external::{ADAPTER_ENV, DEFAULT_BATCH_SIZE};
use crate::classifier::{
    ClassIndex, Classifier, Endpoint, ExternalClassifier, LinearMulticlass, Orientation, Table,
    Threshold1D,
};
use crate::error::{Error, Result};
use crate::irs::{IrsParams, DEFAULT_ALPHA, DEFAULT_ALPHA_ZETA, DEFAULT_GAMMA};
use crate::stats::inverse_normal_cdf;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ClassifierDescriptor {
    Threshold(Threshold1D),
    Linear(LinearMulticlass),
    Table(Table),
    External {
        /// Launch command; falls back to the adapter environment variable.
        #[serde(default)]
        command: Option<String>,
        /// Connect over TCP instead of spawning.
        #[serde(default)]
        addr: Option<String>,
        dim: usize,
        #[serde(default)]
        batch_size: Option<usize>,
    },
}

impl ClassifierDescriptor {
    pub fn build(&self) -> Result<Classifier> {
        Ok(match self {
            ClassifierDescriptor::Threshold(t) => {
                Classifier::Threshold1D(Threshold1D::new(t.threshold, t.orientation, t.dim)?)
            }
            ClassifierDescriptor::Linear(l) => Classifier::LinearMulticlass(LinearMulticlass::new(
                l.weights.clone(),
                l.bias.clone(),
            )?),
            ClassifierDescriptor::Table(t) => Classifier::Table(Table::new(
                t.points.clone(),
                t.labels.clone(),
                t.label_count,
            )?),
            ClassifierDescriptor::External {
                command,
                addr,
                dim,
                batch_size,
            } => {
                let endpoint = match (addr, command) {
                    (Some(addr), _) => Endpoint::Tcp { addr: addr.clone() },
                    (None, Some(cmd)) => Endpoint::from_command_line(cmd)?,
                    (None, None) => {
                        let cmd = std::env::var(ADAPTER_ENV).map_err(|_| {
                            Error::Config(format!(
                                "external classifier has no command or addr and {ADAPTER_ENV} is unset"
                            ))
                        })?;
                        Endpoint::from_command_line(&cmd)?
                    }
                };
                Classifier::External(ExternalClassifier::connect(
                    endpoint,
                    *dim,
                    batch_size.unwrap_or(DEFAULT_BATCH_SIZE),
                )?)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InputSource {
    /// `count` vectors with first coordinate `first` (or drawn from
    /// N(0, spread²) when absent) and remaining coordinates from N(0, spread²).
    Random {
        count: usize,
        dim: usize,
        #[serde(default)]
        first: Option<f64>,
        #[serde(default = "unit")]
        spread: f64,
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        label: Option<ClassIndex>,
    },
    /// First coordinate on an even grid over [start, stop]; others zero.
    Grid {
        start: f64,
        stop: f64,
        count: usize,
        #[serde(default = "one")]
        dim: usize,
    },
    /// Raw f32 vectors with a JSON dims header; see [`InputSet::read_raw`].
    File { path: PathBuf },
}

fn unit() -> f64 {
    1.0
}

fn one() -> usize {
    1
}

/// Analytic benchmark: a threshold classifier and a shifted copy whose
/// disagreement probability under noise is exactly `disagreement`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Scenario {
    ThresholdPair {
        /// Smoothed top-class probability of the original at every input.
        p_a: f64,
        disagreement: f64,
        #[serde(default = "one")]
        dim: usize,
        count: usize,
        /// Whether the approximation loses (true) or gains probability mass.
        #[serde(default = "yes")]
        degrade: bool,
        #[serde(default = "unit")]
        spread: f64,
    },
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "unit")]
    pub sigma: f64,
    #[serde(default = "default_n0")]
    pub n0: usize,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_alpha_zeta")]
    pub alpha_zeta: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_fractions")]
    pub np_fractions: Vec<f64>,
    #[serde(default = "default_gammas")]
    pub gammas: Vec<f64>,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    /// Worker threads; 0 means one per logical core.
    #[serde(default)]
    pub workers: usize,
    /// Cache header timestamp. Unset means "now".
    #[serde(default)]
    pub created_unix: Option<u64>,
    #[serde(default)]
    pub scenario: Option<Scenario>,
    #[serde(default)]
    pub original: Option<ClassifierDescriptor>,
    #[serde(default)]
    pub approximated: Option<ClassifierDescriptor>,
    #[serde(default)]
    pub inputs: Option<InputSource>,
}

fn default_n0() -> usize {
    100
}
fn default_n() -> usize {
    10_000
}
fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}
fn default_alpha_zeta() -> f64 {
    DEFAULT_ALPHA_ZETA
}
fn default_gamma() -> f64 {
    DEFAULT_GAMMA
}
fn default_fractions() -> Vec<f64> {
    (1..=10).map(|i| i as f64 / 100.0).collect()
}
fn default_gammas() -> Vec<f64> {
    vec![0.9, 0.95, 0.975, 0.99, 0.995, 0.999]
}
fn default_repetitions() -> usize {
    1
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        toml::from_str("").expect("defaults deserialize")
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.certify_params(0).validate()?;
        self.irs_params(1, 0).validate()?;
        if self.np_fractions.is_empty() {
            return Err(Error::Config("np_fractions must not be empty".into()));
        }
        if let Some(f) = self.np_fractions.iter().find(|&&f| !(f > 0.0 && f <= 1.0)) {
            return Err(Error::Config(format!("n_p fraction {f} outside (0, 1]")));
        }
        if let Some(g) = self.gammas.iter().find(|&&g| !(g > 0.5 && g < 1.0)) {
            return Err(Error::Config(format!("gamma {g} outside (0.5, 1)")));
        }
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        Ok(())
    }

    pub fn certify_params(&self, master_seed: u64) -> CertifyParams {
        CertifyParams {
            sigma: self.sigma,
            n0: self.n0,
            n: self.n,
            alpha: self.alpha,
            master_seed,
        }
    }

    pub fn irs_params(&self, n_p: usize, fresh_seed: u64) -> IrsParams {
        IrsParams {
            sigma: self.sigma,
            n_p,
            alpha: self.alpha,
            alpha_zeta: self.alpha_zeta,
            gamma: self.gamma,
            fresh_seed,
        }
    }

    /// Confidence of the from-scratch baseline, matched to IRS's combined budget.
    pub fn baseline_alpha(&self) -> f64 {
        self.alpha + self.alpha_zeta
    }

    /// `n_p` for a sweep fraction of `n`.
    pub fn n_p_for(&self, fraction: f64) -> usize {
        ((fraction * self.n as f64).round() as usize).clamp(1, self.n)
    }

    fn scenario_parts(&self) -> Result<Option<(ClassifierDescriptor, ClassifierDescriptor, InputSource)>> {
        let Some(Scenario::ThresholdPair {
            p_a,
            disagreement,
            dim,
            count,
            degrade,
            spread,
        }) = self.scenario.clone()
        else {
            return Ok(None);
        };
        if !(p_a > 0.5 && p_a < 1.0) {
            return Err(Error::Config(format!("scenario p_a {p_a} outside (0.5, 1)")));
        }
        let shifted = if degrade { p_a - disagreement } else { p_a + disagreement };
        if !(disagreement >= 0.0 && shifted > 0.0 && shifted < 1.0) {
            return Err(Error::Config(format!(
                "disagreement {disagreement} incompatible with p_a {p_a}"
            )));
        }
        // original threshold at 0, input at σΦ⁻¹(p_a); the copy's threshold
        // sits where its smoothed probability at the input is `shifted`.
        let x0 = self.sigma * inverse_normal_cdf(p_a)?;
        let t_approx = x0 - self.sigma * inverse_normal_cdf(shifted)?;
        let threshold = |t: f64| {
            ClassifierDescriptor::Threshold(Threshold1D {
                threshold: t,
                orientation: Orientation::Ascending,
                dim,
            })
        };
        Ok(Some((
            threshold(0.0),
            threshold(t_approx),
            InputSource::Random {
                count,
                dim,
                first: Some(x0),
                spread,
                seed: self.seed,
                label: Some(1),
            },
        )))
    }

    fn parts(&self) -> Result<(ClassifierDescriptor, Option<ClassifierDescriptor>, InputSource)> {
        let scenario = self.scenario_parts()?;
        let original = self
            .original
            .clone()
            .or_else(|| scenario.as_ref().map(|s| s.0.clone()))
            .ok_or_else(|| Error::Config("no [original] classifier or [scenario] given".into()))?;
        let approximated = self
            .approximated
            .clone()
            .or_else(|| scenario.as_ref().map(|s| s.1.clone()));
        let inputs = self
            .inputs
            .clone()
            .or_else(|| scenario.as_ref().map(|s| s.2.clone()))
            .ok_or_else(|| Error::Config("no [inputs] or [scenario] given".into()))?;
        Ok((original, approximated, inputs))
    }

    /// Instantiates classifiers and inputs.
    pub fn build(&self) -> Result<Experiment> {
        self.validate()?;
        let (original, approximated, inputs) = self.parts()?;
        let original = original.build()?;
        let approximated = approximated.map(|d| d.build()).transpose()?;
        let inputs = InputSet::from_source(&inputs, &original, self.sigma)?;
        if inputs.is_empty() {
            return Err(Error::Config("input set is empty".into()));
        }
        if inputs.dim() != original.dim() {
            return Err(Error::Config(format!(
                "inputs have dimension {}, classifier expects {}",
                inputs.dim(),
                original.dim()
            )));
        }
        Ok(Experiment {
            config: self.clone(),
            original,
            approximated,
            inputs,
        })
    }
}

#[derive(Debug)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub original: Classifier,
    pub approximated: Option<Classifier>,
    pub inputs: InputSet,
}

impl Experiment {
    pub fn approximated(&self) -> Result<&Classifier> {
        self.approximated
            .as_ref()
            .ok_or_else(|| Error::Config("no [approximated] classifier configured".into()))
    }
}
