//! Experiment driver: configuration, batch certification, IRS comparison
//! sweeps and reporting.

mod aoc;
mod config;
mod experiment;
mod inputs;
mod report;

pub use aoc::{aoc_speedup, AocSpeedup};
pub use config::{ClassifierDescriptor, Experiment, ExperimentConfig, InputSource, Scenario};
pub use experiment::{
    run_certify, run_compare, run_gamma_sweep, run_recertify, run_zeta, CertifyRun, ComparisonRow,
    GammaRow, OutcomeRow, ZetaRow,
};
pub use inputs::InputSet;
pub use report::{write_rows, Format};
