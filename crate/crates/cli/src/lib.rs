//! Experiment harness: data from a known location-scatter model, posterior
//! sampling, empirical and stochastic barycenters, model averages, and
//! long-format reports.

pub mod config;
pub mod error;
pub mod experiments;
pub mod report;

pub use config::{ExperimentConfig, Scale};
pub use error::{CliError, Result};
pub use experiments::{
    run_all, run_bary_vs_bma, run_barycenter_vs_truth, run_experiments, run_posterior_consistency, run_sgd_experiment,
    Context, Experiment,
};
pub use report::{emit_report, ExperimentReport, Format, Method, Metric, Record, Statistic, SummaryRow};
