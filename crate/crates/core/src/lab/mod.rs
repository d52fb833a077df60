//! Configuration, experiment registry and report emission.

pub mod config;
mod experiments;
pub mod report;

pub use config::Config;
pub use experiments::{
    anomaly_families, experiment_names, random_potential, run_experiment, transport_for, Experiment,
};
pub use report::{emit_report, Format, ReportBundle, Table, Value, Verdict};
