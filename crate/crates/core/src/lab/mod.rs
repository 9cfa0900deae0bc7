//! Simulation scenarios and experiment drivers that check posterior
//! asymptotics as numeric trends.

mod experiments;
mod report;
mod scenario;

pub use experiments::{
    evidence_collection, fit_replicate, quantile, run_bvm_experiment, run_contraction_experiment,
    run_dimension_experiment, run_experiment, run_experiments, run_selection_experiment, Fit, Grid,
};
pub use report::{
    emit_report, median, read_report_csv, read_report_json, write_report, ExperimentKind,
    ExperimentReport, ReplicateRecord, ReportFormat, SCHEMA_VERSION,
};
pub use scenario::{
    generate_scenario, psi_certificate, DesignFamily, Eta0Spec, Generated, MagnitudeRule, Scenario,
};
