//! Config-driven experiment runners emitting long-form CSV and JSON.

mod config;
mod experiments;
mod output;

pub use config::{ExperimentConfig, ExperimentKind, LabelPolicy, MitigationConfig, ModelKind};
pub use experiments::{
    farthest_minority_row, lowest_target_minority_row, run_clustering_experiment, run_experiment,
    run_nb_experiment, run_postprocess_demo, run_regression_experiment, REGRESSION_MASK,
};
pub use output::{ExperimentResult, ResultRow, Variant, VERSION};
