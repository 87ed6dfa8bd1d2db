//! Seeded Monte Carlo experiments and their serialization.

pub mod experiment;
pub mod output;
pub mod presets;
pub mod prop1;
pub mod validation;

pub use experiment::{
    aggregate, db_to_linear, run_experiment, run_trial, Aggregate, CcdfGrids, ExperimentSpec,
    MeanSe, Metadata, Outputs, ResultTable, Row, Sweep, SweepVar,
};
pub use prop1::{run_proposition1_check, Prop1Config, Prop1Report};
pub use validation::{
    run_bound_validation, BoundRow, BoundValidationConfig, BoundValidationReport,
};
