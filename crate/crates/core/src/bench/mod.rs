//! Experiment harness: hyperparameter search on validation data, replicated
//! CATE error estimation, parameter sweeps and result tables.

mod bundle;
mod config;
mod grid;
mod model_id;
mod replication;
mod sweep;
mod table;

pub use bundle::{tnw_config, train_model, TestMetrics, TrainedModel};
pub use config::{Axis, ExperimentSpec, GridOverrides, SweepSpec};
pub use grid::{bandwidth_grid, forest_grid, grid_search, validation_mse, GridResult};
pub use model_id::ModelId;
pub use replication::{
    model_seed, replication_seed, replication_split, run_replication, run_replication_with_predictions,
    CellPredictions, ResultRow,
};
pub use sweep::{
    aggregate, read_summary_csv, sweep, sweep_with_progress, write_results_csv, write_summary_csv, SummaryRow,
    SweepOutput, RESULTS_HEADER, SUMMARY_HEADER,
};
pub use table::{emit_table, reference_value, Metric, Table};
