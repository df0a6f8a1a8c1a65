//! Monte Carlo study of the naive and mixture-based customer estimators.

mod config;
mod report;
mod runner;
mod sampling;

pub use config::{
    benchmark_parameters, make_last_column_dependent, row_matrix, scenario_catalog, ScenarioConfig,
    DEFAULT_REPLICATIONS, DEFAULT_SEED,
};
pub use report::{summary_records, write_summary_json, write_sweep, write_scenario_table, SummaryRecord};
pub use runner::{
    ape_values, mape, run_replication, run_scenario, run_sweep, ApeSummary, EstimatorSummary,
    Replication, ScenarioResult, SweepAxis, SweepResult, SweepRow,
};
pub use sampling::{
    dirichlet_perturb_columns, dirichlet_perturb_frequencies, sample_dirichlet, sample_multinomial,
};
