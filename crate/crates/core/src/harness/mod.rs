//! Batch experiments: scenario files, seeded paired Monte-Carlo runs and
//! CSV / JSON outputs.

mod output;
mod run;
mod scenario;

pub use output::{aggregate, emit_outputs, mean_stderr, AggregateRow, OutputPaths, AGGREGATE_HEADER, PLOT_HEADER, RAW_HEADER};
pub use run::{run_method, run_scenario, trial_seed, ResultRow};
pub use scenario::{Allocation, Method, RateRule, Scenario, SweepAxis};
