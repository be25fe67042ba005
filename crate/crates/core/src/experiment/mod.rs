//! Seeded end-to-end experiments: simulate, optionally repair, train and
//! evaluate, repeated and aggregated.

mod report;
mod run;
mod spec;

pub use report::{repeats_jsonl, results_tsv, write_outputs, FAILED_MARKER, REPEATS_FILE, RESULTS_FILE};
pub use run::{
    mean_std, run_experiment, run_prob_grid, run_sampling_ratio, CellResult, GridRow, MetricStats,
    RatioRow, RepeatResult, RunResult, EXAMINATION, INTERVENTION, MERGING, MIN_COST, NO_DEBIAS,
    RANDOM_COST,
};
pub use spec::{desk_simulation, ExperimentSpec, ProbGrid, Scenario};
