//! Experiment configuration, orchestration, CSV output and trace analysis.

mod analysis;
mod config;
mod experiment;

pub use analysis::{fit_rate, oscillation_count, RateFit};
pub use config::{
    paper_grid, sweep_variants, BuiltProblem, DataSource, ExperimentConfig, ProblemSpec,
    VariantSpec, OUTPUT_DIR_ENV,
};
pub use experiment::{
    load_problem, run_experiment, run_experiment_on, ExperimentOutcome, LoadedProblem,
    VariantOutcome, SUMMARY_TAIL_FRACTION,
};
