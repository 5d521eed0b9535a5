//! Experiment orchestration: leave-one-domain-out runs of cosml, its
//! ablations and baselines; results CSV; SVG plots.

mod config;
mod plot;
mod run;
mod suite;

pub use config::{default_domain_specs, ExperimentConfig, Method};
pub use plot::{plot, render_svg, PLOT_HEIGHT};
pub use run::{
    evaluate, mean_and_ci95, nearest_prototype_accuracy, pretrain_stage, run_method,
    run_pretrained, train_stage, RunResult,
};
pub use suite::{
    aggregate, load_results_csv, read_results_csv, run_suite, save_results_csv, write_results_csv,
    Aggregate, ResultRow, SuiteRun, CSV_COLUMNS,
};
