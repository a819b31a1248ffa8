//! Experiment orchestration: configuration, the training loop with its warm
//! start, sweeps and artifact emission.

mod config;
mod emit;
mod run;
mod sweep;

pub use config::{
    deep_merge, default_probe, DataConfig, GridSpec, ModConfig, RefineConfig, RunConfig,
    TaskConfig,
};
pub use emit::{bias_chart_svg, emit, report, summarize, CsvRow, METRICS_HEADER};
pub use run::{bias_distribution, run_experiment, RunResult};
pub use sweep::{expand_grid, sweep, sweep_threads, SweepCell};
