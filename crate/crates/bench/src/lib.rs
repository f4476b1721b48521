//! Benchmark harness for the `curvlasso` elastic-net solvers: dataset
//! registry and download, sketch caching, reference optima, step tuning and
//! experiment runs that emit trace CSVs and JSON summaries.

pub mod config;
pub mod datasets;
pub mod experiment;
pub mod reference;
pub mod solvers;
pub mod spectrum;
pub mod tune;

pub use config::{DatasetSpec, ExperimentConfig};
pub use experiment::{run_experiment, RunSummary};
pub use solvers::{BatchRule, Solver, SolverContext};
