//! Experiment harness for combinatorial pure exploration: JSON-configured
//! batch runs over many seeds, per-round runtime benchmarks, aggregation of
//! result files into plot-ready data, and small command-line tools around
//! the densest-k-subgraph oracle and static allocations.

pub mod bench;
pub mod config;
pub mod error;
pub mod experiment;
pub mod report;
pub mod tools;

pub use config::{
    AllocationStrategy, EnvironmentConfig, ExperimentConfig, NoiseKind, OracleChoice, Overrides,
};
pub use error::{HarnessError, Result};
pub use experiment::{run_experiment, ExperimentOutput, ResultRow, TraceRow};
