//! Weight and function generators, experiment sweeps and report emission.

pub mod experiments;
pub mod generators;
pub mod report;

pub use experiments::{run_main_inequality, run_prop4, run_sweep, run_testing, ExperimentConfig};
pub use generators::{generate_weight, random_function, random_shift, FunctionKind, WeightSpec};
pub use report::{emit, Format, ResultRecord};
