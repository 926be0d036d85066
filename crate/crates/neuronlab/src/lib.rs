//! Experiment harness: a registry of named experiments, config handling and
//! run artifacts.

pub mod error;
pub mod experiments;
pub mod registry;
pub mod run;
pub mod settings;

pub use error::{HarnessError, Result};
pub use registry::{lookup, names, REGISTRY};
pub use run::{builtin_fig1, emit_plot_data, run_experiment, ExperimentSpec, RunManifest};
pub use settings::Settings;
