//! Experiment orchestration for the cover-traffic game: JSON configs in,
//! result bundles and figure data out.

pub mod commands;
pub mod config;
pub mod data;
pub mod experiment;
pub mod fetch;
pub mod plotdata;

pub use config::{ExperimentConfig, ObjectiveKind, PrivacyLoss};
pub use data::{DataError, KnownDataset};
pub use experiment::{run_experiment, run_on_graph, Bundle, ExperimentOutcome, IndexRow, RunSummary};
pub use plotdata::{emit_plot_data, Figure, MissingRun};
