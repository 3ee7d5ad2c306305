//! Experiment harness: configuration, file formats, mode dispatch and the
//! grid HTTP service.

pub mod config;
pub mod grid;
pub mod io;
pub mod run;
pub mod server;

pub use config::{ExperimentConfig, InputFile, Mode, Overrides, ScenarioConfig};
pub use grid::{build_grid, GridArtifact, GridCell};
pub use io::ingest_csv;
pub use run::{load_grid, run_experiment, RunReport};
pub use server::{serve_grid, GridService};
