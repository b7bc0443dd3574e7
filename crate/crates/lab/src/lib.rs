//! Experiment harness for the CH-NLS solver: run configuration documents,
//! compiled-in figure presets, measurement of soliton kinematics and errors,
//! and run directories with checksummed provenance manifests.

pub mod checks;
pub mod config;
pub mod harness;
pub mod measure;
pub mod output;
pub mod presets;

pub use config::{ConfigError, Experiment, RunConfig};
pub use harness::{run, HarnessError, RunOutcome, Summary};
pub use output::RunManifest;
