//! Experiment harness for the hypermatch library: declarative configs,
//! seeded replica sweeps that can be interrupted and resumed, CSV/JSON
//! records and SVG charts.

pub mod config;
pub mod error;
pub mod experiments;
pub mod plot;
pub mod record;
pub mod runner;

pub use config::{Experiment, ExperimentConfig};
pub use error::{HResult, HarnessError};
pub use record::{RunRecord, Table};
pub use runner::{run, RunOutcome};
